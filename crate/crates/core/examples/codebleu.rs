//! CodeBLEU components and dist-N for two snippets.
//!
//! ```text
//! cargo run --release --example codebleu -- [CANDIDATE_FILE REFERENCE_FILE]
//! ```

use infooirt::metrics::{codebleu, dist_n, CodeBleuWeights};

const CANDIDATE: &str = "public int sum(int[] a) {
    int s = 0;
    for (int i = 0; i < a.length; i++) {
        s += a[i];
    }
    return s;
}";

const REFERENCE: &str = "public int sum(int[] a)
{
    int total = 0;
    int i = 0;
    while (i < a.length)
    {
        total = total + a[i];
        i++;
    }
    return total;
}";

fn main() -> infooirt::Result<()> {
    let files: Vec<String> = std::env::args().skip(1).collect();
    let (cand, reference) = match files.as_slice() {
        [c, r] => (std::fs::read_to_string(c)?, std::fs::read_to_string(r)?),
        [] => (CANDIDATE.to_string(), REFERENCE.to_string()),
        _ => panic!("expected zero or two files"),
    };
    let r = codebleu(&cand, &reference, CodeBleuWeights::default())?;
    println!("n-gram           {:.4}", r.ngram);
    println!("weighted n-gram  {:.4}", r.weighted_ngram);
    println!("AST match        {:.4}", r.ast_match);
    println!("dataflow match   {:.4}", r.dataflow_match);
    println!("CodeBLEU         {:.4}", r.total);
    println!("candidate parses {}", r.candidate_parses);
    let both = [cand.as_str(), reference.as_str()];
    for n in 1..=3 {
        println!("dist-{n} over both {:.4}", dist_n(&both, n)?);
    }
    Ok(())
}
