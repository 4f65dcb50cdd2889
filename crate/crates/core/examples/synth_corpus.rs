//! Generate the synthetic corpus and show how student profiles shape code.
//!
//! ```text
//! cargo run --release --example synth_corpus -- [N_STUDENTS] [N_PROBLEMS] [SEED]
//! ```

use infooirt::corpus::{split, synth_generate, SplitRatios, SynthSpec};

fn main() -> infooirt::Result<()> {
    let arg = |i: usize, d: u64| std::env::args().nth(i).map_or(d, |s| s.parse().expect("integer argument"));
    let spec = SynthSpec {
        n_students: arg(1, 40) as usize,
        n_problems: arg(2, 8) as usize,
        seed: arg(3, 0),
        ..SynthSpec::default()
    };
    let corpus = synth_generate(&spec)?;
    let s = split(&corpus.submissions, SplitRatios::default(), spec.seed)?;
    println!(
        "{} problems, {} submissions: {} train / {} validation / {} test",
        corpus.problems.len(),
        corpus.submissions.len(),
        s.train.len(),
        s.validation.len(),
        s.test.len()
    );
    for p in &corpus.problems {
        println!("  {} [{:?}] {}", p.problem_id, p.skill_tag, p.statement.lines().next().unwrap_or(""));
    }

    // the same problem under the first two profiles
    let problem = &corpus.problems[0].problem_id;
    for profile in corpus.profiles.iter().take(2) {
        let sub = corpus
            .submissions
            .iter()
            .find(|x| x.student_id == profile.student_id && &x.problem_id == problem)
            .expect("one submission per pair");
        println!(
            "\n{} ({:?}, {:?}, {:?}):\n{}",
            profile.student_id, profile.indentation_style, profile.nesting_style, profile.loop_style, sub.code
        );
    }
    Ok(())
}
