//! Sweep the continuous factor for one (student, problem) pair, then measure
//! how stable generations are across small and extreme values.
//!
//! ```text
//! cargo run --release --example continuous_sweep -- [CHECKPOINT]
//! ```

use std::path::Path;

use infooirt::analysis::{annotate_nearest, sweep_continuous, sweep_robustness};
use infooirt::config::RunConfig;
use infooirt::run::TrainedRun;

fn main() -> infooirt::Result<()> {
    let run = match std::env::args().nth(1) {
        Some(p) => TrainedRun::load(Path::new(&p))?,
        None => TrainedRun::train(&RunConfig::desk(), 0, &mut |e| eprintln!("epoch {}", e.epoch))?,
    };
    let (ck, p, a) = (&run.checkpoint, &run.prepared, &run.config.analysis);
    let sub = &p.corpus.submissions[p.split.test[0]];
    let mut result = sweep_continuous(ck, &p.corpus.problems, &sub.student_id, &sub.problem_id, &a.sweep_values)?;
    annotate_nearest(&mut result, &p.corpus, run.config.metrics.weights())?;
    println!("{}", result.markdown());

    let pairs: Vec<(String, String)> = p
        .split
        .test
        .iter()
        .map(|&i| (p.corpus.submissions[i].student_id.clone(), p.corpus.submissions[i].problem_id.clone()))
        .collect();
    let r = sweep_robustness(ck, &p.corpus.problems, &pairs, &a.small_values, &a.extreme_values)?;
    println!(
        "{} pairs: unchanged across {:?}: {:.3}; parse rate at {:?}: {:.3}",
        r.pairs, r.small_values, r.unchanged_fraction, r.extreme_values, r.extreme_parse_rate
    );
    Ok(())
}
