//! Flip the discrete factor that best tracks indentation style and show how
//! the generated code changes.
//!
//! ```text
//! cargo run --release --example discrete_flip -- [CHECKPOINT]
//! ```
//! Trains a desk-scale model first when no checkpoint is given.

use std::path::Path;

use infooirt::analysis::{factor_recovery, flip_rate, sweep_discrete};
use infooirt::config::RunConfig;
use infooirt::corpus::{classify_indentation, StyleAttribute};
use infooirt::run::TrainedRun;

fn main() -> infooirt::Result<()> {
    let run = match std::env::args().nth(1) {
        Some(p) => TrainedRun::load(Path::new(&p))?,
        None => TrainedRun::train(&RunConfig::desk(), 0, &mut |e| eprintln!("epoch {}", e.epoch))?,
    };
    let (ck, p) = (&run.checkpoint, &run.prepared);
    let factor = match factor_recovery(ck, &p.corpus.profiles) {
        Ok(r) => r.matched(StyleAttribute::Indentation).map_or(0, |m| m.factor),
        Err(_) => 0,
    };
    let sub = &p.corpus.submissions[p.split.test[0]];
    let result = sweep_discrete(ck, &p.corpus.problems, &sub.student_id, &sub.problem_id, factor)?;
    println!("{}", result.side_by_side());

    let pairs: Vec<(String, String)> = p
        .split
        .test
        .iter()
        .map(|&i| (p.corpus.submissions[i].student_id.clone(), p.corpus.submissions[i].problem_id.clone()))
        .collect();
    let rate = flip_rate(ck, &p.corpus.problems, &pairs, factor, classify_indentation)?;
    println!("factor {factor}: indentation style changes on {:.1}% of test pairs", 100.0 * rate);
    Ok(())
}
