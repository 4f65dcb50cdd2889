//! How well each learned discrete factor separates the synthetic students'
//! ground-truth style attributes.
//!
//! ```text
//! cargo run --release --example factor_recovery -- [CHECKPOINT]
//! ```

use std::path::Path;

use infooirt::analysis::factor_recovery;
use infooirt::config::RunConfig;
use infooirt::run::TrainedRun;

fn main() -> infooirt::Result<()> {
    let run = match std::env::args().nth(1) {
        Some(p) => TrainedRun::load(Path::new(&p))?,
        None => TrainedRun::train(&RunConfig::desk(), 0, &mut |e| eprintln!("epoch {}", e.epoch))?,
    };
    let report = factor_recovery(&run.checkpoint, &run.prepared.corpus.profiles)?;
    println!("{}", report.table());
    for m in &report.assignment {
        println!("{}: factor {} at {:.3} (chance {:.3})", m.attribute, m.factor, m.accuracy, m.chance);
    }
    let entropies: Vec<String> = run
        .checkpoint
        .store
        .factor_entropies()
        .iter()
        .map(|h| format!("{h:.3}"))
        .collect();
    println!("mean entropy per factor: {}", entropies.join(" "));
    Ok(())
}
