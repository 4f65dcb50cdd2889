//! Train InfoOIRT on the synthetic corpus and evaluate it on the test split.
//! The run directory it writes can be passed to the analysis examples.
//!
//! ```text
//! cargo run --release --example train_infooirt -- [EPOCHS] [SEED]
//! ```

use std::path::Path;

use infooirt::config::RunConfig;
use infooirt::corpus::SplitPart;
use infooirt::run::{train_from_config, RunDir, CHECKPOINT_FILE, TRAIN_LOG_FILE};
use infooirt::trainer::evaluate;

fn main() -> infooirt::Result<()> {
    let mut config = RunConfig::desk();
    let mut args = std::env::args().skip(1);
    if let Some(e) = args.next() {
        config.trainer.epochs = e.parse().expect("epochs");
    }
    let seed = args.next().map_or(0, |s| s.parse().expect("seed"));
    config.seed = Some(seed);

    let (p, outcome) = train_from_config(&config, seed, &mut |e| {
        eprintln!(
            "epoch {:>3}  oirt {:.4}  q_nll {:.4}  val {:.4}  tau {:.3}",
            e.epoch, e.train_oirt, e.train_q_nll, e.val_oirt, e.tau
        )
    })?;
    let dir = RunDir::create(Path::new("runs"), seed)?;
    dir.write_config(&config)?;
    dir.write_corpus(&p.corpus, &p.split)?;
    outcome.best.save(&dir.file(CHECKPOINT_FILE))?;
    outcome.log.write_jsonl(&dir.file(TRAIN_LOG_FILE))?;

    let report = evaluate(&outcome.best, &p.data, SplitPart::Test, &p.split.test, config.metrics.weights())?;
    println!("{}", report.table("InfoOIRT"));
    println!("parse rate {:.3}, best epoch {}", report.parse_rate, outcome.best.epoch);
    let g = &report.generations[0];
    println!("\n{} / {} (CodeBLEU {:.3}):\n{}", g.student_id, g.problem_id, g.codebleu, g.code);
    println!("\ncheckpoint: {}", dir.file(CHECKPOINT_FILE).display());
    Ok(())
}
