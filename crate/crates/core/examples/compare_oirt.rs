//! InfoOIRT next to the OIRT baseline with an equally sized free state, on
//! the same corpus and seed.
//!
//! ```text
//! cargo run --release --example compare_oirt -- [EPOCHS] [SEED]
//! ```

use infooirt::config::RunConfig;
use infooirt::corpus::SplitPart;
use infooirt::knowledge::KnowledgeConfig;
use infooirt::run::train_from_config;
use infooirt::trainer::{evaluate, EvalReport, ObjectiveKind};

fn main() -> infooirt::Result<()> {
    let mut args = std::env::args().skip(1);
    let epochs: usize = args.next().map_or(40, |s| s.parse().expect("epochs"));
    let seed: u64 = args.next().map_or(0, |s| s.parse().expect("seed"));

    let mut info = RunConfig::desk();
    info.trainer.epochs = epochs;
    let mut oirt = info.clone();
    oirt.knowledge = KnowledgeConfig::oirt(info.knowledge.h_dim());
    oirt.trainer.objective = ObjectiveKind::Oirt;
    oirt.trainer.lambda = 0.0;

    let mut rows = Vec::new();
    for (name, config) in [("OIRT", &oirt), ("InfoOIRT", &info)] {
        eprintln!("training {name}");
        let (p, outcome) = train_from_config(config, seed, &mut |_| {})?;
        let r = evaluate(&outcome.best, &p.data, SplitPart::Test, &p.split.test, config.metrics.weights())?;
        rows.push(r.table_row(name));
    }
    println!("{}", EvalReport::table_header());
    for r in rows {
        println!("{r}");
    }
    Ok(())
}
