//! Q's negative log-likelihood per epoch with and without the information
//! term, as a table and an SVG plot.
//!
//! ```text
//! cargo run --release --example mi_curve -- [EPOCHS] [OUT_SVG]
//! ```

use infooirt::analysis::mi_curve;
use infooirt::config::RunConfig;
use infooirt::run::train_from_config;

fn main() -> infooirt::Result<()> {
    let mut args = std::env::args().skip(1);
    let epochs: usize = args.next().map_or(20, |s| s.parse().expect("epochs"));
    let out = args.next().unwrap_or_else(|| "mi_curve.svg".into());

    let mut logs = Vec::new();
    for lambda in [0.1, 0.0] {
        let mut config = RunConfig::desk();
        config.trainer.epochs = epochs;
        config.trainer.lambda = lambda;
        eprintln!("training λ={lambda}");
        let (_, outcome) = train_from_config(&config, 0, &mut |_| {})?;
        logs.push((format!("λ={lambda}"), outcome.log));
    }
    let curve = mi_curve(&logs)?;
    println!("{}", curve.table());
    std::fs::write(&out, curve.svg())?;
    println!("wrote {out}");
    Ok(())
}
