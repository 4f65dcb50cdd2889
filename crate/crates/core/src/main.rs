use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use infooirt::analysis::{self, factor_recovery, mi_curve, sweep_continuous, sweep_discrete};
use infooirt::checkpoint::Checkpoint;
use infooirt::config::{CorpusSource, RunConfig};
use infooirt::corpus::{ColumnMapping, Corpus, SplitPart, StyleAttribute};
use infooirt::run::{self, RunDir, CHECKPOINT_FILE, LAST_CHECKPOINT_FILE, TRAIN_LOG_FILE};
use infooirt::trainer::{evaluate, train_with, EvalReport, ObjectiveKind, TrainLog};
use infooirt::Error;

#[derive(Parser)]
#[command(name = "infooirt", version, about = "Information-regularized open-ended IRT for student code")]
struct Cli {
    /// Where run directories are created.
    #[arg(long, global = true, default_value = "runs")]
    runs: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Run configuration (TOML); module defaults when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus with ground-truth student profiles.
    Synth(ConfigArgs),
    /// Read a CSEDM-style CSV export into a corpus.
    Ingest {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        input: PathBuf,
        /// Column mapping (TOML).
        #[arg(long)]
        mapping: Option<PathBuf>,
    },
    /// Train a model.
    Train {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Reuse the corpus and split of an earlier synth or ingest run.
        #[arg(long)]
        corpus: Option<PathBuf>,
    },
    /// Evaluate a checkpoint on one split.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value = "test")]
        split: SplitPart,
    },
    /// Vary one latent factor for a (student, problem) pair.
    Sweep {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        student: String,
        #[arg(long)]
        problem: String,
        /// Discrete factor to flip.
        #[arg(long, conflicts_with = "values")]
        factor: Option<usize>,
        /// Continuous values; the config's sweep grid when neither this nor
        /// --factor is given.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        values: Option<Vec<f64>>,
    },
    /// Per-epoch Q likelihood curves of training runs.
    MiCurve {
        /// Training run directories or train_log.jsonl files.
        #[arg(required = true)]
        logs: Vec<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        labels: Option<Vec<String>>,
    },
    /// Compare learned discrete factors with ground-truth style attributes.
    Recover {
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Evaluation, recovery, curves and example sweeps for a training run.
    Report {
        #[arg(long)]
        run: PathBuf,
    },
}

enum Failure {
    Usage(String),
    Module(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Module(e)
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error[usage]: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Module(e)) => {
            eprintln!("error[{}]: {e}", kind(&e));
            ExitCode::from(1)
        }
    }
}

fn kind(e: &Error) -> &'static str {
    match e {
        Error::Config(_) => "config",
        Error::Ingest { .. } | Error::IngestEmpty(_) | Error::Csv(_) => "ingest",
        Error::Syntax(_) => "syntax",
        Error::Vocabulary(_) => "vocabulary",
        Error::Shape(_) | Error::Overlength { .. } => "shape",
        Error::InvalidArgument(_) | Error::UnknownStudent(_) | Error::UnknownProblem(_) => "argument",
        Error::Divergence { .. } => "training",
        Error::Checkpoint(_) => "checkpoint",
        Error::Io(_) | Error::Json(_) => "io",
    }
}

fn dispatch(cli: &Cli) -> Outcome {
    match &cli.command {
        Command::Synth(cfg) => synth(&cli.runs, cfg),
        Command::Ingest { cfg, input, mapping } => ingest(&cli.runs, cfg, input, mapping.as_deref()),
        Command::Train { cfg, corpus } => train(&cli.runs, cfg, corpus.as_deref()),
        Command::Eval { checkpoint, split } => eval(&cli.runs, checkpoint, *split),
        Command::Sweep {
            checkpoint,
            student,
            problem,
            factor,
            values,
        } => sweep(&cli.runs, checkpoint, student, problem, *factor, values.as_deref()),
        Command::MiCurve { logs, labels } => curve(&cli.runs, logs, labels.as_deref()),
        Command::Recover { checkpoint } => recover(&cli.runs, checkpoint),
        Command::Report { run } => report(&cli.runs, run),
    }
}

fn resolve(args: &ConfigArgs) -> Result<(RunConfig, u64), Failure> {
    let mut config = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = args.seed {
        config.seed = Some(s);
    }
    let seed = config
        .seed
        .ok_or_else(|| Failure::Usage("a seed is required: pass --seed or set `seed` in the config".into()))?;
    Ok((config, seed))
}

fn synth(runs: &Path, args: &ConfigArgs) -> Outcome {
    let (mut config, seed) = resolve(args)?;
    config.corpus.source = CorpusSource::Synth;
    config.validate()?;
    let (corpus, _) = run::build_corpus(&config, seed)?;
    let p = run::prepare(corpus, config.corpus.split, seed)?;
    let dir = RunDir::create(runs, seed)?;
    dir.write_config(&config)?;
    dir.write_corpus(&p.corpus, &p.split)?;
    println!(
        "{} students, {} problems, {} submissions ({} train / {} validation / {} test)",
        p.corpus.profiles.len(),
        p.corpus.problems.len(),
        p.corpus.submissions.len(),
        p.split.train.len(),
        p.split.validation.len(),
        p.split.test.len()
    );
    println!("{}", dir.path.display());
    Ok(())
}

fn ingest(runs: &Path, args: &ConfigArgs, input: &Path, mapping: Option<&Path>) -> Outcome {
    let (mut config, seed) = resolve(args)?;
    config.corpus.source = CorpusSource::Csedm;
    config.corpus.csedm_path = Some(input.to_path_buf());
    if let Some(m) = mapping {
        ColumnMapping::load(m)?;
        config.corpus.mapping = Some(m.to_path_buf());
    }
    config.validate()?;
    let (corpus, report) = run::build_corpus(&config, seed)?;
    let p = run::prepare(corpus, config.corpus.split, seed)?;
    let dir = RunDir::create(runs, seed)?;
    dir.write_config(&config)?;
    dir.write_corpus(&p.corpus, &p.split)?;
    if let Some(r) = &report {
        dir.write_json("ingest_report.json", r)?;
        println!(
            "{} rows, {} first attempts, {} dropped as unparseable ({:.3}), {} retained",
            r.rows, r.first_attempts, r.dropped_unparseable, r.drop_fraction, r.retained
        );
    }
    println!("{}", dir.path.display());
    Ok(())
}

fn train(runs: &Path, args: &ConfigArgs, corpus_run: Option<&Path>) -> Outcome {
    let (config, seed) = resolve(args)?;
    config.validate()?;
    let prepared = match corpus_run {
        Some(src) => {
            let src = RunDir::open(src)?;
            let corpus = src.read_corpus()?;
            let split = src.read_split(&corpus, seed)?;
            run::prepare_with_split(corpus, split)?
        }
        None => {
            let (corpus, _) = run::build_corpus(&config, seed)?;
            run::prepare(corpus, config.corpus.split, seed)?
        }
    };
    let tc = config.train_config(seed)?;
    let dir = RunDir::create(runs, seed)?;
    dir.write_config(&config)?;
    dir.write_corpus(&prepared.corpus, &prepared.split)?;
    let outcome = train_with(&tc, &prepared.data, &prepared.split, &mut |e| {
        eprintln!(
            "epoch {:>3}  oirt {:.4}  q_nll {:.4}  val {:.4}",
            e.epoch, e.train_oirt, e.train_q_nll, e.val_oirt
        )
    })?;
    outcome.best.save(&dir.file(CHECKPOINT_FILE))?;
    outcome.last.save(&dir.file(LAST_CHECKPOINT_FILE))?;
    outcome.log.write_jsonl(&dir.file(TRAIN_LOG_FILE))?;
    println!(
        "best epoch {} (validation loss {:.4})",
        outcome.best.epoch, outcome.best.validation_loss
    );
    println!("{}", dir.path.display());
    Ok(())
}

fn open_checkpoint(path: &Path) -> Result<(Checkpoint, RunDir, RunConfig), Failure> {
    let ck = Checkpoint::load(path)?;
    let src = RunDir::of_checkpoint(path)?;
    let config = src.read_config()?;
    Ok((ck, src, config))
}

fn echo(runs: &Path, config: &RunConfig, seed: u64) -> Result<RunDir, Failure> {
    let dir = RunDir::create(runs, seed)?;
    dir.write_config(config)?;
    Ok(dir)
}

fn eval(runs: &Path, checkpoint: &Path, part: SplitPart) -> Outcome {
    let (ck, src, config) = open_checkpoint(checkpoint)?;
    let p = src.dataset_for(&ck)?;
    let rep = evaluate(&ck, &p.data, part, p.split.part(part), config.metrics.weights())?;
    let dir = echo(runs, &config, ck.config.seed)?;
    let name = format!("eval_{part}");
    dir.write_json(&format!("{name}.json"), &rep)?;
    let table = rep.table(model_name(&ck));
    dir.write_text(&format!("{name}.md"), &format!("{table}\n"))?;
    println!("{table}");
    println!("{}", dir.path.display());
    Ok(())
}

fn model_name(ck: &Checkpoint) -> &'static str {
    match ck.config.objective {
        ObjectiveKind::Oirt => "OIRT",
        ObjectiveKind::InfoOirt => "InfoOIRT",
    }
}

fn sweep(runs: &Path, checkpoint: &Path, student: &str, problem: &str, factor: Option<usize>, values: Option<&[f64]>) -> Outcome {
    let (ck, src, config) = open_checkpoint(checkpoint)?;
    let corpus = src.read_corpus()?;
    let result = match factor {
        Some(f) => sweep_discrete(&ck, &corpus.problems, student, problem, f)?,
        None => {
            let values = values.unwrap_or(&config.analysis.sweep_values);
            let mut r = sweep_continuous(&ck, &corpus.problems, student, problem, values)?;
            analysis::annotate_nearest(&mut r, &corpus, config.metrics.weights())?;
            r
        }
    };
    let dir = echo(runs, &config, ck.config.seed)?;
    dir.write_json("sweep.json", &result)?;
    let md = result.markdown();
    dir.write_text("sweep.md", &md)?;
    println!("{md}");
    println!("{}", dir.path.display());
    Ok(())
}

fn load_log(path: &Path) -> Result<(TrainLog, Option<RunConfig>, PathBuf), Failure> {
    let (file, dir) = if path.is_dir() {
        (path.join(TRAIN_LOG_FILE), Some(path.to_path_buf()))
    } else {
        (path.to_path_buf(), path.parent().map(Path::to_path_buf))
    };
    let log = TrainLog::read_jsonl(&file)?;
    let config = dir
        .map(|d| d.join(run::CONFIG_FILE))
        .filter(|c| c.exists())
        .map(|c| RunConfig::load(&c))
        .transpose()?;
    Ok((log, config, file))
}

fn curve(runs: &Path, paths: &[PathBuf], labels: Option<&[String]>) -> Outcome {
    if let Some(l) = labels {
        if l.len() != paths.len() {
            return Err(Failure::Usage(format!("{} labels for {} logs", l.len(), paths.len())));
        }
    }
    let mut logs = Vec::with_capacity(paths.len());
    let mut seed = 0;
    for (i, p) in paths.iter().enumerate() {
        let (log, config, file) = load_log(p)?;
        let label = match (labels, &config) {
            (Some(l), _) => l[i].clone(),
            (None, Some(c)) => format!("lambda={} seed={}", c.trainer.lambda, c.seed.unwrap_or(0)),
            (None, None) => file.display().to_string(),
        };
        if i == 0 {
            seed = config.as_ref().and_then(|c| c.seed).unwrap_or(0);
        }
        logs.push((label, log));
    }
    let curve = mi_curve(&logs)?;
    let dir = RunDir::create(runs, seed)?;
    dir.write_config(&RunConfig { seed: Some(seed), ..RunConfig::default() })?;
    dir.write_json("mi_curve.json", &curve)?;
    dir.write_text("mi_curve.md", &curve.table())?;
    dir.write_text("mi_curve.svg", &curve.svg())?;
    for s in &curve.series {
        println!("{}: q_nll {:.4} -> {:.4}", s.label, s.q_nll[0], s.q_nll[s.q_nll.len() - 1]);
    }
    println!("{}", dir.path.display());
    Ok(())
}

fn recovery(ck: &Checkpoint, corpus: &Corpus) -> Result<analysis::RecoveryReport, Failure> {
    if corpus.profiles.is_empty() {
        return Err(Failure::Module(Error::InvalidArgument(
            "the corpus has no ground-truth profiles".into(),
        )));
    }
    Ok(factor_recovery(ck, &corpus.profiles)?)
}

fn recover(runs: &Path, checkpoint: &Path) -> Outcome {
    let (ck, src, config) = open_checkpoint(checkpoint)?;
    let corpus = src.read_corpus()?;
    let rep = recovery(&ck, &corpus)?;
    let dir = echo(runs, &config, ck.config.seed)?;
    dir.write_json("recovery.json", &rep)?;
    dir.write_text("recovery.md", &rep.table())?;
    println!("{}", rep.table());
    println!("{}", dir.path.display());
    Ok(())
}

fn report(runs: &Path, run_dir: &Path) -> Outcome {
    let src = RunDir::open(run_dir)?;
    let config = src.read_config()?;
    let ck = Checkpoint::load(&src.file(CHECKPOINT_FILE))?;
    let p = src.dataset_for(&ck)?;
    let weights = config.metrics.weights();
    let dir = echo(runs, &config, ck.config.seed)?;

    let mut md = format!("# Run report\n\nSource run: `{}`\n\n", src.path.display());
    md.push_str(&format!("```toml\n{}```\n\n", config.to_toml()?));

    let rep: EvalReport = evaluate(&ck, &p.data, SplitPart::Test, &p.split.test, weights)?;
    dir.write_json("eval_test.json", &rep)?;
    md.push_str(&format!(
        "## Test split\n\nBest epoch {} (validation loss {:.4}).\n\n{}\n\nParse rate {:.3}.\n\n",
        ck.epoch,
        ck.validation_loss,
        rep.table(model_name(&ck)),
        rep.parse_rate
    ));

    let log_path = src.file(TRAIN_LOG_FILE);
    if log_path.exists() {
        let log = TrainLog::read_jsonl(&log_path)?;
        let curve = mi_curve(&[(format!("lambda={}", config.trainer.lambda), log)])?;
        dir.write_text("mi_curve.svg", &curve.svg())?;
        md.push_str("## Q negative log-likelihood\n\n![q_nll](mi_curve.svg)\n\n");
        md.push_str(&curve.table());
        md.push('\n');
    }

    if ck.config.objective == ObjectiveKind::InfoOirt && !p.corpus.profiles.is_empty() {
        let rec = recovery(&ck, &p.corpus)?;
        dir.write_json("recovery.json", &rec)?;
        md.push_str("## Factor recovery\n\nStarred cells are the matched factor for each attribute.\n\n");
        md.push_str(&rec.table());
        md.push('\n');
        let example = p.split.test.first().map(|&i| &p.corpus.submissions[i]);
        if let (Some(sub), Some(m)) = (example, rec.matched(StyleAttribute::Indentation)) {
            let r = sweep_discrete(&ck, &p.corpus.problems, &sub.student_id, &sub.problem_id, m.factor)?;
            md.push_str(&format!("## Flipping factor {} (matched to indentation)\n\n", m.factor));
            md.push_str(&r.markdown());
            md.push('\n');
            if ck.store.config.d_cont > 0 {
                let mut r = sweep_continuous(&ck, &p.corpus.problems, &sub.student_id, &sub.problem_id, &config.analysis.sweep_values)?;
                analysis::annotate_nearest(&mut r, &p.corpus, weights)?;
                md.push_str("## Continuous sweep\n\n");
                md.push_str(&r.markdown());
                md.push('\n');
            }
        }
    }
    let path = dir.write_text("report.md", &md)?;
    println!("{}", path.display());
    Ok(())
}
