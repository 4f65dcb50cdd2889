//! Run directories and the corpus → split → dataset pipeline shared by the
//! command line and the examples.
//!
//! A run directory holds the resolved `config.toml`, the corpus and split it
//! used, and whatever the run produced:
//!
//! ```text
//! runs/20261016T093000Z-seed7/
//!   config.toml
//!   corpus/{problems,submissions,profiles}.jsonl
//!   split/{train,validation,test}.ids
//!   checkpoint.ckpt  last.ckpt  train_log.jsonl
//! ```

use std::path::{Path, PathBuf};

use crate::checkpoint::Checkpoint;
use crate::config::{CorpusSource, RunConfig};
use crate::corpus::{
    ingest_csedm_with, split, synth_generate, ColumnMapping, Corpus, CorpusSplit, IngestReport,
    SplitRatios,
};
use crate::error::{Error, Result};
use crate::trainer::{train_with, Dataset, EpochRecord, TrainOutcome};

pub const CONFIG_FILE: &str = "config.toml";
pub const CORPUS_DIR: &str = "corpus";
pub const SPLIT_DIR: &str = "split";
pub const CHECKPOINT_FILE: &str = "checkpoint.ckpt";
pub const LAST_CHECKPOINT_FILE: &str = "last.ckpt";
pub const TRAIN_LOG_FILE: &str = "train_log.jsonl";

/// The corpus named by the config: synthesized with `seed`, or ingested.
pub fn build_corpus(config: &RunConfig, seed: u64) -> Result<(Corpus, Option<IngestReport>)> {
    match config.corpus.source {
        CorpusSource::Synth => Ok((synth_generate(&config.corpus.synth_spec(seed))?, None)),
        CorpusSource::Csedm => {
            let path = config
                .corpus
                .csedm_path
                .as_deref()
                .ok_or_else(|| Error::Config("source = \"csedm\" needs csedm_path".into()))?;
            let mapping = match &config.corpus.mapping {
                Some(m) => ColumnMapping::load(m)?,
                None => ColumnMapping::default(),
            };
            let (problems, submissions, report) = ingest_csedm_with(path, &mapping)?;
            let corpus = Corpus {
                problems,
                submissions,
                profiles: Vec::new(),
            };
            Ok((corpus, Some(report)))
        }
    }
}

/// A corpus with its split and a dataset encoded against a vocabulary built
/// from the training part.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub corpus: Corpus,
    pub split: CorpusSplit,
    pub data: Dataset,
}

pub fn prepare(corpus: Corpus, ratios: SplitRatios, seed: u64) -> Result<Prepared> {
    let split = split(&corpus.submissions, ratios, seed)?;
    prepare_with_split(corpus, split)
}

pub fn prepare_with_split(corpus: Corpus, split: CorpusSplit) -> Result<Prepared> {
    let vocab = Dataset::build_vocab(&corpus, &split)?;
    let data = Dataset::new(&corpus, vocab)?;
    Ok(Prepared { corpus, split, data })
}

/// Build the configured corpus with `seed`, split it and train on it.
pub fn train_from_config(
    config: &RunConfig,
    seed: u64,
    on_epoch: &mut dyn FnMut(&EpochRecord),
) -> Result<(Prepared, TrainOutcome)> {
    config.validate()?;
    let (corpus, _) = build_corpus(config, seed)?;
    let prepared = prepare(corpus, config.corpus.split, seed)?;
    let outcome = train_with(&config.train_config(seed)?, &prepared.data, &prepared.split, on_epoch)?;
    Ok((prepared, outcome))
}

/// A checkpoint with the configuration and data of the run that produced it.
pub struct TrainedRun {
    pub checkpoint: Checkpoint,
    pub config: RunConfig,
    pub prepared: Prepared,
}

impl TrainedRun {
    /// Load a checkpoint written into a run directory.
    pub fn load(checkpoint: &Path) -> Result<TrainedRun> {
        let ck = Checkpoint::load(checkpoint)?;
        let dir = RunDir::of_checkpoint(checkpoint)?;
        let config = dir.read_config()?;
        let prepared = dir.dataset_for(&ck)?;
        Ok(TrainedRun { checkpoint: ck, config, prepared })
    }

    /// Train the configured model from scratch and keep the best checkpoint.
    pub fn train(config: &RunConfig, seed: u64, on_epoch: &mut dyn FnMut(&EpochRecord)) -> Result<TrainedRun> {
        let (prepared, outcome) = train_from_config(config, seed, on_epoch)?;
        Ok(TrainedRun {
            checkpoint: outcome.best,
            config: config.clone(),
            prepared,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunDir {
    pub path: PathBuf,
}

impl RunDir {
    /// A fresh directory under `root` named by UTC time and seed.
    pub fn create(root: &Path, seed: u64) -> Result<RunDir> {
        let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%SZ");
        let base = format!("{stamp}-seed{seed}");
        std::fs::create_dir_all(root)?;
        for n in 0.. {
            let name = if n == 0 { base.clone() } else { format!("{base}-{n}") };
            let path = root.join(name);
            match std::fs::create_dir(&path) {
                Ok(()) => return Ok(RunDir { path }),
                Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
                Err(e) => return Err(e.into()),
            }
        }
        unreachable!("unbounded search")
    }

    pub fn open(path: &Path) -> Result<RunDir> {
        if !path.is_dir() {
            return Err(Error::InvalidArgument(format!("{} is not a run directory", path.display())));
        }
        Ok(RunDir { path: path.to_path_buf() })
    }

    /// The run directory a checkpoint file was written into.
    pub fn of_checkpoint(checkpoint: &Path) -> Result<RunDir> {
        let parent = checkpoint
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or(Path::new("."));
        Self::open(parent)
    }

    pub fn file(&self, name: &str) -> PathBuf {
        self.path.join(name)
    }

    pub fn write_config(&self, config: &RunConfig) -> Result<()> {
        std::fs::write(self.file(CONFIG_FILE), config.to_toml()?)?;
        Ok(())
    }

    pub fn read_config(&self) -> Result<RunConfig> {
        RunConfig::load(&self.file(CONFIG_FILE))
    }

    pub fn write_corpus(&self, corpus: &Corpus, split: &CorpusSplit) -> Result<()> {
        corpus.save(&self.file(CORPUS_DIR))?;
        split.write_manifests(&self.file(SPLIT_DIR), &corpus.submissions)
    }

    pub fn read_corpus(&self) -> Result<Corpus> {
        Corpus::load(&self.file(CORPUS_DIR))
    }

    pub fn read_split(&self, corpus: &Corpus, seed: u64) -> Result<CorpusSplit> {
        CorpusSplit::read_manifests(&self.file(SPLIT_DIR), &corpus.submissions, seed)
    }

    /// Corpus and split saved in this directory, encoded with the
    /// checkpoint's vocabulary.
    pub fn dataset_for(&self, ck: &Checkpoint) -> Result<Prepared> {
        let corpus = self.read_corpus()?;
        let split = self.read_split(&corpus, ck.config.seed)?;
        let data = Dataset::new(&corpus, ck.vocab.clone())?;
        Ok(Prepared { corpus, split, data })
    }

    pub fn write_json<T: serde::Serialize>(&self, name: &str, value: &T) -> Result<PathBuf> {
        let path = self.file(name);
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        std::fs::write(&path, text)?;
        Ok(path)
    }

    pub fn write_text(&self, name: &str, text: &str) -> Result<PathBuf> {
        let path = self.file(name);
        std::fs::write(&path, text)?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn run_dirs_are_unique_and_named_by_seed() {
        let root = tempfile::tempdir().unwrap();
        let a = RunDir::create(root.path(), 7).unwrap();
        let b = RunDir::create(root.path(), 7).unwrap();
        assert_ne!(a, b);
        let name = a.path.file_name().unwrap().to_string_lossy().into_owned();
        assert!(name.contains("-seed7"), "{name}");
    }

    #[test]
    fn corpus_and_config_round_trip() {
        let root = tempfile::tempdir().unwrap();
        let dir = RunDir::create(root.path(), 1).unwrap();
        let mut config = RunConfig::desk();
        config.seed = Some(1);
        config.corpus.n_students = 6;
        config.corpus.n_problems = 3;
        let (corpus, report) = build_corpus(&config, 1).unwrap();
        assert!(report.is_none());
        let p = prepare(corpus, config.corpus.split, 1).unwrap();
        dir.write_config(&config).unwrap();
        dir.write_corpus(&p.corpus, &p.split).unwrap();
        assert_eq!(dir.read_config().unwrap(), config);
        let corpus = dir.read_corpus().unwrap();
        assert_eq!(corpus, p.corpus);
        assert_eq!(dir.read_split(&corpus, 1).unwrap(), p.split);
    }
}
