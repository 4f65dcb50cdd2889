//! One TOML file describing a whole run. Every section is optional and falls
//! back to the module defaults; unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::DEFAULT_SWEEP;
use crate::corpus::{SplitRatios, SynthSpec};
use crate::error::{Error, Result};
use crate::generator::GeneratorConfig;
use crate::knowledge::KnowledgeConfig;
use crate::metrics::CodeBleuWeights;
use crate::trainer::{ObjectiveKind, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusSource {
    Synth,
    Csedm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSection {
    pub source: CorpusSource,
    pub n_students: usize,
    pub n_problems: usize,
    pub bug_rate: f64,
    /// CSV export for `source = "csedm"`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub csedm_path: Option<PathBuf>,
    /// Column mapping file; the public schema when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mapping: Option<PathBuf>,
    pub split: SplitRatios,
}

impl Default for CorpusSection {
    fn default() -> Self {
        let s = SynthSpec::default();
        CorpusSection {
            source: CorpusSource::Synth,
            n_students: s.n_students,
            n_problems: s.n_problems,
            bug_rate: s.bug_rate,
            csedm_path: None,
            mapping: None,
            split: SplitRatios::default(),
        }
    }
}

impl CorpusSection {
    pub fn synth_spec(&self, seed: u64) -> SynthSpec {
        SynthSpec {
            n_students: self.n_students,
            n_problems: self.n_problems,
            bug_rate: self.bug_rate,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainerSection {
    pub objective: ObjectiveKind,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr_generator: f64,
    pub lr_side: f64,
    pub weight_decay: f64,
    pub warmup_fraction: f64,
    pub clip_norm: f64,
    pub tau_start: f64,
    pub tau_end: f64,
    pub lambda: f64,
    pub q_target_gradient: bool,
}

impl Default for TrainerSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainerSection {
            objective: t.objective,
            epochs: t.epochs,
            batch_size: t.batch_size,
            lr_generator: t.lr_generator,
            lr_side: t.lr_side,
            weight_decay: t.weight_decay,
            warmup_fraction: t.warmup_fraction,
            clip_norm: t.clip_norm,
            tau_start: t.tau_start,
            tau_end: t.tau_end,
            lambda: t.lambda,
            q_target_gradient: t.q_target_gradient,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsSection {
    /// `[ngram, weighted_ngram, ast_match, dataflow_match]`.
    pub codebleu_weights: [f64; 4],
}

impl Default for MetricsSection {
    fn default() -> Self {
        MetricsSection {
            codebleu_weights: CodeBleuWeights::default().0,
        }
    }
}

impl MetricsSection {
    pub fn weights(&self) -> CodeBleuWeights {
        CodeBleuWeights(self.codebleu_weights)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisSection {
    pub sweep_values: Vec<f64>,
    pub small_values: Vec<f64>,
    pub extreme_values: Vec<f64>,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        AnalysisSection {
            sweep_values: DEFAULT_SWEEP.to_vec(),
            small_values: vec![-2.0, 0.0, 2.0],
            extreme_values: vec![-10.0, 10.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub corpus: CorpusSection,
    pub knowledge: KnowledgeConfig,
    pub generator: GeneratorConfig,
    pub trainer: TrainerSection,
    pub metrics: MetricsSection,
    pub analysis: AnalysisSection,
}

impl RunConfig {
    /// A configuration that trains on one CPU core in about a minute:
    /// a small decoder with correspondingly larger learning rates.
    pub fn desk() -> RunConfig {
        RunConfig {
            seed: None,
            generator: GeneratorConfig {
                d_model: 32,
                n_layers: 2,
                n_heads: 2,
                max_len: 192,
                vocab_size: 0,
            },
            trainer: TrainerSection {
                epochs: 40,
                lr_generator: 3e-3,
                lr_side: 1e-2,
                ..TrainerSection::default()
            },
            ..RunConfig::default()
        }
    }

    pub fn parse(text: &str) -> Result<RunConfig> {
        let c: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            e => e,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.corpus.split.validate()?;
        self.corpus.synth_spec(0).validate()?;
        self.metrics.weights().validate()?;
        if self.analysis.sweep_values.is_empty() || self.analysis.small_values.is_empty() || self.analysis.extreme_values.is_empty() {
            return Err(Error::Config("analysis value lists must be nonempty".into()));
        }
        if self.corpus.source == CorpusSource::Csedm && self.corpus.csedm_path.is_none() {
            return Err(Error::Config("source = \"csedm\" needs csedm_path".into()));
        }
        self.train_config(0)?.validate()
    }

    pub fn require_seed(&self) -> Result<u64> {
        self.seed
            .ok_or_else(|| Error::Config("a seed is required; set `seed` or pass --seed".into()))
    }

    pub fn train_config(&self, seed: u64) -> Result<TrainConfig> {
        let t = &self.trainer;
        Ok(TrainConfig {
            objective: t.objective,
            epochs: t.epochs,
            batch_size: t.batch_size,
            lr_generator: t.lr_generator,
            lr_side: t.lr_side,
            weight_decay: t.weight_decay,
            warmup_fraction: t.warmup_fraction,
            clip_norm: t.clip_norm,
            tau_start: t.tau_start,
            tau_end: t.tau_end,
            lambda: t.lambda,
            q_target_gradient: t.q_target_gradient,
            seed,
            knowledge: self.knowledge,
            generator: self.generator,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(RunConfig::parse("").unwrap(), RunConfig::default());
    }

    #[test]
    fn partial_sections_fill_in() {
        let c = RunConfig::parse("seed = 7\n[knowledge]\nd_bar = 4\n[trainer]\nlambda = 1.0\n").unwrap();
        assert_eq!(c.seed, Some(7));
        assert_eq!(c.knowledge.d_bar, 4);
        assert_eq!(c.knowledge.d_disc, 10);
        assert_eq!(c.trainer.lambda, 1.0);
        assert_eq!(c.trainer.epochs, 50);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(RunConfig::parse("[trainer]\nlamda = 1.0\n"), Err(Error::Config(_))));
        assert!(matches!(RunConfig::parse("[extra]\n"), Err(Error::Config(_))));
        assert!(matches!(RunConfig::parse("[corpus.split]\ntrain = 0.5\nvalidation = 0.5\ntest = 0.5\n"), Err(Error::Config(_))));
    }

    #[test]
    fn round_trips_through_toml() {
        let mut c = RunConfig::desk();
        c.seed = Some(3);
        assert_eq!(RunConfig::parse(&c.to_toml().unwrap()).unwrap(), c);
    }

    #[test]
    fn oirt_with_factors_is_rejected() {
        let text = "[trainer]\nobjective = \"oirt\"\n";
        assert!(RunConfig::parse(text).is_err());
        let text = "[trainer]\nobjective = \"oirt\"\n[knowledge]\nd_bar = 23\nd_cont = 0\nd_disc = 0\n";
        assert!(RunConfig::parse(text).is_ok());
    }
}
