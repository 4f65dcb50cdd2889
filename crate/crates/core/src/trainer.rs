//! Joint optimization of decoder, alignment, knowledge states and Q, plus
//! evaluation.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::checkpoint::Checkpoint;
use crate::corpus::{Corpus, CorpusSplit, SplitPart, Submission};
use crate::error::{Error, Result};
use crate::generator::{stream, GeneratorConfig, Model, ModelGrads, QPrediction};
use crate::knowledge::{
    assemble, sample_backward, sample_with_noise, split_h_grad, KnowledgeConfig, KnowledgeStore,
    LatentNoise, LatentSample, SampleMode,
};
use crate::metrics::{self, CodeBleuWeights};
use crate::nn::{sq_norm, Adam, Params, TensorRef};
use crate::objective::{info_nll_grad, oirt_loss_grad, total_loss, LossBreakdown};
use crate::tokenizer::{canonicalize, TokenId, Vocabulary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectiveKind {
    /// `h = h̄`, token NLL only.
    Oirt,
    /// Sampled factors, Q head and the λ-weighted information term.
    InfoOirt,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
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
    /// Let the information term's gradient reach the student parameters
    /// through the sampled targets as well as through the generator.
    pub q_target_gradient: bool,
    pub seed: u64,
    pub knowledge: KnowledgeConfig,
    pub generator: GeneratorConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            objective: ObjectiveKind::InfoOirt,
            epochs: 50,
            batch_size: 8,
            lr_generator: 1e-5,
            lr_side: 1e-3,
            weight_decay: 0.01,
            warmup_fraction: 0.1,
            clip_norm: 1.0,
            tau_start: 1.0,
            tau_end: 0.5,
            lambda: 0.1,
            q_target_gradient: true,
            seed: 0,
            knowledge: KnowledgeConfig::default(),
            generator: GeneratorConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("epochs", self.epochs as f64),
            ("batch_size", self.batch_size as f64),
            ("lr_generator", self.lr_generator),
            ("lr_side", self.lr_side),
            ("clip_norm", self.clip_norm),
            ("tau_start", self.tau_start),
            ("tau_end", self.tau_end),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::Config(format!("lambda must be nonnegative, got {}", self.lambda)));
        }
        if !(0.0..1.0).contains(&self.warmup_fraction) || self.weight_decay < 0.0 {
            return Err(Error::Config("warmup_fraction must lie in [0, 1) and weight_decay be nonnegative".into()));
        }
        if self.objective == ObjectiveKind::Oirt && self.knowledge.has_factors() {
            return Err(Error::Config("the OIRT objective takes no interpretable factors".into()));
        }
        self.knowledge.validate()
    }

    /// Generator learning-rate multiplier: linear warmup, then linear decay.
    pub fn lr_factor(&self, step: usize, total: usize) -> f64 {
        let warm = ((total as f64 * self.warmup_fraction).ceil() as usize).min(total);
        if step < warm {
            (step + 1) as f64 / warm as f64
        } else {
            (total - step) as f64 / (total - warm).max(1) as f64
        }
    }

    pub fn tau(&self, step: usize, total: usize) -> f64 {
        if total <= 1 {
            return self.tau_start;
        }
        self.tau_start + (self.tau_end - self.tau_start) * step as f64 / (total - 1) as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub submission: usize,
    pub student: usize,
    pub problem: Vec<TokenId>,
    pub code: Vec<TokenId>,
    /// `code` followed by EOS.
    pub targets: Vec<TokenId>,
}

/// A corpus encoded against a vocabulary and a knowledge store's students.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub corpus: Corpus,
    pub vocab: Vocabulary,
    pub students: Vec<String>,
    pub examples: Vec<Example>,
}

impl Dataset {
    /// Vocabulary from all problem statements plus the training code.
    pub fn build_vocab(corpus: &Corpus, split: &CorpusSplit) -> Result<Vocabulary> {
        let mut texts: Vec<&str> = corpus.problems.iter().map(|p| p.statement.as_str()).collect();
        texts.extend(split.train.iter().map(|&i| corpus.submissions[i].code.as_str()));
        Vocabulary::build(&texts)
    }

    pub fn new(corpus: &Corpus, vocab: Vocabulary) -> Result<Dataset> {
        let students = corpus.student_ids();
        let index: BTreeMap<&str, usize> = students.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
        let problems: BTreeMap<&str, Vec<TokenId>> = corpus
            .problems
            .iter()
            .map(|p| (p.problem_id.as_str(), vocab.encode(&p.statement)))
            .collect();
        let mut examples = Vec::with_capacity(corpus.submissions.len());
        for (i, s) in corpus.submissions.iter().enumerate() {
            let problem = problems
                .get(s.problem_id.as_str())
                .ok_or_else(|| Error::UnknownProblem(s.problem_id.clone()))?
                .clone();
            let code = vocab.encode(&s.code);
            let mut targets = code.clone();
            targets.push(vocab.eos());
            examples.push(Example {
                submission: i,
                student: index[s.student_id.as_str()],
                problem,
                code,
                targets,
            });
        }
        Ok(Dataset {
            corpus: corpus.clone(),
            vocab,
            students,
            examples,
        })
    }

    pub fn max_sequence(&self) -> usize {
        self.examples.iter().map(|e| e.problem.len() + e.code.len() + 2).max().unwrap_or(0)
    }

    pub fn submission(&self, e: &Example) -> &Submission {
        &self.corpus.submissions[e.submission]
    }
}

/// What one gradient evaluation needs besides the parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSettings {
    pub objective: ObjectiveKind,
    pub lambda: f64,
    pub q_target_gradient: bool,
    pub mode: SampleMode,
    pub tau: f64,
}

fn scale_q(q: &QPrediction, a: f64) -> QPrediction {
    QPrediction {
        cont_mean: q.cont_mean.iter().map(|x| a * x).collect(),
        cont_log_sigma: q.cont_log_sigma.iter().map(|x| a * x).collect(),
        disc_logits: q.disc_logits.iter().map(|v| v.iter().map(|x| a * x).collect()).collect(),
    }
}

/// Loss of one example; with `grads` given, accumulates the gradient of
/// `oirt + λ·q_nll` into them.
pub fn example_loss(
    model: &Model,
    store: &KnowledgeStore,
    ex: &Example,
    settings: &StepSettings,
    noise: Option<LatentNoise>,
    grads: Option<(&mut ModelGrads, &mut KnowledgeStore)>,
) -> Result<LossBreakdown> {
    let kc = store.config;
    let state = store.state(ex.student);
    let sample: Option<LatentSample> = match settings.objective {
        ObjectiveKind::Oirt => None,
        ObjectiveKind::InfoOirt => Some(sample_with_noise(&state, settings.mode, settings.tau, noise)?),
    };
    let h = match &sample {
        Some(x) => assemble(&kc, state.h_bar(), x)?.h,
        None => state.h_bar().to_vec(),
    };
    let (out, cache) = model.forward(&ex.problem, &h, &ex.code)?;
    let ((oirt, count), dlogits) = oirt_loss_grad(&out.logits, &ex.targets, grads.is_some())?;

    let mut q_nll = 0.0;
    let mut info = None;
    if let Some(x) = sample.as_ref().filter(|_| kc.has_factors()) {
        let (pred, qcache) = model.q.forward(&out.r_c)?;
        let (v, g) = info_nll_grad(&pred, x)?;
        q_nll = v;
        info = Some((qcache, g));
    }
    let lambda = match settings.objective {
        ObjectiveKind::Oirt => 0.0,
        ObjectiveKind::InfoOirt => settings.lambda,
    };
    let total = total_loss(oirt, q_nll, lambda)?;
    let breakdown = LossBreakdown {
        oirt,
        q_nll,
        total,
        lambda,
        token_count: count,
    };

    if let Some((mg, kg)) = grads {
        let mut dr_c = vec![0.0; model.config.d_model];
        let mut d_cont = vec![0.0; kc.d_cont];
        let mut d_disc = vec![vec![0.0; kc.k]; kc.d_disc];
        if let Some((qcache, g)) = info.filter(|_| lambda > 0.0) {
            dr_c = model.q.backward(&qcache, &scale_q(&g.dq, lambda), &mut mg.q);
            if settings.q_target_gradient {
                d_cont = g.d_cont.iter().map(|x| lambda * x).collect();
                d_disc = g.d_disc.iter().map(|v| v.iter().map(|x| lambda * x).collect()).collect();
            }
        }
        let dh = model.backward(&cache, &dlogits.expect("requested"), &dr_c, mg);
        let row = kg.row_mut(ex.student);
        let (dbar, dc, dd) = split_h_grad(&kc, &dh);
        for (r, g) in row.iter_mut().zip(&dbar) {
            *r += g;
        }
        if let Some(x) = &sample {
            for (a, b) in d_cont.iter_mut().zip(&dc) {
                *a += b;
            }
            for (a, b) in d_disc.iter_mut().flatten().zip(dd.iter().flatten()) {
                *a += b;
            }
            sample_backward(&state, x, &d_cont, &d_disc, row);
        }
    }
    Ok(breakdown)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Per-token mean.
    pub train_oirt: f64,
    /// Per-example mean.
    pub train_q_nll: f64,
    pub val_oirt: f64,
    pub factor_entropies: Vec<f64>,
    pub tau: f64,
    pub lr_generator: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainLog {
    pub epochs: Vec<EpochRecord>,
    /// Summed batch objective at every optimizer step.
    #[serde(default)]
    pub step_losses: Vec<f64>,
}

impl TrainLog {
    pub fn q_nll_series(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.train_q_nll).collect()
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        crate::corpus::write_jsonl(path, &self.epochs)
    }

    pub fn read_jsonl(path: &Path) -> Result<TrainLog> {
        Ok(TrainLog {
            epochs: crate::corpus::read_jsonl(path)?,
            step_losses: Vec::new(),
        })
    }
}

pub struct TrainOutcome {
    pub best: Checkpoint,
    pub last: Checkpoint,
    pub log: TrainLog,
}

/// Mean per-token NLL of `examples` with deterministic latents.
pub fn mean_token_loss(model: &Model, store: &KnowledgeStore, objective: ObjectiveKind, examples: &[&Example]) -> Result<f64> {
    let settings = StepSettings {
        objective,
        lambda: 0.0,
        q_target_gradient: false,
        mode: SampleMode::Deterministic,
        tau: 1.0,
    };
    let mut sum = 0.0;
    let mut n = 0;
    for ex in examples {
        let b = example_loss(model, store, ex, &settings, None, None)?;
        sum += b.oirt;
        n += b.token_count;
    }
    Ok(if n == 0 { 0.0 } else { sum / n as f64 })
}

pub fn train(config: &TrainConfig, data: &Dataset, split: &CorpusSplit) -> Result<TrainOutcome> {
    train_with(config, data, split, &mut |_| {})
}

/// Like [`train`], reporting each finished epoch to `on_epoch`.
pub fn train_with(
    config: &TrainConfig,
    data: &Dataset,
    split: &CorpusSplit,
    on_epoch: &mut dyn FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    config.validate()?;
    let mut gcfg = config.generator;
    if gcfg.vocab_size == 0 {
        gcfg.vocab_size = data.vocab.len();
    }
    if gcfg.vocab_size != data.vocab.len() {
        return Err(Error::Config(format!(
            "generator vocab_size {} differs from vocabulary size {}",
            gcfg.vocab_size,
            data.vocab.len()
        )));
    }
    let longest = data.max_sequence();
    if longest > gcfg.max_len {
        return Err(Error::Overlength {
            len: longest,
            max_len: gcfg.max_len,
        });
    }
    let train_ex: Vec<&Example> = split.train.iter().map(|&i| &data.examples[i]).collect();
    let val_ex: Vec<&Example> = split.validation.iter().map(|&i| &data.examples[i]).collect();
    if train_ex.is_empty() {
        return Err(Error::Config("training split is empty".into()));
    }
    let mut resolved = config.clone();
    resolved.generator = gcfg;

    let mut model = Model::new(gcfg, config.knowledge, config.seed)?;
    let mut store = KnowledgeStore::new(config.knowledge, &data.students, &mut stream(config.seed, 4))?;
    let mut order_rng = stream(config.seed, 5);
    let mut latent_rng = stream(config.seed, 6);
    let mut gen_opt = Adam::new(config.weight_decay);
    let mut side_opt = Adam::new(0.0);
    let mut know_opt = Adam::new(0.0);
    let mut mg = model.zeros_like();
    let mut kg = store.zeros_like();

    let steps_per_epoch = train_ex.len().div_ceil(config.batch_size);
    let total_steps = steps_per_epoch * config.epochs;
    let mut log = TrainLog::default();
    let mut best: Option<(f64, Checkpoint)> = None;
    let mut order: Vec<usize> = (0..train_ex.len()).collect();
    let mut step = 0;

    for epoch in 0..config.epochs {
        order.shuffle(&mut order_rng);
        let mut sums = LossBreakdown::default();
        let mut tau = config.tau_start;
        let mut lr = 0.0;
        for (b, batch) in order.chunks(config.batch_size).enumerate() {
            tau = config.tau(step, total_steps);
            lr = config.lr_generator * config.lr_factor(step, total_steps);
            let settings = StepSettings {
                objective: config.objective,
                lambda: config.lambda,
                q_target_gradient: config.q_target_gradient,
                mode: SampleMode::Stochastic,
                tau,
            };
            mg.zero();
            kg.zero();
            let mut step_total = 0.0;
            for &i in batch {
                let noise = match config.objective {
                    ObjectiveKind::Oirt => None,
                    ObjectiveKind::InfoOirt => Some(LatentNoise::draw(&config.knowledge, &mut latent_rng)),
                };
                let l = example_loss(&model, &store, train_ex[i], &settings, noise, Some((&mut mg, &mut kg)))?;
                step_total += l.total;
                sums.add(&l);
            }
            if !step_total.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    step: b,
                    detail: format!("batch objective is {step_total}"),
                });
            }
            log.step_losses.push(step_total);

            let norm = (sq_norm(&mg.tensors()) + sq_norm(&kg.tensors())).sqrt();
            if !norm.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    step: b,
                    detail: "gradient norm is not finite".into(),
                });
            }
            if norm > config.clip_norm {
                let c = config.clip_norm / norm;
                for t in mg.tensors_mut().into_iter().chain(kg.tensors_mut()) {
                    t.iter_mut().for_each(|x| *x *= c);
                }
            }
            gen_opt.step(model.decoder.tensors_mut(), &mg.decoder.tensors(), lr);
            side_opt.step(model.side_tensors_mut(), &mg.side_tensors(), config.lr_side);
            know_opt.step(store.tensors_mut(), &kg.tensors(), config.lr_side);
            step += 1;
        }
        let val_oirt = if val_ex.is_empty() {
            mean_token_loss(&model, &store, config.objective, &train_ex)?
        } else {
            mean_token_loss(&model, &store, config.objective, &val_ex)?
        };
        if !val_oirt.is_finite() {
            return Err(Error::Divergence {
                epoch,
                step: steps_per_epoch,
                detail: format!("validation loss is {val_oirt}"),
            });
        }
        let record = EpochRecord {
            epoch,
            train_oirt: sums.oirt / sums.token_count.max(1) as f64,
            train_q_nll: sums.q_nll / train_ex.len() as f64,
            val_oirt,
            factor_entropies: store.factor_entropies(),
            tau,
            lr_generator: lr,
        };
        on_epoch(&record);
        log.epochs.push(record);
        if best.as_ref().is_none_or(|(v, _)| val_oirt < *v) {
            let ck = Checkpoint::new(&resolved, &model, &store, &data.vocab, epoch, val_oirt);
            best = Some((val_oirt, ck));
        }
    }
    let last_val = log.epochs.last().map_or(f64::NAN, |e| e.val_oirt);
    let last = Checkpoint::new(&resolved, &model, &store, &data.vocab, config.epochs - 1, last_val);
    Ok(TrainOutcome {
        best: best.expect("at least one epoch").1,
        last,
        log,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedCode {
    pub student_id: String,
    pub problem_id: String,
    pub code: String,
    pub truncated: bool,
    pub codebleu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub split: String,
    pub pairs: usize,
    pub test_loss: f64,
    pub codebleu: f64,
    pub ngram: f64,
    pub weighted_ngram: f64,
    pub ast_match: f64,
    pub dataflow_match: f64,
    pub dist_1: f64,
    pub dist_2: f64,
    pub dist_3: f64,
    pub parse_rate: f64,
    pub d_bar: usize,
    pub d_cont: usize,
    pub d_disc: usize,
    pub generations: Vec<GeneratedCode>,
}

impl EvalReport {
    pub fn table_header() -> String {
        "| Model | |h̄| | |ĥ_cont| | |ĥ_disc| | CodeBLEU | Test Loss | Dist-1 | Dist-2 | Dist-3 |\n\
         |---|---|---|---|---|---|---|---|---|"
            .to_string()
    }

    pub fn table_row(&self, name: &str) -> String {
        format!(
            "| {name} | {} | {} | {} | {:.3} | {:.3} | {:.3} | {:.3} | {:.3} |",
            self.d_bar, self.d_cont, self.d_disc, self.codebleu, self.test_loss, self.dist_1, self.dist_2, self.dist_3
        )
    }

    pub fn table(&self, name: &str) -> String {
        let mut s = Self::table_header();
        let _ = write!(s, "\n{}", self.table_row(name));
        s
    }
}

/// Generate greedily for one (student, problem) pair with an explicit
/// latent sample (deterministic when `None`).
pub fn generate_for(
    ck: &Checkpoint,
    student: &str,
    problem: &[TokenId],
    sample: Option<&LatentSample>,
) -> Result<crate::generator::Generation> {
    let state = ck.store.state_of(student)?;
    let h = match ck.config.objective {
        ObjectiveKind::Oirt => state.h_bar().to_vec(),
        ObjectiveKind::InfoOirt => {
            let det;
            let x = match sample {
                Some(x) => x,
                None => {
                    det = sample_with_noise(&state, SampleMode::Deterministic, 1.0, None)?;
                    &det
                }
            };
            assemble(&ck.store.config, state.h_bar(), x)?.h
        }
    };
    let room = ck.model.config.max_len.saturating_sub(problem.len() + 2);
    ck.model.generate(problem, &h, room)
}

/// Evaluate on the submissions at `indices`; `data` must be encoded with the
/// checkpoint's vocabulary.
pub fn evaluate(ck: &Checkpoint, data: &Dataset, part: SplitPart, indices: &[usize], weights: CodeBleuWeights) -> Result<EvalReport> {
    if indices.is_empty() {
        return Err(Error::InvalidArgument(format!("split {part} is empty")));
    }
    let examples: Vec<&Example> = indices.iter().map(|&i| &data.examples[i]).collect();
    // remap example students onto the checkpoint's store
    let mut remapped = Vec::with_capacity(examples.len());
    for ex in &examples {
        let sid = &data.corpus.submissions[ex.submission].student_id;
        let mut e = (*ex).clone();
        e.student = ck.store.index_of(sid)?;
        remapped.push(e);
    }
    let refs: Vec<&Example> = remapped.iter().collect();
    let test_loss = mean_token_loss(&ck.model, &ck.store, ck.config.objective, &refs)?;

    let mut candidates = Vec::with_capacity(refs.len());
    let mut references = Vec::with_capacity(refs.len());
    let mut generations = Vec::with_capacity(refs.len());
    for ex in &refs {
        let sub = &data.corpus.submissions[ex.submission];
        let g = generate_for(ck, &sub.student_id, &ex.problem, None)?;
        let code = ck.vocab.decode(&g.ids)?;
        let reference = canonicalize(&sub.code);
        let cb = metrics::codebleu(&code, &reference, weights)?;
        generations.push(GeneratedCode {
            student_id: sub.student_id.clone(),
            problem_id: sub.problem_id.clone(),
            code: code.clone(),
            truncated: g.truncated,
            codebleu: cb.total,
        });
        candidates.push(code);
        references.push(reference);
    }
    let agg = metrics::aggregate(&candidates, &references, weights)?;
    let kc = ck.store.config;
    Ok(EvalReport {
        split: part.to_string(),
        pairs: refs.len(),
        test_loss,
        codebleu: agg.codebleu,
        ngram: agg.ngram,
        weighted_ngram: agg.weighted_ngram,
        ast_match: agg.ast_match,
        dataflow_match: agg.dataflow_match,
        dist_1: agg.dist[0],
        dist_2: agg.dist[1],
        dist_3: agg.dist[2],
        parse_rate: agg.parse_rate,
        d_bar: kc.d_bar,
        d_cont: kc.d_cont,
        d_disc: kc.d_disc,
        generations,
    })
}

/// All parameters as one vector, model first, for finite-difference checks.
pub fn flat_params(model: &Model, store: &KnowledgeStore) -> Vec<f64> {
    model
        .tensors()
        .iter()
        .chain(store.tensors().iter())
        .flat_map(|t: &TensorRef<'_>| t.data.iter().copied())
        .collect()
}

pub fn set_flat_params(model: &mut Model, store: &mut KnowledgeStore, flat: &[f64]) {
    let mut at = 0;
    for t in model.tensors_mut().into_iter().chain(store.tensors_mut()) {
        t.copy_from_slice(&flat[at..at + t.len()]);
        at += t.len();
    }
}

/// Per-tensor name and offset into the flat vector.
pub fn flat_layout(model: &Model, store: &KnowledgeStore) -> Vec<(String, usize, usize)> {
    let mut at = 0;
    let mut out = Vec::new();
    for t in model.tensors().iter().chain(store.tensors().iter()) {
        out.push((t.name.clone(), at, t.data.len()));
        at += t.data.len();
    }
    out
}
