//! Per-student knowledge parameters and the interpretable latent factors.
//!
//! A student's state is `h = (h̄, ĥ_cont, ĥ_disc)`: a free vector, Gaussian
//! factors `N(μ, σ)` and k-class categorical factors, each with learned
//! per-student parameters.

use std::collections::BTreeMap;

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Gumbel, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{softmax_in_place, t2, Params, TensorRef};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KnowledgeConfig {
    pub d_bar: usize,
    pub d_cont: usize,
    pub d_disc: usize,
    pub k: usize,
}

impl Default for KnowledgeConfig {
    fn default() -> Self {
        KnowledgeConfig {
            d_bar: 2,
            d_cont: 1,
            d_disc: 10,
            k: 2,
        }
    }
}

impl KnowledgeConfig {
    /// Plain OIRT: only the free vector.
    pub fn oirt(d_bar: usize) -> KnowledgeConfig {
        KnowledgeConfig {
            d_bar,
            d_cont: 0,
            d_disc: 0,
            k: 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d_bar + self.d_cont + self.d_disc == 0 {
            return Err(Error::Config("knowledge state must have at least one dimension".into()));
        }
        if self.k < 2 {
            return Err(Error::Config("discrete factors need k >= 2".into()));
        }
        Ok(())
    }

    pub fn h_dim(&self) -> usize {
        self.d_bar + self.d_cont + self.d_disc * self.k
    }

    /// Parameters per student: h̄, μ, log σ, logits.
    pub fn n_params(&self) -> usize {
        self.d_bar + 2 * self.d_cont + self.d_disc * self.k
    }

    pub fn has_factors(&self) -> bool {
        self.d_cont + self.d_disc > 0
    }

    fn mu_at(&self, i: usize) -> usize {
        self.d_bar + i
    }

    fn log_sigma_at(&self, i: usize) -> usize {
        self.d_bar + self.d_cont + i
    }

    fn logits_at(&self, i: usize) -> usize {
        self.d_bar + 2 * self.d_cont + i * self.k
    }
}

/// Standard deviation of the initial h̄ and μ entries.
pub const INIT_STD: f64 = 0.1;

/// One student's learnable parameters, laid out `[h̄ | μ | log σ | logits]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StudentKnowledgeState {
    pub config: KnowledgeConfig,
    pub params: Vec<f64>,
}

impl StudentKnowledgeState {
    pub fn h_bar(&self) -> &[f64] {
        &self.params[..self.config.d_bar]
    }

    pub fn mu(&self, i: usize) -> f64 {
        self.params[self.config.mu_at(i)]
    }

    pub fn log_sigma(&self, i: usize) -> f64 {
        self.params[self.config.log_sigma_at(i)]
    }

    pub fn sigma(&self, i: usize) -> f64 {
        self.log_sigma(i).exp()
    }

    pub fn logits(&self, i: usize) -> &[f64] {
        let a = self.config.logits_at(i);
        &self.params[a..a + self.config.k]
    }

    pub fn probs(&self, i: usize) -> Vec<f64> {
        let mut p = self.logits(i).to_vec();
        softmax_in_place(&mut p);
        p
    }

    /// Argmax class of factor `i`, ties to the lowest index.
    pub fn learned_class(&self, i: usize) -> usize {
        argmax(self.logits(i))
    }

    pub fn entropy(&self, i: usize) -> f64 {
        self.probs(i)
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|p| -p * p.ln())
            .sum()
    }
}

pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

pub fn init_state(config: &KnowledgeConfig, rng: &mut impl Rng) -> Result<StudentKnowledgeState> {
    config.validate()?;
    let normal = Normal::new(0.0, INIT_STD).expect("finite std");
    let mut params = vec![0.0; config.n_params()];
    for p in &mut params[..config.d_bar + config.d_cont] {
        *p = normal.sample(rng);
    }
    Ok(StudentKnowledgeState {
        config: *config,
        params,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleMode {
    /// Reparameterized Gaussians; straight-through hard one-hots.
    Stochastic,
    /// Reparameterized Gaussians; the relaxed simplex vectors themselves.
    Relaxed,
    /// `μ` and argmax one-hots, no gradient.
    Deterministic,
}

/// Noise behind a stochastic sample, kept so a draw can be replayed.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentNoise {
    pub eps: Vec<f64>,
    pub gumbel: Vec<Vec<f64>>,
}

impl LatentNoise {
    pub fn draw(config: &KnowledgeConfig, rng: &mut impl Rng) -> LatentNoise {
        let eps = (0..config.d_cont).map(|_| StandardNormal.sample(rng)).collect();
        let g = Gumbel::new(0.0, 1.0).expect("valid gumbel");
        let gumbel = (0..config.d_disc)
            .map(|_| (0..config.k).map(|_| g.sample(rng)).collect())
            .collect();
        LatentNoise { eps, gumbel }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatentSample {
    pub cont_values: Vec<f64>,
    /// Vectors placed in `h` and used as Q's targets.
    pub disc_values: Vec<Vec<f64>>,
    /// `softmax((logits + g) / τ)`; equal to `disc_values` in relaxed mode.
    pub disc_relaxed: Vec<Vec<f64>>,
    pub differentiable: bool,
    pub mode: SampleMode,
    pub temperature: f64,
    pub noise: Option<LatentNoise>,
}

pub fn sample_latent(
    state: &StudentKnowledgeState,
    mode: SampleMode,
    temperature: f64,
    rng: &mut impl Rng,
) -> Result<LatentSample> {
    let noise = match mode {
        SampleMode::Deterministic => None,
        _ => Some(LatentNoise::draw(&state.config, rng)),
    };
    sample_with_noise(state, mode, temperature, noise)
}

pub fn sample_with_noise(
    state: &StudentKnowledgeState,
    mode: SampleMode,
    temperature: f64,
    noise: Option<LatentNoise>,
) -> Result<LatentSample> {
    if !(temperature > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "temperature must be positive, got {temperature}"
        )));
    }
    let c = state.config;
    let one_hot = |j: usize| {
        let mut v = vec![0.0; c.k];
        v[j] = 1.0;
        v
    };
    let Some(noise) = noise.filter(|_| mode != SampleMode::Deterministic) else {
        let disc: Vec<Vec<f64>> = (0..c.d_disc).map(|i| one_hot(state.learned_class(i))).collect();
        return Ok(LatentSample {
            cont_values: (0..c.d_cont).map(|i| state.mu(i)).collect(),
            disc_values: disc.clone(),
            disc_relaxed: disc,
            differentiable: false,
            mode: SampleMode::Deterministic,
            temperature,
            noise: None,
        });
    };
    if noise.eps.len() != c.d_cont || noise.gumbel.len() != c.d_disc {
        return Err(Error::Shape("noise does not match knowledge config".into()));
    }
    let cont_values = (0..c.d_cont)
        .map(|i| state.mu(i) + state.sigma(i) * noise.eps[i])
        .collect();
    let disc_relaxed: Vec<Vec<f64>> = (0..c.d_disc)
        .map(|i| {
            let mut y: Vec<f64> = state
                .logits(i)
                .iter()
                .zip(&noise.gumbel[i])
                .map(|(l, g)| (l + g) / temperature)
                .collect();
            softmax_in_place(&mut y);
            y
        })
        .collect();
    let disc_values = match mode {
        SampleMode::Relaxed => disc_relaxed.clone(),
        _ => disc_relaxed.iter().map(|y| one_hot(argmax(y))).collect(),
    };
    Ok(LatentSample {
        cont_values,
        disc_values,
        disc_relaxed,
        differentiable: true,
        mode,
        temperature,
        noise: Some(noise),
    })
}

/// Gradient of a loss with respect to the sample, pushed back to the
/// student's parameters (straight-through for hard one-hots). Accumulates
/// into `grad`, laid out like the state's parameters.
pub fn sample_backward(
    state: &StudentKnowledgeState,
    sample: &LatentSample,
    d_cont: &[f64],
    d_disc: &[Vec<f64>],
    grad: &mut [f64],
) {
    let Some(noise) = &sample.noise else {
        return;
    };
    let c = state.config;
    for i in 0..c.d_cont {
        grad[c.mu_at(i)] += d_cont[i];
        grad[c.log_sigma_at(i)] += d_cont[i] * state.sigma(i) * noise.eps[i];
    }
    for i in 0..c.d_disc {
        let y = &sample.disc_relaxed[i];
        let dy = &d_disc[i];
        let inner: f64 = y.iter().zip(dy).map(|(a, b)| a * b).sum();
        let at = c.logits_at(i);
        for j in 0..c.k {
            grad[at + j] += y[j] * (dy[j] - inner) / sample.temperature;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssembledState {
    pub h: Vec<f64>,
}

pub fn assemble(config: &KnowledgeConfig, h_bar: &[f64], sample: &LatentSample) -> Result<AssembledState> {
    if h_bar.len() != config.d_bar
        || sample.cont_values.len() != config.d_cont
        || sample.disc_values.len() != config.d_disc
        || sample.disc_values.iter().any(|v| v.len() != config.k)
    {
        return Err(Error::Shape(format!(
            "sample does not match knowledge config {config:?}"
        )));
    }
    let mut h = Vec::with_capacity(config.h_dim());
    h.extend_from_slice(h_bar);
    h.extend_from_slice(&sample.cont_values);
    for v in &sample.disc_values {
        h.extend_from_slice(v);
    }
    Ok(AssembledState { h })
}

/// Split `dL/dh` into the h̄, continuous and discrete parts.
pub fn split_h_grad(config: &KnowledgeConfig, dh: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<Vec<f64>>) {
    let (bar, rest) = dh.split_at(config.d_bar);
    let (cont, disc) = rest.split_at(config.d_cont);
    (
        bar.to_vec(),
        cont.to_vec(),
        disc.chunks(config.k).map(<[f64]>::to_vec).collect(),
    )
}

/// All students' parameters as one `n_students × n_params` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeStore {
    pub config: KnowledgeConfig,
    students: Vec<String>,
    index: BTreeMap<String, usize>,
    pub params: Array2<f64>,
}

impl KnowledgeStore {
    /// Students are stored in sorted id order; each is initialized in turn
    /// from `rng`.
    pub fn new(config: KnowledgeConfig, students: &[String], rng: &mut impl Rng) -> Result<KnowledgeStore> {
        config.validate()?;
        let mut ids = students.to_vec();
        ids.sort();
        ids.dedup();
        let mut params = Array2::zeros((ids.len(), config.n_params()));
        for (i, _) in ids.iter().enumerate() {
            let s = init_state(&config, rng)?;
            params.row_mut(i).assign(&ndarray::ArrayView1::from(&s.params));
        }
        Self::from_parts(config, ids, params)
    }

    pub fn from_parts(config: KnowledgeConfig, students: Vec<String>, params: Array2<f64>) -> Result<KnowledgeStore> {
        if params.dim() != (students.len(), config.n_params()) {
            return Err(Error::Shape(format!(
                "knowledge parameters {:?} do not match {} students × {}",
                params.dim(),
                students.len(),
                config.n_params()
            )));
        }
        let index = students.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        Ok(KnowledgeStore {
            config,
            students,
            index,
            params,
        })
    }

    pub fn zeros_like(&self) -> KnowledgeStore {
        KnowledgeStore {
            config: self.config,
            students: self.students.clone(),
            index: self.index.clone(),
            params: Array2::zeros(self.params.raw_dim()),
        }
    }

    pub fn students(&self) -> &[String] {
        &self.students
    }

    pub fn index_of(&self, student: &str) -> Result<usize> {
        self.index
            .get(student)
            .copied()
            .ok_or_else(|| Error::UnknownStudent(student.to_string()))
    }

    pub fn state(&self, i: usize) -> StudentKnowledgeState {
        StudentKnowledgeState {
            config: self.config,
            params: self.params.row(i).to_vec(),
        }
    }

    pub fn state_of(&self, student: &str) -> Result<StudentKnowledgeState> {
        Ok(self.state(self.index_of(student)?))
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        let n = self.params.ncols();
        &mut self.params.as_slice_mut().expect("standard layout")[i * n..(i + 1) * n]
    }

    /// Mean categorical entropy of each discrete factor across students.
    pub fn factor_entropies(&self) -> Vec<f64> {
        let n = self.students.len().max(1) as f64;
        (0..self.config.d_disc)
            .map(|f| (0..self.students.len()).map(|i| self.state(i).entropy(f)).sum::<f64>() / n)
            .collect()
    }
}

impl Params for KnowledgeStore {
    fn tensors(&self) -> Vec<TensorRef<'_>> {
        vec![t2("knowledge".into(), &self.params)]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![self.params.as_slice_mut().expect("standard layout")]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg() -> KnowledgeConfig {
        KnowledgeConfig {
            d_bar: 2,
            d_cont: 1,
            d_disc: 10,
            k: 2,
        }
    }

    #[test]
    fn init_is_uniform_with_unit_sigma() {
        let s = init_state(&cfg(), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(s.sigma(0), 1.0);
        for i in 0..10 {
            assert_eq!(s.probs(i), vec![0.5, 0.5]);
        }
        let t = init_state(&cfg(), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(s, t);
    }

    #[test]
    fn assembled_sizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for (c, n) in [
            (cfg(), 23),
            (KnowledgeConfig { d_bar: 64, ..cfg() }, 85),
            (KnowledgeConfig::oirt(23), 23),
        ] {
            let s = init_state(&c, &mut rng).unwrap();
            let x = sample_latent(&s, SampleMode::Stochastic, 1.0, &mut rng).unwrap();
            let h = assemble(&c, s.h_bar(), &x).unwrap();
            assert_eq!(h.h.len(), n);
            assert_eq!(c.h_dim(), n);
        }
        let s = init_state(&KnowledgeConfig::oirt(23), &mut rng).unwrap();
        let x = sample_latent(&s, SampleMode::Deterministic, 1.0, &mut rng).unwrap();
        assert_eq!(assemble(&s.config, s.h_bar(), &x).unwrap().h, s.h_bar());
        assert!(assemble(&cfg(), &[0.0], &x).is_err());
    }

    #[test]
    fn deterministic_mode() {
        let mut s = init_state(&cfg(), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let mu_at = s.config.mu_at(0);
        s.params[mu_at] = 0.7;
        let a = s.config.logits_at(0);
        s.params[a] = 0.3;
        s.params[a + 1] = -0.3;
        let x = sample_latent(&s, SampleMode::Deterministic, 1.0, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let y = sample_latent(&s, SampleMode::Deterministic, 1.0, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert_eq!(x, y);
        assert_eq!(x.disc_values[0], vec![1.0, 0.0]);
        assert_eq!(x.cont_values[0], 0.7);
        // zero logits tie to class 0
        assert_eq!(x.disc_values[1], vec![1.0, 0.0]);
    }

    #[test]
    fn relaxed_sample_tends_to_vertex() {
        let s = init_state(&cfg(), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let noise = LatentNoise::draw(&s.config, &mut ChaCha8Rng::seed_from_u64(5));
        let mut prev = f64::INFINITY;
        for tau in [1.0, 0.1, 0.01] {
            let x = sample_with_noise(&s, SampleMode::Relaxed, tau, Some(noise.clone())).unwrap();
            let gap: f64 = x
                .disc_relaxed
                .iter()
                .map(|y| 1.0 - y.iter().copied().fold(0.0, f64::max))
                .fold(0.0, f64::max);
            assert!(gap <= prev);
            prev = gap;
            for y in &x.disc_relaxed {
                assert!((y.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
        assert!(prev < 1e-3, "{prev}");
    }

    #[test]
    fn bad_temperature() {
        let s = init_state(&cfg(), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(sample_latent(&s, SampleMode::Stochastic, 0.0, &mut rng).is_err());
        assert!(sample_latent(&s, SampleMode::Stochastic, -1.0, &mut rng).is_err());
    }

    #[test]
    fn relaxed_backward_matches_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut s = init_state(&cfg(), &mut rng).unwrap();
        for p in s.params.iter_mut() {
            *p += rng.random_range(-1.0..1.0);
        }
        let noise = LatentNoise::draw(&s.config, &mut rng);
        let wc: Vec<f64> = vec![0.8];
        let wd: Vec<Vec<f64>> = (0..10).map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect();
        let loss = |s: &StudentKnowledgeState| {
            let x = sample_with_noise(s, SampleMode::Relaxed, 0.7, Some(noise.clone())).unwrap();
            x.cont_values[0] * wc[0]
                + x.disc_values
                    .iter()
                    .zip(&wd)
                    .map(|(y, w)| y[0] * w[0] + y[1] * w[1])
                    .sum::<f64>()
        };
        let x = sample_with_noise(&s, SampleMode::Relaxed, 0.7, Some(noise.clone())).unwrap();
        let mut g = vec![0.0; s.params.len()];
        sample_backward(&s, &x, &wc, &wd, &mut g);
        for j in 2..s.params.len() {
            let mut p = s.clone();
            p.params[j] += 1e-6;
            let mut m = s.clone();
            m.params[j] -= 1e-6;
            let fd = (loss(&p) - loss(&m)) / 2e-6;
            assert!((fd - g[j]).abs() < 1e-7, "param {j}: {fd} vs {}", g[j]);
        }
    }

    #[test]
    fn unknown_student() {
        let store = KnowledgeStore::new(cfg(), &["a".into(), "b".into()], &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert!(matches!(store.state_of("zz"), Err(Error::UnknownStudent(_))));
        assert_eq!(store.factor_entropies().len(), 10);
    }
}
