//! Knowledge-conditioned decoder.
//!
//! Input layout is `BOS, f(p̄₁, h) … f(p̄ₘ, h), SEP, c₁ … cₙ`; the model is
//! trained to predict `c₁ … cₙ, EOS`. Problem token embeddings pass through
//! the linear alignment `f(p̄, h) = W·[p̄; h] + b`; code tokens do not.

use ndarray::{s, Array1, Array2, ArrayView1, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::knowledge::KnowledgeConfig;
use crate::nn::{
    m2, normal_matrix, t2, Block, BlockCache, LayerNorm, Linear, LnCache, Params, TensorRef,
};
use crate::tokenizer::TokenId;

const BOS: TokenId = 1;
const EOS: TokenId = 2;
const SEP: TokenId = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub d_model: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    pub max_len: usize,
    /// Filled in from the vocabulary when zero.
    pub vocab_size: usize,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            d_model: 256,
            n_layers: 4,
            n_heads: 4,
            max_len: 512,
            vocab_size: 0,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d_model == 0 || self.n_layers == 0 || self.n_heads == 0 {
            return Err(Error::Config("generator dimensions must be positive".into()));
        }
        if self.d_model % self.n_heads != 0 {
            return Err(Error::Config(format!(
                "d_model {} is not divisible by n_heads {}",
                self.d_model, self.n_heads
            )));
        }
        if self.max_len < 3 {
            return Err(Error::Config("max_len must be at least 3".into()));
        }
        if self.vocab_size <= SEP as usize {
            return Err(Error::Config(format!("vocab_size {} is too small", self.vocab_size)));
        }
        Ok(())
    }
}

/// Separate random streams so each component's initialization does not
/// depend on the shape of the others.
pub(crate) fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(id);
    r
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decoder {
    pub tok: Array2<f64>,
    pub pos: Array2<f64>,
    pub blocks: Vec<Block>,
    pub ln_f: LayerNorm,
    pub head: Linear,
}

impl Decoder {
    fn new(c: &GeneratorConfig, rng: &mut impl Rng) -> Decoder {
        let d = c.d_model;
        Decoder {
            tok: normal_matrix(rng, c.vocab_size, d, 0.02),
            pos: normal_matrix(rng, c.max_len, d, 0.01),
            blocks: (0..c.n_layers).map(|_| Block::new(rng, d, c.n_heads, c.n_layers)).collect(),
            ln_f: LayerNorm::new(d),
            head: Linear::new(rng, d, c.vocab_size, 0.02),
        }
    }

    fn zeros(c: &GeneratorConfig) -> Decoder {
        let d = c.d_model;
        Decoder {
            tok: Array2::zeros((c.vocab_size, d)),
            pos: Array2::zeros((c.max_len, d)),
            blocks: (0..c.n_layers).map(|_| Block::zeros(d, c.n_heads)).collect(),
            ln_f: LayerNorm::zeros(d),
            head: Linear::zeros(d, c.vocab_size),
        }
    }
}

impl Params for Decoder {
    fn tensors(&self) -> Vec<TensorRef<'_>> {
        let mut out = vec![t2("tok".into(), &self.tok), t2("pos".into(), &self.pos)];
        for (i, b) in self.blocks.iter().enumerate() {
            b.tensors(&format!("blocks.{i}"), &mut out);
        }
        self.ln_f.tensors("ln_f", &mut out);
        self.head.tensors("head", &mut out);
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = vec![m2(&mut self.tok), m2(&mut self.pos)];
        for b in &mut self.blocks {
            b.tensors_mut(&mut out);
        }
        self.ln_f.tensors_mut(&mut out);
        self.head.tensors_mut(&mut out);
        out
    }
}

/// The linear alignment `f`, weights laid out `[W_p; W_h]` over `[p̄; h]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Alignment {
    pub lin: Linear,
    pub d_model: usize,
}

impl Alignment {
    fn new(d: usize, h_dim: usize, rng: &mut impl Rng) -> Alignment {
        let mut lin = Linear::zeros(d + h_dim, d);
        for i in 0..d {
            lin.w[[i, i]] = 1.0;
        }
        lin.w
            .slice_mut(s![d.., ..])
            .assign(&normal_matrix(rng, h_dim, d, 0.02));
        Alignment { lin, d_model: d }
    }

    pub fn h_dim(&self) -> usize {
        self.lin.w.nrows() - self.d_model
    }

    pub fn align(&self, p: &[f64], h: &[f64]) -> Result<Vec<f64>> {
        if p.len() != self.d_model || h.len() != self.h_dim() {
            return Err(Error::Shape(format!(
                "align expects {} + {} inputs, got {} + {}",
                self.d_model,
                self.h_dim(),
                p.len(),
                h.len()
            )));
        }
        let x: Array1<f64> = p.iter().chain(h).copied().collect();
        Ok((x.dot(&self.lin.w) + &self.lin.b).to_vec())
    }

    fn input(&self, emb: &Array2<f64>, h: &[f64]) -> Array2<f64> {
        let mut x = Array2::zeros((emb.nrows(), self.d_model + h.len()));
        x.slice_mut(s![.., ..self.d_model]).assign(emb);
        let hv = ArrayView1::from(h);
        for mut row in x.slice_mut(s![.., self.d_model..]).rows_mut() {
            row.assign(&hv);
        }
        x
    }
}

impl Params for Alignment {
    fn tensors(&self) -> Vec<TensorRef<'_>> {
        let mut out = Vec::new();
        self.lin.tensors("align", &mut out);
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        self.lin.tensors_mut(&mut out);
        out
    }
}

/// Q: `r(c) → tanh(W₁ r + b₁) → heads`.
#[derive(Debug, Clone, PartialEq)]
pub struct QNet {
    pub hidden: Linear,
    pub out: Linear,
    pub knowledge: KnowledgeConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QPrediction {
    pub cont_mean: Vec<f64>,
    pub cont_log_sigma: Vec<f64>,
    pub disc_logits: Vec<Vec<f64>>,
}

pub struct QCache {
    r: Array2<f64>,
    act: Array2<f64>,
}

impl QNet {
    fn new(d: usize, k: KnowledgeConfig, rng: &mut impl Rng) -> QNet {
        let n_out = 2 * k.d_cont + k.d_disc * k.k;
        QNet {
            hidden: Linear::new(rng, d, d, 1.0 / (d as f64).sqrt()),
            out: Linear::new(rng, d, n_out, 0.02),
            knowledge: k,
        }
    }

    pub fn forward(&self, r_c: &[f64]) -> Result<(QPrediction, QCache)> {
        if r_c.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("non-finite code representation".into()));
        }
        if r_c.len() != self.hidden.w.nrows() {
            return Err(Error::Shape(format!(
                "Q expects {} inputs, got {}",
                self.hidden.w.nrows(),
                r_c.len()
            )));
        }
        let r = Array2::from_shape_vec((1, r_c.len()), r_c.to_vec()).expect("row");
        let act = self.hidden.forward(&r.view()).mapv(f64::tanh);
        let o = self.out.forward(&act.view());
        let o = o.row(0);
        let k = self.knowledge;
        let pred = QPrediction {
            cont_mean: o.slice(s![..k.d_cont]).to_vec(),
            cont_log_sigma: o.slice(s![k.d_cont..2 * k.d_cont]).to_vec(),
            disc_logits: (0..k.d_disc)
                .map(|i| {
                    let a = 2 * k.d_cont + i * k.k;
                    o.slice(s![a..a + k.k]).to_vec()
                })
                .collect(),
        };
        Ok((pred, QCache { r, act }))
    }

    /// `dpred` laid out like the output heads; returns `dL/dr(c)`.
    pub fn backward(&self, c: &QCache, dpred: &QPrediction, g: &mut QNet) -> Vec<f64> {
        let flat: Vec<f64> = dpred
            .cont_mean
            .iter()
            .chain(&dpred.cont_log_sigma)
            .chain(dpred.disc_logits.iter().flatten())
            .copied()
            .collect();
        let dout = Array2::from_shape_vec((1, flat.len()), flat).expect("row");
        let dact = self.out.backward(&c.act.view(), &dout.view(), &mut g.out);
        let dpre = dact * &c.act.mapv(|a| 1.0 - a * a);
        self.hidden.backward(&c.r.view(), &dpre.view(), &mut g.hidden).row(0).to_vec()
    }
}

impl Params for QNet {
    fn tensors(&self) -> Vec<TensorRef<'_>> {
        let mut out = Vec::new();
        self.hidden.tensors("q.hidden", &mut out);
        self.out.tensors("q.out", &mut out);
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        self.hidden.tensors_mut(&mut out);
        self.out.tensors_mut(&mut out);
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorOutput {
    /// One row per predicted position: `c₁ … cₙ, EOS`.
    pub logits: Array2<f64>,
    /// Last-layer states at the code positions (the SEP position when the
    /// code is empty).
    pub last_hidden: Array2<f64>,
    pub r_c: Vec<f64>,
}

pub struct ForwardCache {
    problem: Vec<TokenId>,
    input_ids: Vec<TokenId>,
    align_in: Array2<f64>,
    blocks: Vec<(Array2<f64>, BlockCache)>,
    ln_f: LnCache,
    ln_out: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generation {
    pub ids: Vec<TokenId>,
    /// The length limit was reached before EOS.
    pub truncated: bool,
}

/// Decoder, alignment and Q together. The decoder forms the generator
/// parameter group; alignment and Q form the side group.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: GeneratorConfig,
    pub knowledge: KnowledgeConfig,
    pub decoder: Decoder,
    pub align: Alignment,
    pub q: QNet,
}

/// Gradient buffers, same layout as [`Model`].
pub type ModelGrads = Model;

impl Model {
    pub fn new(config: GeneratorConfig, knowledge: KnowledgeConfig, seed: u64) -> Result<Model> {
        config.validate()?;
        knowledge.validate()?;
        let d = config.d_model;
        Ok(Model {
            decoder: Decoder::new(&config, &mut stream(seed, 1)),
            align: Alignment::new(d, knowledge.h_dim(), &mut stream(seed, 2)),
            q: QNet::new(d, knowledge, &mut stream(seed, 3)),
            config,
            knowledge,
        })
    }

    pub fn zeros_like(&self) -> ModelGrads {
        let d = self.config.d_model;
        let k = self.knowledge;
        Model {
            config: self.config,
            knowledge: k,
            decoder: Decoder::zeros(&self.config),
            align: Alignment {
                lin: Linear::zeros(d + k.h_dim(), d),
                d_model: d,
            },
            q: QNet {
                hidden: Linear::zeros(d, d),
                out: Linear::zeros(d, 2 * k.d_cont + k.d_disc * k.k),
                knowledge: k,
            },
        }
    }

    pub fn side_tensors(&self) -> Vec<TensorRef<'_>> {
        let mut t = self.align.tensors();
        t.extend(self.q.tensors());
        t
    }

    pub fn side_tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut t = self.align.tensors_mut();
        t.extend(self.q.tensors_mut());
        t
    }

    fn check_ids(&self, ids: &[TokenId]) -> Result<()> {
        match ids.iter().find(|&&i| i as usize >= self.config.vocab_size) {
            Some(i) => Err(Error::Shape(format!(
                "token id {i} outside vocabulary of {}",
                self.config.vocab_size
            ))),
            None => Ok(()),
        }
    }

    fn embed_prefix(&self, problem: &[TokenId], h: &[f64]) -> Result<(Array2<f64>, Array2<f64>)> {
        if h.len() != self.align.h_dim() {
            return Err(Error::Shape(format!(
                "knowledge state has {} entries, model expects {}",
                h.len(),
                self.align.h_dim()
            )));
        }
        self.check_ids(problem)?;
        let d = self.config.d_model;
        let mut emb = Array2::zeros((problem.len(), d));
        for (m, &id) in problem.iter().enumerate() {
            emb.row_mut(m).assign(&self.decoder.tok.row(id as usize));
        }
        let align_in = self.align.input(&emb, h);
        let mut x = Array2::zeros((problem.len() + 2, d));
        x.row_mut(0).assign(&self.decoder.tok.row(BOS as usize));
        x.slice_mut(s![1..=problem.len(), ..])
            .assign(&self.align.lin.forward(&align_in.view()));
        x.row_mut(problem.len() + 1).assign(&self.decoder.tok.row(SEP as usize));
        Ok((x, align_in))
    }

    /// Teacher-forced pass.
    pub fn forward(&self, problem: &[TokenId], h: &[f64], code: &[TokenId]) -> Result<(GeneratorOutput, ForwardCache)> {
        let t = problem.len() + code.len() + 2;
        if t > self.config.max_len {
            return Err(Error::Overlength {
                len: t,
                max_len: self.config.max_len,
            });
        }
        self.check_ids(code)?;
        let (prefix, align_in) = self.embed_prefix(problem, h)?;
        let d = self.config.d_model;
        let mut x = Array2::zeros((t, d));
        x.slice_mut(s![..prefix.nrows(), ..]).assign(&prefix);
        for (n, &id) in code.iter().enumerate() {
            x.row_mut(prefix.nrows() + n).assign(&self.decoder.tok.row(id as usize));
        }
        x += &self.decoder.pos.slice(s![..t, ..]);

        let mut caches = Vec::with_capacity(self.decoder.blocks.len());
        for b in &self.decoder.blocks {
            let (y, c) = b.forward(&x);
            caches.push((x, c));
            x = y;
        }
        let (ln_out, ln_f) = self.decoder.ln_f.forward(&x.view());
        let first = problem.len() + 1;
        let logits = self.decoder.head.forward(&ln_out.slice(s![first.., ..]));
        let last_hidden = if code.is_empty() {
            ln_out.slice(s![first..first + 1, ..]).to_owned()
        } else {
            ln_out.slice(s![first + 1.., ..]).to_owned()
        };
        let r_c = last_hidden.mean_axis(Axis(0)).expect("non-empty").to_vec();
        let mut input_ids = Vec::with_capacity(t);
        input_ids.push(BOS);
        input_ids.extend_from_slice(problem);
        input_ids.push(SEP);
        input_ids.extend_from_slice(code);
        Ok((
            GeneratorOutput {
                logits,
                last_hidden,
                r_c,
            },
            ForwardCache {
                problem: problem.to_vec(),
                input_ids,
                align_in,
                blocks: caches,
                ln_f,
                ln_out,
            },
        ))
    }

    /// Backpropagate `dlogits` and `dr_c` into `g` (decoder and alignment);
    /// returns `dL/dh`.
    pub fn backward(&self, c: &ForwardCache, dlogits: &Array2<f64>, dr_c: &[f64], g: &mut ModelGrads) -> Vec<f64> {
        let t = c.input_ids.len();
        let d = self.config.d_model;
        let first = c.problem.len() + 1;
        let mut dln = Array2::zeros((t, d));
        let dtail = self
            .decoder
            .head
            .backward(&c.ln_out.slice(s![first.., ..]), &dlogits.view(), &mut g.decoder.head);
        dln.slice_mut(s![first.., ..]).assign(&dtail);
        let code_rows = if t > first + 1 { first + 1..t } else { first..first + 1 };
        let share = 1.0 / code_rows.len() as f64;
        let dr = ArrayView1::from(dr_c).mapv(|x| x * share);
        for i in code_rows {
            let mut row = dln.row_mut(i);
            row += &dr;
        }
        let mut dx = self.decoder.ln_f.backward(&c.ln_f, &dln.view(), &mut g.decoder.ln_f);
        for ((b, (_, cache)), gb) in self
            .decoder
            .blocks
            .iter()
            .zip(&c.blocks)
            .zip(g.decoder.blocks.iter_mut())
            .rev()
        {
            dx = b.backward(cache, &dx, gb);
        }
        {
            let mut gp = g.decoder.pos.slice_mut(s![..t, ..]);
            gp += &dx;
        }
        for (i, &id) in c.input_ids.iter().enumerate() {
            if (1..first).contains(&i) {
                continue;
            }
            let mut row = g.decoder.tok.row_mut(id as usize);
            row += &dx.row(i);
        }
        let daligned = dx.slice(s![1..first, ..]);
        let din = self.align.lin.backward(&c.align_in.view(), &daligned, &mut g.align.lin);
        for (m, &id) in c.problem.iter().enumerate() {
            let mut row = g.decoder.tok.row_mut(id as usize);
            row += &din.slice(s![m, ..d]);
        }
        din.slice(s![.., d..]).sum_axis(Axis(0)).to_vec()
    }

    pub fn q_predict(&self, r_c: &[f64]) -> Result<QPrediction> {
        Ok(self.q.forward(r_c)?.0)
    }

    /// Greedy decoding with cached keys and values. Ties go to the lowest id.
    pub fn generate(&self, problem: &[TokenId], h: &[f64], max_new_tokens: usize) -> Result<Generation> {
        let (mut x, _) = self.embed_prefix(problem, h)?;
        let mut len = x.nrows();
        if len > self.config.max_len {
            return Err(Error::Overlength {
                len,
                max_len: self.config.max_len,
            });
        }
        x += &self.decoder.pos.slice(s![..len, ..]);
        let d = self.config.d_model;
        let n_layers = self.decoder.blocks.len();
        let mut k = vec![Array2::zeros((0, d)); n_layers];
        let mut v = vec![Array2::zeros((0, d)); n_layers];
        let mut ids = Vec::new();
        loop {
            for (l, b) in self.decoder.blocks.iter().enumerate() {
                x = b.step(&x, &mut k[l], &mut v[l]);
            }
            let last = x.slice(s![x.nrows() - 1.., ..]);
            let (ln, _) = self.decoder.ln_f.forward(&last);
            let logits = self.decoder.head.forward(&ln.view());
            let next = crate::knowledge::argmax(logits.row(0).as_slice().expect("row")) as TokenId;
            if next == EOS {
                return Ok(Generation { ids, truncated: false });
            }
            ids.push(next);
            // the output must still fit a teacher-forced pass
            if ids.len() >= max_new_tokens || len + 1 >= self.config.max_len {
                return Ok(Generation { ids, truncated: true });
            }
            x = (&self.decoder.tok.row(next as usize) + &self.decoder.pos.row(len))
                .insert_axis(Axis(0))
                .to_owned();
            len += 1;
        }
    }
}

impl Params for Model {
    fn tensors(&self) -> Vec<TensorRef<'_>> {
        let mut t = self.decoder.tensors();
        t.extend(self.side_tensors());
        t
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let Model { decoder, align, q, .. } = self;
        let mut t = decoder.tensors_mut();
        t.extend(align.tensors_mut());
        t.extend(q.tensors_mut());
        t
    }
}
