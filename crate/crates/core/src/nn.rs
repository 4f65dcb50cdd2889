//! Dense layers with hand-written backward passes, plus the optimizers.

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Normal};

/// A named, shaped view of one parameter tensor.
pub struct TensorRef<'a> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: &'a [f64],
}

/// Parameter containers expose their tensors in a fixed order; gradient
/// buffers are values of the same type.
pub trait Params {
    fn tensors(&self) -> Vec<TensorRef<'_>>;
    fn tensors_mut(&mut self) -> Vec<&mut [f64]>;

    fn zero(&mut self) {
        for t in self.tensors_mut() {
            t.fill(0.0);
        }
    }

    fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.data.len()).sum()
    }
}

pub(crate) fn t2<'a>(name: String, a: &'a Array2<f64>) -> TensorRef<'a> {
    TensorRef {
        name,
        shape: a.shape().to_vec(),
        data: a.as_slice().expect("standard layout"),
    }
}

pub(crate) fn t1<'a>(name: String, a: &'a Array1<f64>) -> TensorRef<'a> {
    TensorRef {
        name,
        shape: a.shape().to_vec(),
        data: a.as_slice().expect("standard layout"),
    }
}

pub(crate) fn m2(a: &mut Array2<f64>) -> &mut [f64] {
    a.as_slice_mut().expect("standard layout")
}

pub(crate) fn m1(a: &mut Array1<f64>) -> &mut [f64] {
    a.as_slice_mut().expect("standard layout")
}

pub(crate) fn normal_matrix(rng: &mut impl Rng, rows: usize, cols: usize, std: f64) -> Array2<f64> {
    let n = Normal::new(0.0, std).expect("finite std");
    Array2::from_shape_simple_fn((rows, cols), || n.sample(rng))
}

/// `y = x W + b`, with `W` stored input-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Linear {
    pub fn new(rng: &mut impl Rng, input: usize, output: usize, std: f64) -> Linear {
        Linear {
            w: normal_matrix(rng, input, output, std),
            b: Array1::zeros(output),
        }
    }

    pub fn zeros(input: usize, output: usize) -> Linear {
        Linear {
            w: Array2::zeros((input, output)),
            b: Array1::zeros(output),
        }
    }

    pub fn forward(&self, x: &ArrayView2<f64>) -> Array2<f64> {
        x.dot(&self.w) + &self.b
    }

    /// Accumulates into `g` and returns the input gradient.
    pub fn backward(&self, x: &ArrayView2<f64>, dy: &ArrayView2<f64>, g: &mut Linear) -> Array2<f64> {
        g.w += &x.t().dot(dy);
        g.b += &dy.sum_axis(Axis(0));
        dy.dot(&self.w.t())
    }

    pub fn tensors<'a>(&'a self, prefix: &str, out: &mut Vec<TensorRef<'a>>) {
        out.push(t2(format!("{prefix}.w"), &self.w));
        out.push(t1(format!("{prefix}.b"), &self.b));
    }

    pub fn tensors_mut<'a>(&'a mut self, out: &mut Vec<&'a mut [f64]>) {
        out.push(m2(&mut self.w));
        out.push(m1(&mut self.b));
    }
}

const LN_EPS: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct LayerNorm {
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
}

pub struct LnCache {
    xhat: Array2<f64>,
    rstd: Array1<f64>,
}

impl LayerNorm {
    pub fn new(d: usize) -> LayerNorm {
        LayerNorm {
            gamma: Array1::ones(d),
            beta: Array1::zeros(d),
        }
    }

    pub fn zeros(d: usize) -> LayerNorm {
        LayerNorm {
            gamma: Array1::zeros(d),
            beta: Array1::zeros(d),
        }
    }

    pub fn forward(&self, x: &ArrayView2<f64>) -> (Array2<f64>, LnCache) {
        let d = x.ncols() as f64;
        let mut xhat = x.to_owned();
        let mut rstd = Array1::zeros(x.nrows());
        for (mut row, r) in xhat.rows_mut().into_iter().zip(rstd.iter_mut()) {
            let mean = row.sum() / d;
            row -= mean;
            let var = row.dot(&row) / d;
            *r = 1.0 / (var + LN_EPS).sqrt();
            row *= *r;
        }
        let y = &xhat * &self.gamma + &self.beta;
        (y, LnCache { xhat, rstd })
    }

    pub fn backward(&self, c: &LnCache, dy: &ArrayView2<f64>, g: &mut LayerNorm) -> Array2<f64> {
        g.gamma += &(dy * &c.xhat).sum_axis(Axis(0));
        g.beta += &dy.sum_axis(Axis(0));
        let d = dy.ncols() as f64;
        let dxhat = dy * &self.gamma;
        let mut dx = Array2::zeros(dy.raw_dim());
        for i in 0..dy.nrows() {
            let dh = dxhat.row(i);
            let xh = c.xhat.row(i);
            let m1 = dh.sum() / d;
            let m2 = dh.dot(&xh) / d;
            let mut out = dx.row_mut(i);
            for j in 0..dh.len() {
                out[j] = c.rstd[i] * (dh[j] - m1 - xh[j] * m2);
            }
        }
        dx
    }

    pub fn tensors<'a>(&'a self, prefix: &str, out: &mut Vec<TensorRef<'a>>) {
        out.push(t1(format!("{prefix}.gamma"), &self.gamma));
        out.push(t1(format!("{prefix}.beta"), &self.beta));
    }

    pub fn tensors_mut<'a>(&'a mut self, out: &mut Vec<&'a mut [f64]>) {
        out.push(m1(&mut self.gamma));
        out.push(m1(&mut self.beta));
    }
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)

pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + 0.044715 * x * x * x)).tanh())
}

pub fn gelu_grad(x: f64) -> f64 {
    let u = GELU_C * (x + 0.044715 * x * x * x);
    let t = u.tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * 0.044715 * x * x)
}

/// Numerically stable softmax of a slice, in place.
pub fn softmax_in_place(v: &mut [f64]) {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in v.iter_mut() {
        *x /= sum;
    }
}

pub fn log_softmax(v: &[f64]) -> Vec<f64> {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
    v.iter().map(|x| x - lse).collect()
}

/// Causal multi-head self-attention.
#[derive(Debug, Clone, PartialEq)]
pub struct Attention {
    pub n_heads: usize,
    pub qkv: Linear,
    pub proj: Linear,
}

pub struct AttnCache {
    x: Array2<f64>,
    qkv: Array2<f64>,
    probs: Vec<Array2<f64>>,
    merged: Array2<f64>,
}

/// Keys and values of already-processed positions, for incremental decoding.
#[derive(Debug, Clone, Default)]
pub struct KvCache {
    pub k: Vec<Array2<f64>>,
    pub v: Vec<Array2<f64>>,
}

impl Attention {
    pub fn new(rng: &mut impl Rng, d: usize, n_heads: usize, std: f64, proj_std: f64) -> Attention {
        Attention {
            n_heads,
            qkv: Linear::new(rng, d, 3 * d, std),
            proj: Linear::new(rng, d, d, proj_std),
        }
    }

    pub fn zeros(d: usize, n_heads: usize) -> Attention {
        Attention {
            n_heads,
            qkv: Linear::zeros(d, 3 * d),
            proj: Linear::zeros(d, d),
        }
    }

    fn head_attend(q: &ArrayView2<f64>, k: &ArrayView2<f64>, offset: usize, scale: f64) -> Array2<f64> {
        // row i of q sits at absolute position offset + i
        let mut p = q.dot(&k.t());
        for (i, mut row) in p.rows_mut().into_iter().enumerate() {
            let visible = offset + i + 1;
            let r = row.as_slice_mut().expect("contiguous");
            for x in r[..visible].iter_mut() {
                *x *= scale;
            }
            softmax_in_place(&mut r[..visible]);
            r[visible..].fill(0.0);
        }
        p
    }

    pub fn forward(&self, x: &ArrayView2<f64>) -> (Array2<f64>, AttnCache) {
        let (t, d) = x.dim();
        let dh = d / self.n_heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let qkv = self.qkv.forward(x);
        let mut merged = Array2::zeros((t, d));
        let mut probs = Vec::with_capacity(self.n_heads);
        for h in 0..self.n_heads {
            let q = qkv.slice(s![.., h * dh..(h + 1) * dh]);
            let k = qkv.slice(s![.., d + h * dh..d + (h + 1) * dh]);
            let v = qkv.slice(s![.., 2 * d + h * dh..2 * d + (h + 1) * dh]);
            let p = Self::head_attend(&q, &k, 0, scale);
            merged.slice_mut(s![.., h * dh..(h + 1) * dh]).assign(&p.dot(&v));
            probs.push(p);
        }
        let y = self.proj.forward(&merged.view());
        (
            y,
            AttnCache {
                x: x.to_owned(),
                qkv,
                probs,
                merged,
            },
        )
    }

    pub fn backward(&self, c: &AttnCache, dy: &ArrayView2<f64>, g: &mut Attention) -> Array2<f64> {
        let (t, d) = c.x.dim();
        let dh = d / self.n_heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let dmerged = self.proj.backward(&c.merged.view(), dy, &mut g.proj);
        let mut dqkv = Array2::zeros((t, 3 * d));
        for h in 0..self.n_heads {
            let q = c.qkv.slice(s![.., h * dh..(h + 1) * dh]);
            let k = c.qkv.slice(s![.., d + h * dh..d + (h + 1) * dh]);
            let v = c.qkv.slice(s![.., 2 * d + h * dh..2 * d + (h + 1) * dh]);
            let p = &c.probs[h];
            let dout = dmerged.slice(s![.., h * dh..(h + 1) * dh]);
            let dv = p.t().dot(&dout);
            let dp = dout.dot(&v.t());
            let mut ds = &dp * p;
            for (i, mut row) in ds.rows_mut().into_iter().enumerate() {
                let dot: f64 = row.sum();
                for j in 0..=i {
                    row[j] -= p[[i, j]] * dot;
                }
            }
            ds *= scale;
            let dq = ds.dot(&k);
            let dk = ds.t().dot(&q);
            dqkv.slice_mut(s![.., h * dh..(h + 1) * dh]).assign(&dq);
            dqkv.slice_mut(s![.., d + h * dh..d + (h + 1) * dh]).assign(&dk);
            dqkv.slice_mut(s![.., 2 * d + h * dh..2 * d + (h + 1) * dh]).assign(&dv);
        }
        self.qkv.backward(&c.x.view(), &dqkv.view(), &mut g.qkv)
    }

    /// Process new rows against the cache, appending their keys and values.
    pub fn step(&self, x: &ArrayView2<f64>, k_cache: &mut Array2<f64>, v_cache: &mut Array2<f64>) -> Array2<f64> {
        let (t, d) = x.dim();
        let dh = d / self.n_heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let offset = k_cache.nrows();
        let qkv = self.qkv.forward(x);
        k_cache
            .append(Axis(0), qkv.slice(s![.., d..2 * d]))
            .expect("matching width");
        v_cache
            .append(Axis(0), qkv.slice(s![.., 2 * d..]))
            .expect("matching width");
        let mut merged = Array2::zeros((t, d));
        for h in 0..self.n_heads {
            let q = qkv.slice(s![.., h * dh..(h + 1) * dh]);
            let k = k_cache.slice(s![.., h * dh..(h + 1) * dh]);
            let v = v_cache.slice(s![.., h * dh..(h + 1) * dh]);
            let p = Self::head_attend(&q, &k, offset, scale);
            merged.slice_mut(s![.., h * dh..(h + 1) * dh]).assign(&p.dot(&v));
        }
        self.proj.forward(&merged.view())
    }
}

/// Pre-norm transformer block: `x + attn(ln1 x)`, then `x + mlp(ln2 x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub ln1: LayerNorm,
    pub attn: Attention,
    pub ln2: LayerNorm,
    pub fc: Linear,
    pub out: Linear,
}

pub struct BlockCache {
    ln1: LnCache,
    attn: AttnCache,
    ln2: LnCache,
    ln2_out: Array2<f64>,
    pre_act: Array2<f64>,
    act: Array2<f64>,
}

impl Block {
    pub fn new(rng: &mut impl Rng, d: usize, n_heads: usize, n_layers: usize) -> Block {
        let std = 0.02;
        let proj_std = std / (2.0 * n_layers as f64).sqrt();
        Block {
            ln1: LayerNorm::new(d),
            attn: Attention::new(rng, d, n_heads, std, proj_std),
            ln2: LayerNorm::new(d),
            fc: Linear::new(rng, d, 4 * d, std),
            out: Linear::new(rng, 4 * d, d, proj_std),
        }
    }

    pub fn zeros(d: usize, n_heads: usize) -> Block {
        Block {
            ln1: LayerNorm::zeros(d),
            attn: Attention::zeros(d, n_heads),
            ln2: LayerNorm::zeros(d),
            fc: Linear::zeros(d, 4 * d),
            out: Linear::zeros(4 * d, d),
        }
    }

    pub fn forward(&self, x: &Array2<f64>) -> (Array2<f64>, BlockCache) {
        let (a_in, ln1) = self.ln1.forward(&x.view());
        let (a, attn) = self.attn.forward(&a_in.view());
        let x1 = x + &a;
        let (m_in, ln2) = self.ln2.forward(&x1.view());
        let pre_act = self.fc.forward(&m_in.view());
        let act = pre_act.mapv(gelu);
        let y = &x1 + &self.out.forward(&act.view());
        (
            y,
            BlockCache {
                ln1,
                attn,
                ln2,
                ln2_out: m_in,
                pre_act,
                act,
            },
        )
    }

    pub fn backward(&self, c: &BlockCache, dy: &Array2<f64>, g: &mut Block) -> Array2<f64> {
        let dact = self.out.backward(&c.act.view(), &dy.view(), &mut g.out);
        let dpre = dact * &c.pre_act.mapv(gelu_grad);
        let dm_in = self.fc.backward(&c.ln2_out.view(), &dpre.view(), &mut g.fc);
        let dx1 = dy + &self.ln2.backward(&c.ln2, &dm_in.view(), &mut g.ln2);
        let da_in = self.attn.backward(&c.attn, &dx1.view(), &mut g.attn);
        &dx1 + &self.ln1.backward(&c.ln1, &da_in.view(), &mut g.ln1)
    }

    pub fn step(&self, x: &Array2<f64>, k: &mut Array2<f64>, v: &mut Array2<f64>) -> Array2<f64> {
        let (a_in, _) = self.ln1.forward(&x.view());
        let x1 = x + &self.attn.step(&a_in.view(), k, v);
        let (m_in, _) = self.ln2.forward(&x1.view());
        let act = self.fc.forward(&m_in.view()).mapv(gelu);
        &x1 + &self.out.forward(&act.view())
    }

    pub fn tensors<'a>(&'a self, prefix: &str, out: &mut Vec<TensorRef<'a>>) {
        self.ln1.tensors(&format!("{prefix}.ln1"), out);
        self.attn.qkv.tensors(&format!("{prefix}.attn.qkv"), out);
        self.attn.proj.tensors(&format!("{prefix}.attn.proj"), out);
        self.ln2.tensors(&format!("{prefix}.ln2"), out);
        self.fc.tensors(&format!("{prefix}.mlp.fc"), out);
        self.out.tensors(&format!("{prefix}.mlp.out"), out);
    }

    pub fn tensors_mut<'a>(&'a mut self, out: &mut Vec<&'a mut [f64]>) {
        self.ln1.tensors_mut(out);
        self.attn.qkv.tensors_mut(out);
        self.attn.proj.tensors_mut(out);
        self.ln2.tensors_mut(out);
        self.fc.tensors_mut(out);
        self.out.tensors_mut(out);
    }
}

/// Adam with optional decoupled weight decay.
#[derive(Debug, Clone)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: u64,
}

impl Adam {
    pub fn new(weight_decay: f64) -> Adam {
        Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
            m: Vec::new(),
            v: Vec::new(),
            t: 0,
        }
    }

    pub fn step(&mut self, params: Vec<&mut [f64]>, grads: &[TensorRef<'_>], lr: f64) {
        if self.m.is_empty() {
            self.m = grads.iter().map(|g| vec![0.0; g.data.len()]).collect();
            self.v = self.m.clone();
        }
        assert_eq!(params.len(), grads.len(), "parameter and gradient lists differ");
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for (i, (p, g)) in params.into_iter().zip(grads).enumerate() {
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            for j in 0..p.len() {
                let gj = g.data[j];
                m[j] = self.beta1 * m[j] + (1.0 - self.beta1) * gj;
                v[j] = self.beta2 * v[j] + (1.0 - self.beta2) * gj * gj;
                let update = (m[j] / bc1) / ((v[j] / bc2).sqrt() + self.eps);
                p[j] -= lr * (update + self.weight_decay * p[j]);
            }
        }
    }
}

pub fn sq_norm(grads: &[TensorRef<'_>]) -> f64 {
    grads
        .iter()
        .flat_map(|t| t.data.iter())
        .map(|x| x * x)
        .sum()
}
