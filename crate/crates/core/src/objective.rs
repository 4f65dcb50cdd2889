//! Losses: summed token NLL, the Q negative log-likelihood standing in for
//! the mutual-information bound, and their combination
//! `total = oirt + λ · q_nll`.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generator::QPrediction;
use crate::knowledge::LatentSample;
use crate::nn::log_softmax;
use crate::tokenizer::TokenId;

/// Bounds applied to Q's predicted log σ before exponentiation.
pub const LOG_SIGMA_MIN: f64 = -5.0;
pub const LOG_SIGMA_MAX: f64 = 2.0;

const PAD: TokenId = 0;
const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub oirt: f64,
    pub q_nll: f64,
    pub total: f64,
    pub lambda: f64,
    pub token_count: usize,
}

impl LossBreakdown {
    pub fn add(&mut self, other: &LossBreakdown) {
        self.oirt += other.oirt;
        self.q_nll += other.q_nll;
        self.total += other.total;
        self.token_count += other.token_count;
    }
}

/// Summed `−log softmax(logits)[target]` over non-PAD targets, and the
/// number of such targets.
pub fn oirt_loss(logits: &Array2<f64>, targets: &[TokenId]) -> Result<(f64, usize)> {
    Ok(oirt_loss_grad(logits, targets, false)?.0)
}

/// As [`oirt_loss`], optionally with `d(sum)/d(logits)`.
pub fn oirt_loss_grad(logits: &Array2<f64>, targets: &[TokenId], want_grad: bool) -> Result<((f64, usize), Option<Array2<f64>>)> {
    if logits.nrows() != targets.len() {
        return Err(Error::Shape(format!(
            "{} logit rows for {} targets",
            logits.nrows(),
            targets.len()
        )));
    }
    let mut grad = want_grad.then(|| Array2::zeros(logits.raw_dim()));
    let mut sum = 0.0;
    let mut count = 0;
    for (i, &t) in targets.iter().enumerate() {
        if t == PAD {
            continue;
        }
        let row = logits.row(i).to_vec();
        if t as usize >= row.len() {
            return Err(Error::Shape(format!("target {t} outside {} logits", row.len())));
        }
        let lp = log_softmax(&row);
        sum -= lp[t as usize];
        count += 1;
        if let Some(g) = grad.as_mut() {
            for (j, l) in lp.iter().enumerate() {
                g[[i, j]] = l.exp();
            }
            g[[i, t as usize]] -= 1.0;
        }
    }
    Ok(((sum, count), grad))
}

/// `−log Q(ĥ | c)`: Gaussian NLL of each continuous value plus the
/// cross-entropy of each discrete vector under Q's categorical.
pub fn info_nll(q: &QPrediction, sample: &LatentSample) -> Result<f64> {
    Ok(info_nll_grad(q, sample)?.0)
}

/// Gradients of [`info_nll`] with respect to Q's outputs and the sample.
pub struct InfoGrad {
    pub dq: QPrediction,
    pub d_cont: Vec<f64>,
    pub d_disc: Vec<Vec<f64>>,
}

pub fn info_nll_grad(q: &QPrediction, sample: &LatentSample) -> Result<(f64, InfoGrad)> {
    if q.cont_mean.len() != sample.cont_values.len()
        || q.cont_log_sigma.len() != sample.cont_values.len()
        || q.disc_logits.len() != sample.disc_values.len()
        || q.disc_logits.iter().zip(&sample.disc_values).any(|(a, b)| a.len() != b.len())
    {
        return Err(Error::Shape("Q prediction does not match the latent sample".into()));
    }
    let mut nll = 0.0;
    let mut dq = QPrediction {
        cont_mean: Vec::with_capacity(q.cont_mean.len()),
        cont_log_sigma: Vec::with_capacity(q.cont_mean.len()),
        disc_logits: Vec::with_capacity(q.disc_logits.len()),
    };
    let mut d_cont = Vec::with_capacity(q.cont_mean.len());
    for ((&x, &m), &raw) in sample.cont_values.iter().zip(&q.cont_mean).zip(&q.cont_log_sigma) {
        let ls = raw.clamp(LOG_SIGMA_MIN, LOG_SIGMA_MAX);
        let inv_var = (-2.0 * ls).exp();
        let z2 = (x - m) * (x - m) * inv_var;
        nll += HALF_LN_2PI + ls + 0.5 * z2;
        dq.cont_mean.push(-(x - m) * inv_var);
        let inside = (LOG_SIGMA_MIN..=LOG_SIGMA_MAX).contains(&raw);
        dq.cont_log_sigma.push(if inside { 1.0 - z2 } else { 0.0 });
        d_cont.push((x - m) * inv_var);
    }
    let mut d_disc = Vec::with_capacity(q.disc_logits.len());
    for (logits, target) in q.disc_logits.iter().zip(&sample.disc_values) {
        let lp = log_softmax(logits);
        let mass: f64 = target.iter().sum();
        nll -= target.iter().zip(&lp).map(|(t, l)| t * l).sum::<f64>();
        dq.disc_logits.push(lp.iter().zip(target).map(|(l, t)| mass * l.exp() - t).collect());
        d_disc.push(lp.iter().map(|l| -l).collect());
    }
    Ok((nll, InfoGrad { dq, d_cont, d_disc }))
}

pub fn total_loss(oirt: f64, q_nll: f64, lambda: f64) -> Result<f64> {
    if !(lambda >= 0.0) {
        return Err(Error::InvalidArgument(format!("lambda must be nonnegative, got {lambda}")));
    }
    Ok(oirt + lambda * q_nll)
}
