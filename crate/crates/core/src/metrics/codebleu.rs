use std::collections::BTreeMap;


use serde::{Deserialize, Serialize};

use super::ast::{keywords, parse_mini_java, MiniAst};
use super::dataflow::{dataflow, DataflowGraph, DefKind, Role};
use super::ast::NodeKind;
use crate::error::{Error, Result};
use crate::lexer::scan;

pub const KEYWORD_WEIGHT: f64 = 4.0;
pub const MAX_ORDER: usize = 4;

/// Component weights `(ngram, weighted_ngram, ast_match, dataflow_match)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CodeBleuWeights(pub [f64; 4]);

impl Default for CodeBleuWeights {
    fn default() -> Self {
        CodeBleuWeights([0.25; 4])
    }
}

impl CodeBleuWeights {
    pub fn validate(&self) -> Result<()> {
        if self.0.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Config("CodeBLEU weights must be nonnegative".into()));
        }
        if (self.0.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Config("CodeBLEU weights must sum to 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodeBleuReport {
    pub ngram: f64,
    pub weighted_ngram: f64,
    pub ast_match: f64,
    pub dataflow_match: f64,
    pub total: f64,
    pub weights: CodeBleuWeights,
    /// No unigram of the candidate occurs in the reference. The smoothed
    /// n-gram score is 0 in that case as well.
    pub ngram_raw_zero: bool,
    pub candidate_parses: bool,
}

pub(crate) fn code_tokens(text: &str) -> Vec<String> {
    scan(text).into_iter().map(|l| l.text).collect()
}

pub(crate) fn counts<T: Ord + Clone>(items: impl IntoIterator<Item = T>) -> BTreeMap<T, usize> {
    let mut m = BTreeMap::new();
    for it in items {
        *m.entry(it).or_insert(0) += 1;
    }
    m
}

/// Multiset intersection size.
pub(crate) fn clipped_matches<T: Ord>(cand: &BTreeMap<T, usize>, reference: &BTreeMap<T, usize>) -> usize {
    cand.iter()
        .map(|(k, c)| (*c).min(reference.get(k).copied().unwrap_or(0)))
        .sum()
}

fn token_weight(tok: &str) -> f64 {
    if keywords().contains(&tok) {
        KEYWORD_WEIGHT
    } else {
        1.0
    }
}

fn brevity_penalty(cand_len: usize, ref_len: usize) -> f64 {
    if cand_len == 0 {
        0.0
    } else if cand_len > ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / cand_len as f64).exp()
    }
}

/// Sentence BLEU up to 4-grams. Unigram precision is unsmoothed; orders ≥ 2
/// use add-one smoothing on numerator and denominator. With `weighted`, each
/// n-gram counts with the mean weight of its tokens (keywords weigh 4).
fn bleu(cand: &[String], reference: &[String], weighted: bool) -> (f64, bool) {
    let mut log_sum = 0.0;
    let mut raw_zero = false;
    for n in 1..=MAX_ORDER {
        let c = counts(cand.windows(n).map(|w| w.to_vec()));
        let r = counts(reference.windows(n).map(|w| w.to_vec()));
        let weight = |g: &Vec<String>| {
            if weighted {
                g.iter().map(|t| token_weight(t)).sum::<f64>() / n as f64
            } else {
                1.0
            }
        };
        let mut num = 0.0;
        let mut den = 0.0;
        for (g, &cnt) in &c {
            let w = weight(g);
            num += w * cnt.min(r.get(g).copied().unwrap_or(0)) as f64;
            den += w * cnt as f64;
        }
        let p = if n == 1 {
            if num == 0.0 {
                raw_zero = true;
                return (0.0, raw_zero);
            }
            num / den
        } else {
            (num + 1.0) / (den + 1.0)
        };
        log_sum += p.ln() / MAX_ORDER as f64;
    }
    (brevity_penalty(cand.len(), reference.len()) * log_sum.exp(), raw_zero)
}

fn ast_match(cand: &MiniAst, reference: &MiniAst) -> f64 {
    let r = reference.subtree_signatures();
    if r.is_empty() {
        return 1.0;
    }
    let rc = counts(r.iter().cloned());
    let cc = counts(cand.subtree_signatures());
    clipped_matches(&cc, &rc) as f64 / r.len() as f64
}

/// Identifier-normalized key of a def-use edge.
pub type EdgeKey = (usize, DefKind, NodeKind);

pub fn normalized_edges(g: &DataflowGraph) -> Vec<EdgeKey> {
    let order = g.variable_order();
    g.edges
        .iter()
        .map(|&(d, u)| {
            let def = &g.nodes[d];
            let var = order.iter().position(|v| *v == def.name).expect("known var");
            let kind = match def.role {
                Role::Def(k) => k,
                Role::Use => unreachable!("edges start at definitions"),
            };
            (var, kind, g.nodes[u].context)
        })
        .collect()
}

fn dataflow_match(cand: &MiniAst, reference: &MiniAst) -> f64 {
    let r = normalized_edges(&dataflow(reference));
    if r.is_empty() {
        return 1.0;
    }
    let rc = counts(r.iter().copied());
    let cc = counts(normalized_edges(&dataflow(cand)));
    clipped_matches(&cc, &rc) as f64 / r.len() as f64
}

/// Composite CodeBLEU of `candidate` against `reference`.
///
/// An unparseable candidate scores 0 on the AST and dataflow components and
/// sets `candidate_parses = false`. The reference must parse.
pub fn codebleu(candidate: &str, reference: &str, weights: CodeBleuWeights) -> Result<CodeBleuReport> {
    weights.validate()?;
    let ref_toks = code_tokens(reference);
    if ref_toks.is_empty() {
        return Err(Error::InvalidArgument("empty reference".into()));
    }
    let ref_ast = parse_mini_java(reference)?;
    let cand_toks = code_tokens(candidate);
    let (ngram, ngram_raw_zero) = bleu(&cand_toks, &ref_toks, false);
    let (weighted_ngram, _) = bleu(&cand_toks, &ref_toks, true);
    let (ast, flow, candidate_parses) = match parse_mini_java(candidate) {
        Ok(c) => (ast_match(&c, &ref_ast), dataflow_match(&c, &ref_ast), true),
        Err(_) => (0.0, 0.0, false),
    };
    let w = weights.0;
    let total = w[0] * ngram + w[1] * weighted_ngram + w[2] * ast + w[3] * flow;
    Ok(CodeBleuReport {
        ngram,
        weighted_ngram,
        ast_match: ast,
        dataflow_match: flow,
        total,
        weights,
        ngram_raw_zero,
        candidate_parses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_scores_one() {
        let src = "public int f(int x){ int y = x + 1; if (y > 2) { y = y * 2; } return y; }";
        let r = codebleu(src, src, CodeBleuWeights::default()).unwrap();
        for v in [r.ngram, r.weighted_ngram, r.ast_match, r.dataflow_match, r.total] {
            assert!((v - 1.0).abs() < 1e-9, "{r:?}");
        }
    }

    #[test]
    fn disjoint_streams_zero_ngram() {
        let r = codebleu("foo bar", "return 1 ;", CodeBleuWeights::default()).unwrap();
        assert!(r.ngram_raw_zero);
        assert_eq!(r.ngram, 0.0);
        assert!(!r.candidate_parses);
        assert_eq!(r.ast_match, 0.0);
        assert_eq!(r.dataflow_match, 0.0);
    }

    #[test]
    fn renaming_preserves_dataflow() {
        let a = "int a = 1; int b = a; return b;";
        let b = "int p = 1; int q = p; return q;";
        let r = codebleu(a, b, CodeBleuWeights::default()).unwrap();
        assert!((r.dataflow_match - 1.0).abs() < 1e-12);
        assert!((r.ast_match - 1.0).abs() < 1e-12);
        assert!(r.ngram < 1.0);
    }

    #[test]
    fn errors() {
        assert!(codebleu("x;", "", CodeBleuWeights::default()).is_err());
        assert!(codebleu("x;", "x = ;", CodeBleuWeights::default()).is_err());
        assert!(codebleu("x;", "x;", CodeBleuWeights([0.5, 0.5, 0.5, 0.0])).is_err());
    }

    #[test]
    fn brevity_penalty_shrinks_short_candidates() {
        let r = codebleu("return x ;", "int y = 2 ; return x ;", CodeBleuWeights::default()).unwrap();
        assert!(r.ngram < 0.5);
    }
}
