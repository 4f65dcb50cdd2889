//! Parser-backed CodeBLEU, dist-N diversity, and corpus aggregation.

mod ast;
mod codebleu;
mod dataflow;
mod dist;

pub use ast::{keywords, parse_mini_java, MiniAst, Node, NodeKind, Span, SyntaxError};
pub use codebleu::{
    codebleu, normalized_edges, CodeBleuReport, CodeBleuWeights, EdgeKey, KEYWORD_WEIGHT,
    MAX_ORDER,
};
pub use dataflow::{dataflow, DataflowGraph, DefKind, Occurrence, Role};
pub use dist::dist_n;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Corpus-level generation quality, one row of the results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusMetrics {
    pub codebleu: f64,
    pub ngram: f64,
    pub weighted_ngram: f64,
    pub ast_match: f64,
    pub dataflow_match: f64,
    pub dist: [f64; 3],
    pub parse_rate: f64,
    pub pairs: usize,
}

/// Mean CodeBLEU over aligned `(candidate, reference)` pairs plus dist-1/2/3
/// over the candidates. Reductions run in input order.
pub fn aggregate(
    candidates: &[String],
    references: &[String],
    weights: CodeBleuWeights,
) -> Result<CorpusMetrics> {
    if candidates.len() != references.len() {
        return Err(Error::Shape(format!(
            "{} candidates for {} references",
            candidates.len(),
            references.len()
        )));
    }
    let mut sums = [0.0; 5];
    let mut parsed = 0usize;
    for (c, r) in candidates.iter().zip(references) {
        let rep = codebleu(c, r, weights)?;
        for (s, v) in sums.iter_mut().zip([
            rep.total,
            rep.ngram,
            rep.weighted_ngram,
            rep.ast_match,
            rep.dataflow_match,
        ]) {
            *s += v;
        }
        parsed += usize::from(rep.candidate_parses);
    }
    let n = candidates.len().max(1) as f64;
    let dist = |k| dist_n(candidates, k).unwrap_or(0.0);
    Ok(CorpusMetrics {
        codebleu: sums[0] / n,
        ngram: sums[1] / n,
        weighted_ngram: sums[2] / n,
        ast_match: sums[3] / n,
        dataflow_match: sums[4] / n,
        dist: [dist(1), dist(2), dist(3)],
        parse_rate: parsed as f64 / n,
        pairs: candidates.len(),
    })
}
