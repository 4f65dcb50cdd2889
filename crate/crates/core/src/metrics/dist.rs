use std::collections::BTreeSet;

use super::codebleu::code_tokens;
use crate::error::{Error, Result};

/// Distinct N-grams over total N-grams, pooled across all `codes`.
pub fn dist_n<S: AsRef<str>>(codes: &[S], n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidArgument("dist-N needs N >= 1".into()));
    }
    let mut distinct = BTreeSet::new();
    let mut total = 0usize;
    for code in codes {
        let toks = code_tokens(code.as_ref());
        for w in toks.windows(n) {
            distinct.insert(w.to_vec());
            total += 1;
        }
    }
    if total == 0 {
        return Err(Error::InvalidArgument(format!(
            "no code has at least {n} tokens"
        )));
    }
    Ok(distinct.len() as f64 / total as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_examples() {
        assert_eq!(dist_n(&["a b c"], 1).unwrap(), 1.0);
        assert!((dist_n(&["a a a"], 1).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert!((dist_n(&["a b a b"], 2).unwrap() - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn pooled_across_codes() {
        // unigrams: a b | a c -> 4 total, 3 distinct
        assert!((dist_n(&["a b", "a c"], 1).unwrap() - 0.75).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        assert!(dist_n(&["a"], 0).is_err());
        assert!(dist_n(&["a b"], 3).is_err());
        assert!(dist_n::<&str>(&[], 1).is_err());
    }
}
