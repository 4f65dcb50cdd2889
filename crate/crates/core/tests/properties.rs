//! Randomized properties of the metrics, diffs and splits.

mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use infooirt::analysis::{token_diff, DiffKind};
use infooirt::corpus::{split, synth_generate, SplitRatios, SynthSpec};
use infooirt::metrics::{codebleu, CodeBleuWeights};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn codebleu_components_are_bounded(seed in any::<u64>(), a in 0.0f64..1.0, b in 0.0f64..1.0, c in 0.0f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let reference = common::random_statements(&mut rng, 12);
        let cand = common::random_candidate(&mut rng, 12);
        let s = a + b + c + 1.0;
        let w = CodeBleuWeights([a / s, b / s, c / s, 1.0 / s]);
        let r = codebleu(&cand, &reference, w).unwrap();
        for v in [r.ngram, r.weighted_ngram, r.ast_match, r.dataflow_match, r.total] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        let t = w.0[0] * r.ngram + w.0[1] * r.weighted_ngram + w.0[2] * r.ast_match + w.0[3] * r.dataflow_match;
        prop_assert!((r.total - t).abs() < 1e-12);
        let id = codebleu(&reference, &reference, w).unwrap();
        prop_assert!((id.total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn diffs_rebuild_both_sides(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = common::random_statements(&mut rng, 10);
        let b = common::random_candidate(&mut rng, 10);
        let d = token_diff(&a, &b);
        let side = |skip: DiffKind| -> Vec<String> {
            d.iter().filter(|c| c.kind != skip).flat_map(|c| c.tokens.clone()).collect()
        };
        prop_assert_eq!(side(DiffKind::Insert), infooirt::tokenizer::split(&a));
        prop_assert_eq!(side(DiffKind::Delete), infooirt::tokenizer::split(&b));
    }

    #[test]
    fn splits_partition_and_cover_students(n_students in 2usize..12, n_problems in 2usize..6, seed in any::<u64>()) {
        let corpus = synth_generate(&SynthSpec { n_students, n_problems, bug_rate: 0.3, seed }).unwrap();
        let s = split(&corpus.submissions, SplitRatios::default(), seed).unwrap();
        let mut all: Vec<usize> = s.train.iter().chain(&s.validation).chain(&s.test).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..corpus.submissions.len()).collect::<Vec<_>>());
        let in_train: std::collections::BTreeSet<&str> =
            s.train.iter().map(|&i| corpus.submissions[i].student_id.as_str()).collect();
        for &i in s.validation.iter().chain(&s.test) {
            prop_assert!(in_train.contains(corpus.submissions[i].student_id.as_str()));
        }
    }
}
