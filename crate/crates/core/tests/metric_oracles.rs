mod common;

use infooirt::metrics::{codebleu, dist_n, CodeBleuWeights};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn components_equal_brute_force_on_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut unparseable = 0;
    for _ in 0..25 {
        let reference = common::random_statements(&mut rng, 8);
        let cand = common::random_candidate(&mut rng, 8);
        let r = codebleu(&cand, &reference, CodeBleuWeights::default()).unwrap();
        let (c, rf) = (common::words(&cand), common::words(&reference));
        let expect = [
            common::bleu(&c, &rf, false),
            common::bleu(&c, &rf, true),
            common::ast_match(&cand, &reference),
            common::dataflow_match(&cand, &reference),
        ];
        let got = [r.ngram, r.weighted_ngram, r.ast_match, r.dataflow_match];
        for (g, e) in got.iter().zip(expect) {
            assert!((g - e).abs() <= 1e-9, "{cand:?} vs {reference:?}: {got:?} != {expect:?}");
        }
        let total: f64 = expect.iter().sum::<f64>() / 4.0;
        assert!((r.total - total).abs() <= 1e-9);
        unparseable += usize::from(!r.candidate_parses);
    }
    // the generator covers both branches
    assert!(unparseable > 0 && unparseable < 25, "{unparseable}");
}

#[test]
fn custom_weights_combine_components() {
    let w = CodeBleuWeights([0.1, 0.2, 0.3, 0.4]);
    let r = codebleu("int a = 1 ; a ++ ;", "int b = 1 ; return b ;", w).unwrap();
    let t = 0.1 * r.ngram + 0.2 * r.weighted_ngram + 0.3 * r.ast_match + 0.4 * r.dataflow_match;
    assert!((r.total - t).abs() < 1e-12);
}

#[test]
fn dist_worked_examples() {
    assert_eq!(dist_n(&["a b c"], 1).unwrap(), 1.0);
    assert!((dist_n(&["a a a"], 1).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    assert!((dist_n(&["a b a b"], 2).unwrap() - 2.0 / 3.0).abs() < 1e-15);
    assert!(dist_n(&["a"], 2).is_err());
}

#[test]
fn dataflow_edges_match_hand_enumeration() {
    use infooirt::metrics::{dataflow, parse_mini_java};
    let g = dataflow(&parse_mini_java("int a = 1 ; return a ;").unwrap());
    assert_eq!(g.edges.len(), 1);
    let g = dataflow(&parse_mini_java("int a = 1 ; int b = 2 ; return b ;").unwrap());
    assert_eq!(g.edges.len(), 1);
    let g = dataflow(&parse_mini_java("int x ; if ( c ) { x = 1 ; } else { x = 2 ; } return x ;").unwrap());
    let last_use = g.nodes.len() - 1;
    assert_eq!(g.edges.iter().filter(|e| e.1 == last_use).count(), 2);
}
