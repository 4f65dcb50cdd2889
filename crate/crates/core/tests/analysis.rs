//! Sweep and recovery contracts on a briefly trained model.

use infooirt::analysis::{factor_recovery, sweep_continuous, sweep_discrete, sweep_robustness, DiffKind};
use infooirt::checkpoint::Checkpoint;
use infooirt::config::RunConfig;
use infooirt::corpus::{IndentationStyle, NestingStyle, StyleAttribute};
use infooirt::knowledge::KnowledgeConfig;
use infooirt::run::{train_from_config, Prepared};
use infooirt::trainer::{generate_for, ObjectiveKind};

fn trained(config: RunConfig) -> (Prepared, Checkpoint) {
    let (p, out) = train_from_config(&config, 1, &mut |_| {}).unwrap();
    (p, out.best)
}

fn small() -> RunConfig {
    let mut c = RunConfig::desk();
    c.corpus.n_students = 8;
    c.corpus.n_problems = 3;
    c.generator.d_model = 16;
    c.generator.n_layers = 1;
    c.trainer.epochs = 2;
    c
}

#[test]
fn sweeps_follow_their_contracts() {
    let (p, ck) = trained(small());
    let sub = &p.corpus.submissions[p.split.train[0]];
    let (s, pr) = (sub.student_id.as_str(), sub.problem_id.as_str());

    let r = sweep_discrete(&ck, &p.corpus.problems, s, pr, 9).unwrap();
    assert_eq!(r.settings.len(), 2);
    assert_eq!(r.codes.len(), 2);
    assert_eq!(r.diffs.len(), 1);
    let learned = ck.store.state_of(s).unwrap().learned_class(9);
    let problem = &p.data.examples[p.split.train[0]].problem;
    let plain = generate_for(&ck, s, problem, None).unwrap();
    assert_eq!(r.codes[learned], ck.vocab.decode(&plain.ids).unwrap());
    let deleted: usize = r.diffs[0].iter().filter(|c| c.kind != DiffKind::Insert).map(|c| c.tokens.len()).sum();
    let inserted: usize = r.diffs[0].iter().filter(|c| c.kind != DiffKind::Delete).map(|c| c.tokens.len()).sum();
    assert_eq!(deleted, infooirt::tokenizer::split(&r.codes[0]).len());
    assert_eq!(inserted, infooirt::tokenizer::split(&r.codes[1]).len());
    assert_eq!(r.changed[0], r.codes[0] != r.codes[1]);

    let r = sweep_continuous(&ck, &p.corpus.problems, s, pr, &[-2.0, 0.0, 2.0]).unwrap();
    assert_eq!(r.codes.len(), 3);
    assert_eq!(r.unchanged(), r.codes.iter().all(|c| c == &r.codes[0]));
    assert!(sweep_continuous(&ck, &p.corpus.problems, s, pr, &[]).is_err());
    assert!(sweep_continuous(&ck, &p.corpus.problems, s, pr, &[f64::NAN]).is_err());
    assert!(sweep_discrete(&ck, &p.corpus.problems, s, pr, 10).is_err());
    assert!(sweep_discrete(&ck, &p.corpus.problems, "ghost", pr, 0).is_err());
    assert!(sweep_discrete(&ck, &p.corpus.problems, s, "nowhere", 0).is_err());

    let pairs = vec![(s.to_string(), pr.to_string())];
    let rb = sweep_robustness(&ck, &p.corpus.problems, &pairs, &[-2.0, 0.0, 2.0], &[-10.0, 10.0]).unwrap();
    assert_eq!(rb.pairs, 1);
    assert_eq!(rb.unchanged_fraction, if r.unchanged() { 1.0 } else { 0.0 });
    assert!((0.0..=1.0).contains(&rb.extreme_parse_rate));
}

#[test]
fn oirt_checkpoints_have_no_factors_to_sweep() {
    let mut c = small();
    c.knowledge = KnowledgeConfig::oirt(4);
    c.trainer.objective = ObjectiveKind::Oirt;
    c.trainer.lambda = 0.0;
    c.trainer.epochs = 1;
    let (p, ck) = trained(c);
    let sub = &p.corpus.submissions[0];
    assert!(sweep_discrete(&ck, &p.corpus.problems, &sub.student_id, &sub.problem_id, 0).is_err());
    assert!(sweep_continuous(&ck, &p.corpus.problems, &sub.student_id, &sub.problem_id, &[0.0]).is_err());
    assert!(factor_recovery(&ck, &p.corpus.profiles).is_err());
}

#[test]
fn planted_factors_are_recovered_exactly() {
    let (p, mut ck) = trained(small());
    let kc = ck.store.config;
    let logits = |f: usize| kc.d_bar + 2 * kc.d_cont + f * kc.k;
    for profile in &p.corpus.profiles {
        let i = ck.store.index_of(&profile.student_id).unwrap();
        let row = ck.store.row_mut(i);
        for f in 0..kc.d_disc {
            row[logits(f)] = 0.0;
            row[logits(f) + 1] = 0.0;
        }
        let allman = usize::from(profile.indentation_style == IndentationStyle::Allman);
        let flat = usize::from(profile.nesting_style == NestingStyle::Flat);
        row[logits(3) + allman] = 4.0;
        row[logits(6) + (1 - flat)] = 4.0;
    }
    let r = factor_recovery(&ck, &p.corpus.profiles).unwrap();
    assert_eq!(r.students, 8);
    let ind = r.matched(StyleAttribute::Indentation).unwrap();
    assert_eq!((ind.factor, ind.accuracy), (3, 1.0));
    let nest = r.matched(StyleAttribute::Nesting).unwrap();
    assert_eq!((nest.factor, nest.accuracy), (6, 1.0));
    // a constant factor predicts the majority class only
    assert_eq!(r.accuracy(0, StyleAttribute::Indentation), r.chance.get(&StyleAttribute::Indentation).copied());
    assert!(factor_recovery(&ck, &p.corpus.profiles[..3]).is_err());
}
