//! One PASS/FAIL line per acceptance criterion, with measured values.
//! Exits nonzero when any criterion fails.

mod common;

use std::path::PathBuf;
use std::time::Instant;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use infooirt::analysis::{factor_recovery, spearman, sweep_robustness};
use infooirt::checkpoint::Checkpoint;
use infooirt::config::RunConfig;
use infooirt::corpus::{ingest_csedm, SplitPart, StyleAttribute};
use infooirt::generator::QPrediction;
use infooirt::knowledge::{KnowledgeConfig, LatentSample, SampleMode};
use infooirt::metrics::{codebleu, dist_n, parse_mini_java, CodeBleuWeights};
use infooirt::objective::{info_nll, oirt_loss};
use infooirt::run::{train_from_config, Prepared};
use infooirt::trainer::{evaluate, generate_for, ObjectiveKind, TrainOutcome};

const SEEDS: [u64; 3] = [0, 1, 2];

struct Line {
    id: usize,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn config_file(name: &str) -> RunConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    RunConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

struct Trained {
    prepared: Prepared,
    outcome: TrainOutcome,
    secs: f64,
}

fn train(config: &RunConfig, seed: u64, label: &str) -> Trained {
    let t = Instant::now();
    let (prepared, outcome) = train_from_config(config, seed, &mut |_| {}).expect("training");
    let secs = t.elapsed().as_secs_f64();
    eprintln!("  trained {label} seed {seed} in {secs:.0}s");
    Trained { prepared, outcome, secs }
}

fn test_pairs(p: &Prepared) -> Vec<(String, String)> {
    p.split
        .test
        .iter()
        .map(|&i| {
            let s = &p.corpus.submissions[i];
            (s.student_id.clone(), s.problem_id.clone())
        })
        .collect()
}

fn test_codebleu(t: &Trained) -> f64 {
    let p = &t.prepared;
    evaluate(&t.outcome.best, &p.data, SplitPart::Test, &p.split.test, CodeBleuWeights::default())
        .expect("evaluate")
        .codebleu
}

fn reduction() -> Line {
    let t = Instant::now();
    let mut info = config_file("desk.toml");
    info.knowledge = KnowledgeConfig::oirt(23);
    info.trainer.lambda = 0.0;
    info.trainer.epochs = 3;
    let mut oirt = config_file("oirt.toml");
    oirt.trainer.epochs = 3;
    let a = train(&info, 0, "reduction infooirt");
    let b = train(&oirt, 0, "reduction oirt");
    let (la, lb) = (&a.outcome.log.step_losses, &b.outcome.log.step_losses);
    let max_diff = la.iter().zip(lb).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let secs = t.elapsed().as_secs_f64();
    Line {
        id: 1,
        name: "OIRT reduction",
        pass: la.len() == lb.len() && !la.is_empty() && max_diff <= 1e-6 && secs < 300.0,
        detail: format!("{} steps, max |Δloss| {max_diff:.2e}, {secs:.0}s", la.len()),
    }
}

fn mutual_information(info: &[Trained], control: &[Trained]) -> Line {
    let last = |t: &Trained| *t.outcome.log.q_nll_series().last().unwrap();
    let qi = median(&info.iter().map(last).collect::<Vec<_>>());
    let qc = median(&control.iter().map(last).collect::<Vec<_>>());
    let rhos: Vec<f64> = info
        .iter()
        .map(|t| {
            let q = t.outcome.log.q_nll_series();
            let half = &q[..q.len().div_ceil(2)];
            let epochs: Vec<f64> = (0..half.len()).map(|e| e as f64).collect();
            spearman(&epochs, half).unwrap()
        })
        .collect();
    let rho = median(&rhos);
    let secs: f64 = info.iter().chain(control).map(|t| t.secs).sum();
    Line {
        id: 2,
        name: "mutual information",
        pass: qi <= 0.5 * qc && rho < -0.8 && secs < 3600.0,
        detail: format!(
            "median final q_nll {qi:.4} (λ=0.1) vs {qc:.4} (λ=0), ratio {:.4}; first-half Spearman ρ {rho:.3} (per seed {rhos:.3?}); {secs:.0}s",
            qi / qc
        ),
    }
}

fn recovery_scores(runs: &[Trained]) -> (f64, f64) {
    let mut ind = Vec::new();
    let mut nest = Vec::new();
    for t in runs {
        let r = factor_recovery(&t.outcome.best, &t.prepared.corpus.profiles).expect("recovery");
        ind.push(r.matched(StyleAttribute::Indentation).map_or(0.0, |m| m.accuracy));
        nest.push(r.matched(StyleAttribute::Nesting).map_or(0.0, |m| m.accuracy));
    }
    (median(&ind), median(&nest))
}

fn recovery(info: &[Trained], control: &[Trained]) -> Line {
    let students = info[0].prepared.corpus.profiles.len();
    let (ii, in_) = recovery_scores(info);
    let (ci, cn) = recovery_scores(control);
    Line {
        id: 3,
        name: "factor recovery",
        pass: students >= 40 && ii >= 0.8 && in_ >= 0.7 && ci < 0.65 && cn < 0.65,
        detail: format!(
            "{students} students; λ=0.1 indentation {ii:.3}, nesting {in_:.3}; λ=0 control indentation {ci:.3}, nesting {cn:.3}"
        ),
    }
}

fn competitive(info: &[Trained], oirt: &[Trained]) -> Line {
    let a = median(&info.iter().map(test_codebleu).collect::<Vec<_>>());
    let b = median(&oirt.iter().map(test_codebleu).collect::<Vec<_>>());
    Line {
        id: 4,
        name: "competitive generation",
        pass: a >= b - 0.05,
        detail: format!("median test CodeBLEU InfoOIRT {a:.4}, OIRT {b:.4}"),
    }
}

fn metric_oracles(p: &Prepared) -> Line {
    let t = Instant::now();
    let w = CodeBleuWeights::default();
    let mut identity_err: f64 = 0.0;
    let mut identity_n = 0;
    for &i in &p.split.test {
        let code = &p.corpus.submissions[i].code;
        if parse_mini_java(code).is_ok() {
            identity_err = identity_err.max((codebleu(code, code, w).unwrap().total - 1.0).abs());
            identity_n += 1;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut oracle_err: f64 = 0.0;
    for _ in 0..25 {
        let reference = common::random_statements(&mut rng, 8);
        let cand = common::random_candidate(&mut rng, 8);
        let r = codebleu(&cand, &reference, w).unwrap();
        let (c, rf) = (common::words(&cand), common::words(&reference));
        let expect = [
            common::bleu(&c, &rf, false),
            common::bleu(&c, &rf, true),
            common::ast_match(&cand, &reference),
            common::dataflow_match(&cand, &reference),
        ];
        let got = [r.ngram, r.weighted_ngram, r.ast_match, r.dataflow_match];
        for (g, e) in got.iter().zip(expect) {
            oracle_err = oracle_err.max((g - e).abs());
        }
    }
    let dist_err = [
        (dist_n(&["a b c"], 1).unwrap(), 1.0),
        (dist_n(&["a a a"], 1).unwrap(), 1.0 / 3.0),
        (dist_n(&["a b a b"], 2).unwrap(), 2.0 / 3.0),
    ]
    .iter()
    .map(|(g, e)| (g - e).abs())
    .fold(0.0, f64::max);
    let secs = t.elapsed().as_secs_f64();
    Line {
        id: 5,
        name: "metric oracles",
        pass: identity_n > 0 && identity_err <= 1e-9 && oracle_err <= 1e-9 && dist_err <= 1e-12 && secs < 60.0,
        detail: format!(
            "identity on {identity_n} test codes max err {identity_err:.1e}; 25 oracle pairs max err {oracle_err:.1e}; dist max err {dist_err:.1e}; {secs:.1}s"
        ),
    }
}

fn sample(cont: Vec<f64>, disc: Vec<Vec<f64>>) -> LatentSample {
    LatentSample {
        cont_values: cont,
        disc_relaxed: disc.clone(),
        disc_values: disc,
        differentiable: false,
        mode: SampleMode::Deterministic,
        temperature: 1.0,
        noise: None,
    }
}

fn analytic_losses() -> Line {
    let (n, v) = (37usize, 211usize);
    let targets: Vec<u32> = (0..n).map(|i| 1 + (i * 7 % (v - 1)) as u32).collect();
    let (sum, count) = oirt_loss(&Array2::zeros((n, v)), &targets).unwrap();
    let e1 = (sum - n as f64 * (v as f64).ln()).abs() + (count as f64 - n as f64).abs();
    let q = QPrediction {
        cont_mean: vec![],
        cont_log_sigma: vec![],
        disc_logits: vec![vec![0.0, 0.0]; 10],
    };
    let e2 = (info_nll(&q, &sample(vec![], vec![vec![0.0, 1.0]; 10])).unwrap() - 10.0 * 2f64.ln()).abs();
    let q = QPrediction {
        cont_mean: vec![0.37],
        cont_log_sigma: vec![0.0],
        disc_logits: vec![],
    };
    let e3 = (info_nll(&q, &sample(vec![0.37], vec![])).unwrap() - 0.5 * (2.0 * std::f64::consts::PI).ln()).abs();
    Line {
        id: 6,
        name: "analytic loss values",
        pass: e1 <= 1e-9 && e2 <= 1e-9 && e3 <= 1e-9,
        detail: format!("errors: N·ln V {e1:.1e}, d_disc·ln 2 {e2:.1e}, ½ln 2π {e3:.1e}"),
    }
}

fn gradients() -> Line {
    let mut errs = common::fd::check(ObjectiveKind::InfoOirt, common::fd::info_config(), 0.7);
    let groups = errs.len();
    errs.extend(common::fd::check(ObjectiveKind::Oirt, KnowledgeConfig::oirt(3), 0.0));
    let (worst, e) = errs
        .iter()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(n, e)| (n.clone(), *e))
        .unwrap();
    Line {
        id: 7,
        name: "gradient checks",
        pass: e <= 1e-3,
        detail: format!("{groups} InfoOIRT + {} OIRT tensors, worst relative error {e:.2e} ({worst})", errs.len() - groups),
    }
}

fn hash(ck: &Checkpoint) -> String {
    let bytes = ck.to_bytes().unwrap();
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn determinism() -> Line {
    let t = Instant::now();
    let mut config = config_file("desk.toml");
    config.trainer.epochs = 2;
    let a = train(&config, 7, "determinism");
    let b = train(&config, 7, "determinism");
    let same_ck = hash(&a.outcome.best) == hash(&b.outcome.best) && hash(&a.outcome.last) == hash(&b.outcome.last);
    let report = |t: &Trained| {
        let r = evaluate(&t.outcome.best, &t.prepared.data, SplitPart::Test, &t.prepared.split.test, CodeBleuWeights::default()).unwrap();
        serde_json::to_vec(&r).unwrap()
    };
    let same_report = report(&a) == report(&b);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ck");
    a.outcome.best.save(&path).unwrap();
    let reloaded = Trained {
        prepared: a.prepared.clone(),
        outcome: TrainOutcome {
            best: Checkpoint::load(&path).unwrap(),
            last: a.outcome.last.clone(),
            log: a.outcome.log.clone(),
        },
        secs: 0.0,
    };
    let same_reload = report(&a) == report(&reloaded);
    let ex = &a.prepared.data.examples[a.prepared.split.test[0]];
    let student = &a.prepared.corpus.submissions[ex.submission].student_id;
    let ids = |ck: &Checkpoint| generate_for(ck, student, &ex.problem, None).unwrap().ids;
    let first = ids(&a.outcome.best);
    let same_ids = (0..3).all(|_| ids(&a.outcome.best) == first) && ids(&reloaded.outcome.best) == first;
    let secs = t.elapsed().as_secs_f64();
    Line {
        id: 8,
        name: "determinism",
        pass: same_ck && same_report && same_reload && same_ids,
        detail: format!(
            "checkpoint hashes equal {same_ck}, reports equal {same_report}, reload equal {same_reload}, greedy ids repeat {same_ids}; {secs:.0}s"
        ),
    }
}

fn robustness(info: &[Trained]) -> Line {
    let mut unchanged = Vec::new();
    let mut parse = Vec::new();
    let mut pairs = 0;
    for t in info {
        let p = &t.prepared;
        let cfg = &p.corpus;
        let analysis = config_file("desk.toml").analysis;
        let ps = test_pairs(p);
        pairs += ps.len();
        let r = sweep_robustness(&t.outcome.best, &cfg.problems, &ps, &analysis.small_values, &analysis.extreme_values).expect("sweep");
        unchanged.push(r.unchanged_fraction);
        parse.push(r.extreme_parse_rate);
    }
    let (u, x) = (median(&unchanged), median(&parse));
    Line {
        id: 9,
        name: "continuous-sweep robustness",
        pass: u >= 0.7 && x >= 0.9,
        detail: format!("{pairs} test pairs over 3 seeds; median unchanged over {{−2, 0, 2}} {u:.3}; median parse rate at ±10 {x:.3}"),
    }
}

fn ingestion() -> Line {
    let dir = tempfile::tempdir().unwrap();
    let (path, bad) = common::fixtures::known_bad_rows(dir.path());
    let (_, subs, rep) = ingest_csedm(&path).unwrap();
    let bad_ok = rep.rows == 100
        && rep.first_attempts == 100
        && rep.dropped_unparseable == bad.len()
        && rep.retained == 100 - bad.len()
        && subs.len() == rep.retained
        && rep.drop_fraction == bad.len() as f64 / 100.0
        && subs.iter().all(|s| !bad.contains(&(s.student_id.clone(), s.problem_id.clone())));
    let (path, expected) = common::fixtures::duplicated_timestamps(dir.path());
    let (_, subs, _) = ingest_csedm(&path).unwrap();
    let mut got: Vec<(String, String, String)> = subs
        .into_iter()
        .map(|s| (s.student_id, s.problem_id, s.code))
        .collect();
    let mut expected = expected;
    got.sort();
    expected.sort();
    let ts_ok = got == expected;
    Line {
        id: 10,
        name: "ingestion filter",
        pass: bad_ok && ts_ok,
        detail: format!(
            "retained {}/{} with drop fraction {}; duplicated-timestamp fixture matches {ts_ok}",
            rep.retained, rep.rows, rep.drop_fraction
        ),
    }
}

fn main() {
    let start = Instant::now();
    let mut lines = vec![reduction()];

    let desk = config_file("desk.toml");
    let mut control = desk.clone();
    control.trainer.lambda = 0.0;
    let oirt = config_file("oirt.toml");
    let info: Vec<Trained> = SEEDS.iter().map(|&s| train(&desk, s, "λ=0.1")).collect();
    let ctrl: Vec<Trained> = SEEDS.iter().map(|&s| train(&control, s, "λ=0")).collect();
    let base: Vec<Trained> = SEEDS.iter().map(|&s| train(&oirt, s, "OIRT")).collect();

    lines.push(mutual_information(&info, &ctrl));
    lines.push(recovery(&info, &ctrl));
    lines.push(competitive(&info, &base));
    lines.push(metric_oracles(&info[0].prepared));
    lines.push(analytic_losses());
    lines.push(gradients());
    lines.push(determinism());
    lines.push(robustness(&info));
    lines.push(ingestion());

    lines.sort_by_key(|l| l.id);
    let failed = lines.iter().filter(|l| !l.pass).count();
    for l in &lines {
        println!("{} criterion {:>2} {}: {}", if l.pass { "PASS" } else { "FAIL" }, l.id, l.name, l.detail);
    }
    println!(
        "acceptance: {} passed, {failed} failed in {:.0}s",
        lines.len() - failed,
        start.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
