//! The command line: exit codes, run directories and config echo.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const TINY: &str = "\
seed = 3

[corpus]
n_students = 4
n_problems = 3

[generator]
d_model = 16
n_layers = 1
n_heads = 2
max_len = 192

[trainer]
epochs = 1
lr_generator = 3e-3
lr_side = 1e-2
";

fn run(runs: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_infooirt"))
        .arg("--runs")
        .arg(runs)
        .args(args)
        .output()
        .unwrap()
}

/// The run directory printed on the last stdout line.
fn run_dir(out: &Output) -> PathBuf {
    let text = String::from_utf8_lossy(&out.stdout);
    PathBuf::from(text.lines().last().expect("run directory").trim())
}

fn ok(out: Output) -> Output {
    assert!(
        out.status.success(),
        "{}\n{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(dir.path(), &["synth", "--bogus"]).status.code(), Some(2));
    // seeds are mandatory
    let out = run(dir.path(), &["synth"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed"));
}

#[test]
fn module_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[trainer]\nlamda = 0.1\n").unwrap();
    let out = run(dir.path(), &["synth", "--config", cfg.to_str().unwrap(), "--seed", "1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error[config]"));
    let out = run(dir.path(), &["ingest", "--seed", "1", "--input", "/nonexistent.csv"]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(dir.path(), &["eval", "--checkpoint", "/nonexistent/checkpoint.ckpt"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn synth_writes_corpus_and_resolved_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(run(dir.path(), &["synth", "--seed", "9"]));
    let rd = run_dir(&out);
    assert!(rd.file_name().unwrap().to_string_lossy().ends_with("-seed9"));
    assert!(rd.join("corpus/submissions.jsonl").is_file());
    assert!(rd.join("split/test.ids").is_file());
    let echoed = infooirt::config::RunConfig::load(&rd.join("config.toml")).unwrap();
    assert_eq!(echoed.seed, Some(9));
    assert!(String::from_utf8_lossy(&out.stdout).contains("40 students"));
}

#[test]
fn train_eval_sweep_recover_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tiny.toml");
    std::fs::write(&cfg, TINY).unwrap();
    let cfg = cfg.to_str().unwrap();

    let a = run_dir(&ok(run(dir.path(), &["train", "--config", cfg])));
    let b = run_dir(&ok(run(dir.path(), &["train", "--config", cfg])));
    assert_ne!(a, b);
    let bytes = |d: &Path| std::fs::read(d.join("checkpoint.ckpt")).unwrap();
    assert_eq!(bytes(&a), bytes(&b));
    assert!(a.join("train_log.jsonl").is_file() && a.join("last.ckpt").is_file());

    let ck = a.join("checkpoint.ckpt");
    let ck = ck.to_str().unwrap();
    let e = run_dir(&ok(run(dir.path(), &["eval", "--checkpoint", ck, "--split", "test"])));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(e.join("eval_test.json")).unwrap()).unwrap();
    for field in ["codebleu", "test_loss", "dist_1", "dist_2", "dist_3"] {
        assert!(report[field].is_number(), "{field}");
    }
    assert!(e.join("config.toml").is_file());

    let corpus = infooirt::corpus::Corpus::load(&a.join("corpus")).unwrap();
    let (s, p) = (&corpus.submissions[0].student_id, &corpus.submissions[0].problem_id);
    let sw = run_dir(&ok(run(dir.path(), &["sweep", "--checkpoint", ck, "--student", s, "--problem", p, "--factor", "9"])));
    let md = std::fs::read_to_string(sw.join("sweep.md")).unwrap();
    assert!(md.contains("disc[9] = 0") && md.contains("disc[9] = 1"), "{md}");
    ok(run(dir.path(), &["sweep", "--checkpoint", ck, "--student", s, "--problem", p, "--values", "-2,0,2"]));
    let out = run(dir.path(), &["sweep", "--checkpoint", ck, "--student", "ghost", "--problem", p, "--factor", "0"]);
    assert_eq!(out.status.code(), Some(1));

    ok(run(dir.path(), &["recover", "--checkpoint", ck]));
    let mc = run_dir(&ok(run(dir.path(), &["mi-curve", a.to_str().unwrap(), b.to_str().unwrap()])));
    assert!(mc.read_dir().unwrap().any(|f| f.unwrap().path().extension().is_some_and(|x| x == "svg")));
    ok(run(dir.path(), &["report", "--run", a.to_str().unwrap()]));
}
