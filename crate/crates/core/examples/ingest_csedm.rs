//! Read a CSEDM-style CSV export, keeping each student's first parseable
//! attempt per problem.
//!
//! ```text
//! cargo run --release --example ingest_csedm -- [CSV] [MAPPING_TOML]
//! ```
//! Without arguments a small built-in export is used.

use std::path::PathBuf;

use infooirt::corpus::{ingest_csedm_with, ColumnMapping};

const DEMO: &str = "\
SubjectID,ProblemID,ServerTimestamp,Code
s1,p1,2019-02-01T10:05,\"public int f(int x) {\n    return x + 2;\n}\"
s1,p1,2019-02-01T10:00,\"public int f(int x) {\n    return x + 1;\n}\"
s2,p1,2019-02-01T11:00,\"public int f(int x) { return x * ; }\"
s2,p1,2019-02-01T11:10,\"public int f(int x) { return x * 2; }\"
s2,p2,2019-02-02T09:00,\"public boolean g(int n)\n{\n    return n > 3;\n}\"
";

fn main() -> infooirt::Result<()> {
    let mut args = std::env::args().skip(1);
    let (path, _tmp) = match args.next() {
        Some(p) => (PathBuf::from(p), None),
        None => {
            let dir = tempfile::tempdir()?;
            let p = dir.path().join("demo.csv");
            std::fs::write(&p, DEMO)?;
            (p, Some(dir))
        }
    };
    let mapping = match args.next() {
        Some(m) => ColumnMapping::load(m.as_ref())?,
        None => ColumnMapping::default(),
    };
    let (problems, submissions, report) = ingest_csedm_with(&path, &mapping)?;
    println!(
        "{} rows, {} first attempts, {} unparseable dropped ({:.1}%), {} retained over {} problems",
        report.rows,
        report.first_attempts,
        report.dropped_unparseable,
        100.0 * report.drop_fraction,
        report.retained,
        problems.len()
    );
    for s in submissions.iter().take(5) {
        println!("\n{} / {}:\n{}", s.student_id, s.problem_id, s.code);
    }
    Ok(())
}
