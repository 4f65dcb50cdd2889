//! Ingestion of CSEDM-style submission logs (one row per code state).

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Problem, SkillTag, Submission};
use crate::error::{Error, Result};
use crate::metrics::parse_mini_java;

/// Column names and delimiter of the input table. Defaults follow the
/// public CSEDM challenge schema with code states joined inline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ColumnMapping {
    pub student_id: String,
    pub problem_id: String,
    pub timestamp: String,
    pub code: String,
    /// Optional column holding the problem prompt.
    pub statement: Option<String>,
    pub delimiter: char,
}

impl Default for ColumnMapping {
    fn default() -> Self {
        ColumnMapping {
            student_id: "SubjectID".into(),
            problem_id: "ProblemID".into(),
            timestamp: "ServerTimestamp".into(),
            code: "Code".into(),
            statement: None,
            delimiter: ',',
        }
    }
}

impl ColumnMapping {
    pub fn load(path: &Path) -> Result<ColumnMapping> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub rows: usize,
    pub first_attempts: usize,
    pub dropped_unparseable: usize,
    pub retained: usize,
    /// `dropped_unparseable / first_attempts`.
    pub drop_fraction: f64,
}

struct Row {
    student: String,
    problem: String,
    timestamp: String,
    code: String,
    statement: Option<String>,
}

fn timestamp_cmp(a: &str, b: &str) -> Ordering {
    match (a.trim().parse::<f64>(), b.trim().parse::<f64>()) {
        (Ok(x), Ok(y)) => x.total_cmp(&y),
        _ => a.trim().cmp(b.trim()),
    }
}

fn infer_skill(code: &str) -> SkillTag {
    if code.contains("charAt") || code.contains("substring") || code.contains("String") {
        SkillTag::String
    } else if code.contains('[') {
        SkillTag::Array
    } else if code.contains("for") || code.contains("while") {
        SkillTag::Loop
    } else {
        SkillTag::Conditional
    }
}

pub fn ingest_csedm(path: &Path) -> Result<(Vec<Problem>, Vec<Submission>, IngestReport)> {
    ingest_csedm_with(path, &ColumnMapping::default())
}

/// Keep each student's earliest submission per problem (ties by file
/// order), then drop the ones the mini-Java parser rejects.
pub fn ingest_csedm_with(
    path: &Path,
    mapping: &ColumnMapping,
) -> Result<(Vec<Problem>, Vec<Submission>, IngestReport)> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(u8::try_from(mapping.delimiter).map_err(|_| {
            Error::Config(format!("delimiter {:?} is not a single byte", mapping.delimiter))
        })?)
        .from_path(path)?;
    let headers = reader.headers()?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Ingest {
                row: 1,
                message: format!("missing column {name:?}"),
            })
    };
    let (cs, cp, ct, cc) = (
        column(&mapping.student_id)?,
        column(&mapping.problem_id)?,
        column(&mapping.timestamp)?,
        column(&mapping.code)?,
    );
    let cstmt = mapping.statement.as_deref().map(column).transpose()?;

    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        // header is row 1
        let row = i + 2;
        let rec = rec.map_err(|e| Error::Ingest {
            row,
            message: e.to_string(),
        })?;
        let field = |c: usize| {
            rec.get(c).map(str::to_string).ok_or_else(|| Error::Ingest {
                row,
                message: format!("row has {} fields, column {} missing", rec.len(), c + 1),
            })
        };
        let r = Row {
            student: field(cs)?,
            problem: field(cp)?,
            timestamp: field(ct)?,
            code: field(cc)?,
            statement: cstmt.map(field).transpose()?,
        };
        if r.student.trim().is_empty() || r.problem.trim().is_empty() {
            return Err(Error::Ingest {
                row,
                message: "empty student or problem id".into(),
            });
        }
        rows.push(r);
    }
    let n_rows = rows.len();

    let mut earliest: BTreeMap<(String, String), usize> = BTreeMap::new();
    for (i, r) in rows.iter().enumerate() {
        let key = (r.student.clone(), r.problem.clone());
        match earliest.get(&key) {
            Some(&j) if timestamp_cmp(&rows[j].timestamp, &r.timestamp) != Ordering::Greater => {}
            _ => {
                earliest.insert(key, i);
            }
        }
    }
    let mut firsts: Vec<usize> = earliest.into_values().collect();
    firsts.sort_unstable();

    let mut submissions = Vec::new();
    let mut problems: BTreeMap<String, Problem> = BTreeMap::new();
    for &i in &firsts {
        let r = &rows[i];
        let parses = !r.code.trim().is_empty() && parse_mini_java(&r.code).is_ok();
        if !parses {
            continue;
        }
        problems.entry(r.problem.clone()).or_insert_with(|| Problem {
            problem_id: r.problem.clone(),
            statement: r
                .statement
                .clone()
                .filter(|s| !s.trim().is_empty())
                .unwrap_or_else(|| format!("Problem {}", r.problem)),
            skill_tag: infer_skill(&r.code),
        });
        submissions.push(Submission {
            student_id: r.student.clone(),
            problem_id: r.problem.clone(),
            code: r.code.clone(),
            is_first_attempt: true,
            parses: true,
            profile_ref: None,
            injected_bug: None,
        });
    }
    if submissions.is_empty() {
        return Err(Error::IngestEmpty(format!(
            "{}: no parseable first attempts among {n_rows} rows",
            path.display()
        )));
    }
    let dropped = firsts.len() - submissions.len();
    let report = IngestReport {
        rows: n_rows,
        first_attempts: firsts.len(),
        dropped_unparseable: dropped,
        retained: submissions.len(),
        drop_fraction: dropped as f64 / firsts.len() as f64,
    };
    Ok((problems.into_values().collect(), submissions, report))
}
