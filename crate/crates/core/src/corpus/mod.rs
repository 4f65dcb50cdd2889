//! Training data: the synthetic mini-Java corpus with ground-truth student
//! factors, CSEDM-format ingestion, and deterministic splits.

mod csedm;
mod render;
mod split;
mod synth;
mod templates;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub use csedm::{ingest_csedm, ingest_csedm_with, ColumnMapping, IngestReport};
pub use render::{render_method, Stmt};
pub use split::{split, CorpusSplit, SplitPart, SplitRatios};
pub use synth::{synth_generate, SynthSpec};
pub use templates::{Template, TEMPLATES};

use crate::error::{Error, Result};
use crate::metrics::{parse_mini_java, Node, NodeKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SkillTag {
    Conditional,
    Loop,
    String,
    Array,
}

impl SkillTag {
    pub const ALL: [SkillTag; 4] = [
        SkillTag::Conditional,
        SkillTag::Loop,
        SkillTag::String,
        SkillTag::Array,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum IndentationStyle {
    KnR,
    Allman,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NestingStyle {
    Nested,
    Flat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LoopStyle {
    For,
    While,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BugKind {
    OffByOne,
    WrongComparison,
    MissingElse,
    WrongConstant,
}

impl BugKind {
    pub const ALL: [BugKind; 4] = [
        BugKind::OffByOne,
        BugKind::WrongComparison,
        BugKind::MissingElse,
        BugKind::WrongConstant,
    ];
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Problem {
    pub problem_id: String,
    pub statement: String,
    pub skill_tag: SkillTag,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Submission {
    pub student_id: String,
    pub problem_id: String,
    pub code: String,
    pub is_first_attempt: bool,
    pub parses: bool,
    /// Ground-truth profile this submission was rendered from (synthetic only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile_ref: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub injected_bug: Option<BugKind>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudentProfile {
    pub student_id: String,
    pub indentation_style: IndentationStyle,
    pub nesting_style: NestingStyle,
    pub loop_style: LoopStyle,
    pub mastery: BTreeMap<SkillTag, f64>,
    pub bug_repertoire: Vec<BugKind>,
}

/// Binary ground-truth attributes used for factor recovery.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StyleAttribute {
    Indentation,
    Nesting,
    LoopStyle,
}

impl StyleAttribute {
    pub const ALL: [StyleAttribute; 3] = [
        StyleAttribute::Indentation,
        StyleAttribute::Nesting,
        StyleAttribute::LoopStyle,
    ];
}

impl std::fmt::Display for StyleAttribute {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            StyleAttribute::Indentation => "indentation",
            StyleAttribute::Nesting => "nesting",
            StyleAttribute::LoopStyle => "loop_style",
        })
    }
}

impl StudentProfile {
    /// The attribute as a class index: Allman, nested and while map to 1.
    pub fn attribute(&self, a: StyleAttribute) -> usize {
        match a {
            StyleAttribute::Indentation => usize::from(self.indentation_style == IndentationStyle::Allman),
            StyleAttribute::Nesting => usize::from(self.nesting_style == NestingStyle::Nested),
            StyleAttribute::LoopStyle => usize::from(self.loop_style == LoopStyle::While),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub problems: Vec<Problem>,
    pub submissions: Vec<Submission>,
    pub profiles: Vec<StudentProfile>,
}

impl Corpus {
    pub fn problem(&self, id: &str) -> Option<&Problem> {
        self.problems.iter().find(|p| p.problem_id == id)
    }

    pub fn student_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.submissions.iter().map(|s| s.student_id.clone()).collect();
        ids.sort();
        ids.dedup();
        ids
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        write_jsonl(&dir.join("problems.jsonl"), &self.problems)?;
        write_jsonl(&dir.join("submissions.jsonl"), &self.submissions)?;
        if !self.profiles.is_empty() {
            write_jsonl(&dir.join("profiles.jsonl"), &self.profiles)?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Corpus> {
        let profiles_path = dir.join("profiles.jsonl");
        Ok(Corpus {
            problems: read_jsonl(&dir.join("problems.jsonl"))?,
            submissions: read_jsonl(&dir.join("submissions.jsonl"))?,
            profiles: if profiles_path.exists() {
                read_jsonl(&profiles_path)?
            } else {
                Vec::new()
            },
        })
    }
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for it in items {
        serde_json::to_writer(&mut w, it)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let r = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Ingest {
            row: i + 1,
            message: format!("{}: {e}", path.display()),
        })?);
    }
    Ok(out)
}

/// Brace style by majority of opening braces: own line (Allman) versus end
/// of a line with other content (K&R). `None` when the code has no braces.
pub fn classify_indentation(code: &str) -> Option<IndentationStyle> {
    let (mut own, mut trailing) = (0usize, 0usize);
    for l in code.lines() {
        let t = l.trim();
        if t == "{" {
            own += 1;
        } else if t.ends_with('{') {
            trailing += 1;
        }
    }
    match (own, trailing) {
        (0, 0) => None,
        (o, t) if o > t => Some(IndentationStyle::Allman),
        _ => Some(IndentationStyle::KnR),
    }
}

fn has_nested_if(n: &Node) -> bool {
    fn contains_if(n: &Node) -> bool {
        match n.kind {
            NodeKind::If => true,
            NodeKind::Block => n.children.iter().any(contains_if),
            _ => false,
        }
    }
    if n.kind == NodeKind::If {
        let then_nested = contains_if(&n.children[1]);
        // `else if` chains are flat; an if inside an else block is nesting
        let else_nested = n
            .children
            .get(2)
            .is_some_and(|e| e.kind == NodeKind::Block && e.children.iter().any(contains_if));
        if then_nested || else_nested {
            return true;
        }
    }
    n.children.iter().any(has_nested_if)
}

/// Whether any `if` sits inside another `if`'s branch (else-if chains are
/// flat). `None` for unparseable code or code without conditionals.
pub fn classify_nesting(code: &str) -> Option<NestingStyle> {
    let ast = parse_mini_java(code).ok()?;
    let mut any_if = false;
    ast.root.walk(&mut |n| any_if |= n.kind == NodeKind::If);
    if !any_if {
        return None;
    }
    Some(if has_nested_if(&ast.root) {
        NestingStyle::Nested
    } else {
        NestingStyle::Flat
    })
}

pub fn classify_loop(code: &str) -> Option<LoopStyle> {
    let ast = parse_mini_java(code).ok()?;
    let (mut fors, mut whiles) = (0, 0);
    ast.root.walk(&mut |n| match n.kind {
        NodeKind::For => fors += 1,
        NodeKind::While => whiles += 1,
        _ => {}
    });
    match (fors, whiles) {
        (0, 0) => None,
        (f, w) if f >= w => Some(LoopStyle::For),
        _ => Some(LoopStyle::While),
    }
}

/// Keep each student's first submission per problem; later ones are marked
/// `is_first_attempt = false` and dropped. Input order decides.
pub fn first_attempts(subs: &[Submission]) -> Vec<Submission> {
    let mut seen = std::collections::BTreeSet::new();
    subs.iter()
        .filter(|s| s.is_first_attempt)
        .filter(|s| seen.insert((s.student_id.clone(), s.problem_id.clone())))
        .cloned()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_attempt_filter_is_idempotent() {
        let mk = |s: &str, p: &str, c: &str| Submission {
            student_id: s.into(),
            problem_id: p.into(),
            code: c.into(),
            is_first_attempt: true,
            parses: true,
            profile_ref: None,
            injected_bug: None,
        };
        let subs = vec![mk("a", "1", "x;"), mk("a", "1", "y;"), mk("b", "1", "z;")];
        let once = first_attempts(&subs);
        assert_eq!(once.len(), 2);
        assert_eq!(once[0].code, "x;");
        assert_eq!(first_attempts(&once), once);
    }

    #[test]
    fn classifiers_on_hand_written_code() {
        let knr = "public int f(int x) {\n    if (x > 0) {\n        if (x > 5) {\n            return 2;\n        }\n    }\n    return 0;\n}";
        assert_eq!(classify_indentation(knr), Some(IndentationStyle::KnR));
        assert_eq!(classify_nesting(knr), Some(NestingStyle::Nested));
        let allman = "public int f(int x)\n{\n    if (x > 0)\n    {\n        return 1;\n    }\n    else if (x < 0)\n    {\n        return 2;\n    }\n    return 0;\n}";
        assert_eq!(classify_indentation(allman), Some(IndentationStyle::Allman));
        assert_eq!(classify_nesting(allman), Some(NestingStyle::Flat));
        assert_eq!(classify_loop(allman), None);
        assert_eq!(classify_loop("int i = 0; while (i < 3) { i++; }"), Some(LoopStyle::While));
        assert_eq!(classify_indentation("return 1;"), None);
    }
}
