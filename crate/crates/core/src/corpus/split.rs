use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Submission;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitRatios {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios {
            train: 0.8,
            validation: 0.1,
            test: 0.1,
        }
    }
}

impl SplitRatios {
    pub fn validate(&self) -> Result<()> {
        let r = [self.train, self.validation, self.test];
        if r.iter().any(|&x| !(x > 0.0)) {
            return Err(Error::Config(format!("split ratios must be positive, got {r:?}")));
        }
        if (r.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("split ratios must sum to 1, got {r:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitPart {
    Train,
    Validation,
    Test,
}

impl SplitPart {
    pub const ALL: [SplitPart; 3] = [SplitPart::Train, SplitPart::Validation, SplitPart::Test];

    pub fn name(self) -> &'static str {
        match self {
            SplitPart::Train => "train",
            SplitPart::Validation => "validation",
            SplitPart::Test => "test",
        }
    }
}

impl fmt::Display for SplitPart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SplitPart {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(SplitPart::Train),
            "validation" | "val" => Ok(SplitPart::Validation),
            "test" => Ok(SplitPart::Test),
            _ => Err(Error::InvalidArgument(format!("unknown split {s:?}"))),
        }
    }
}

/// Indices into the submission list the split was built from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusSplit {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
}

impl CorpusSplit {
    pub fn part(&self, p: SplitPart) -> &[usize] {
        match p {
            SplitPart::Train => &self.train,
            SplitPart::Validation => &self.validation,
            SplitPart::Test => &self.test,
        }
    }

    pub fn select<'a>(&self, p: SplitPart, subs: &'a [Submission]) -> Vec<&'a Submission> {
        self.part(p).iter().map(|&i| &subs[i]).collect()
    }

    /// Writes `train.ids`, `validation.ids`, `test.ids`, one
    /// `student_id<TAB>problem_id` per line.
    pub fn write_manifests(&self, dir: &Path, subs: &[Submission]) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for p in SplitPart::ALL {
            let mut text = String::new();
            for s in self.select(p, subs) {
                text.push_str(&format!("{}\t{}\n", s.student_id, s.problem_id));
            }
            std::fs::write(dir.join(format!("{p}.ids")), text)?;
        }
        Ok(())
    }

    pub fn read_manifests(dir: &Path, subs: &[Submission], seed: u64) -> Result<CorpusSplit> {
        let index: BTreeMap<(&str, &str), usize> = subs
            .iter()
            .enumerate()
            .map(|(i, s)| ((s.student_id.as_str(), s.problem_id.as_str()), i))
            .collect();
        let mut parts = Vec::new();
        for p in SplitPart::ALL {
            let path = dir.join(format!("{p}.ids"));
            let text = std::fs::read_to_string(&path)?;
            let mut ids = Vec::new();
            for (n, l) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
                let (s, q) = l.split_once('\t').ok_or_else(|| Error::Ingest {
                    row: n + 1,
                    message: format!("{}: expected student<TAB>problem", path.display()),
                })?;
                ids.push(*index.get(&(s, q)).ok_or_else(|| Error::Ingest {
                    row: n + 1,
                    message: format!("{}: unknown submission {s}/{q}", path.display()),
                })?);
            }
            parts.push(ids);
        }
        let test = parts.pop().unwrap_or_default();
        let validation = parts.pop().unwrap_or_default();
        let train = parts.pop().unwrap_or_default();
        Ok(CorpusSplit {
            train,
            validation,
            test,
            seed,
        })
    }
}

/// Per-student stratified split. Held-out quotas are allocated from running
/// corpus-wide totals so overall sizes track the ratios; every student keeps
/// at least one training submission, and students with fewer than three
/// submissions go entirely to train.
pub fn split(subs: &[Submission], ratios: SplitRatios, seed: u64) -> Result<CorpusSplit> {
    ratios.validate()?;
    let mut by_student: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, s) in subs.iter().enumerate() {
        by_student.entry(&s.student_id).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = CorpusSplit {
        train: Vec::new(),
        validation: Vec::new(),
        test: Vec::new(),
        seed,
    };
    let mut seen = 0usize;
    for idx in by_student.values_mut() {
        // order inside a student is fixed by content, not input position
        idx.sort_by(|&a, &b| {
            (&subs[a].problem_id, &subs[a].code).cmp(&(&subs[b].problem_id, &subs[b].code))
        });
        idx.shuffle(&mut rng);
        seen += idx.len();
        if idx.len() < 3 {
            out.train.extend_from_slice(idx);
            continue;
        }
        let quota = |r: f64, have: usize| ((seen as f64 * r).round() as usize).saturating_sub(have);
        let room = idx.len() - 1;
        let n_val = quota(ratios.validation, out.validation.len()).min(room);
        let n_test = quota(ratios.test, out.test.len()).min(room - n_val);
        out.validation.extend_from_slice(&idx[..n_val]);
        out.test.extend_from_slice(&idx[n_val..n_val + n_test]);
        out.train.extend_from_slice(&idx[n_val + n_test..]);
    }
    out.train.sort_unstable();
    out.validation.sort_unstable();
    out.test.sort_unstable();
    Ok(out)
}
