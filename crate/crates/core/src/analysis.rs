//! Interpretability studies on a trained checkpoint: discrete factor flips,
//! continuous sweeps, Q-likelihood curves and ground-truth factor recovery.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use similar::{capture_diff_slices, Algorithm, DiffTag};

use crate::checkpoint::Checkpoint;
use crate::corpus::{Corpus, Problem, StudentProfile, StyleAttribute};
use crate::error::{Error, Result};
use crate::knowledge::{LatentSample, SampleMode};
use crate::metrics::{codebleu, parse_mini_java, CodeBleuWeights};
use crate::tokenizer::{canonicalize, split};
use crate::trainer::{generate_for, ObjectiveKind, TrainLog};

/// Continuous values swept when none are given.
pub const DEFAULT_SWEEP: [f64; 9] = [-10.0, -5.0, -3.5, -2.0, 0.0, 2.0, 3.5, 5.0, 10.0];

/// One full latent configuration used for a generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentSetting {
    pub label: String,
    pub cont: Vec<f64>,
    pub disc: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DiffKind {
    Equal,
    Delete,
    Insert,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiffChunk {
    pub kind: DiffKind,
    pub tokens: Vec<String>,
}

/// Token-level diff of `a` against `b`.
pub fn token_diff(a: &str, b: &str) -> Vec<DiffChunk> {
    let ta = split(a);
    let tb = split(b);
    let mut out = Vec::new();
    for op in capture_diff_slices(Algorithm::Myers, &ta, &tb) {
        let (tag, ra, rb) = op.as_tag_tuple();
        let mut push = |kind, tokens: &[String]| {
            if !tokens.is_empty() {
                out.push(DiffChunk {
                    kind,
                    tokens: tokens.to_vec(),
                })
            }
        };
        match tag {
            DiffTag::Equal => push(DiffKind::Equal, &ta[ra]),
            DiffTag::Delete => push(DiffKind::Delete, &ta[ra]),
            DiffTag::Insert => push(DiffKind::Insert, &tb[rb]),
            DiffTag::Replace => {
                push(DiffKind::Delete, &ta[ra]);
                push(DiffKind::Insert, &tb[rb]);
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NearestProblem {
    pub problem_id: String,
    pub codebleu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub student_id: String,
    pub problem_id: String,
    pub settings: Vec<LatentSetting>,
    pub codes: Vec<String>,
    /// Between consecutive settings.
    pub diffs: Vec<Vec<DiffChunk>>,
    pub changed: Vec<bool>,
    pub parses: Vec<bool>,
    /// Filled by [`annotate_nearest`].
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub nearest: Vec<NearestProblem>,
}

impl SweepResult {
    /// Whether every generation is token-identical to the first.
    pub fn unchanged(&self) -> bool {
        self.changed.iter().all(|c| !c)
    }

    /// Code panes side by side, one column per setting.
    pub fn side_by_side(&self) -> String {
        let columns: Vec<Vec<&str>> = self.codes.iter().map(|c| c.lines().collect()).collect();
        let widths: Vec<usize> = self
            .settings
            .iter()
            .zip(&columns)
            .map(|(s, c)| c.iter().map(|l| l.chars().count()).chain([s.label.chars().count()]).max().unwrap_or(0))
            .collect();
        let rows = columns.iter().map(Vec::len).max().unwrap_or(0);
        let mut out = String::new();
        let line = |cells: Vec<&str>, out: &mut String| {
            let padded: Vec<String> = cells
                .iter()
                .zip(&widths)
                .map(|(c, w)| format!("{c}{}", " ".repeat(w - c.chars().count())))
                .collect();
            let _ = writeln!(out, "{}", padded.join(" | ").trim_end());
        };
        line(self.settings.iter().map(|s| s.label.as_str()).collect(), &mut out);
        let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
        let _ = writeln!(out, "{}", rule.join("-+-"));
        for r in 0..rows {
            line(columns.iter().map(|c| c.get(r).copied().unwrap_or("")).collect(), &mut out);
        }
        out
    }

    pub fn markdown(&self) -> String {
        let mut out = format!("### Student {} / problem {}\n\n", self.student_id, self.problem_id);
        let _ = writeln!(out, "```\n{}```\n", self.side_by_side());
        for (i, changed) in self.changed.iter().enumerate() {
            let (a, b) = (&self.settings[i].label, &self.settings[i + 1].label);
            if !changed {
                let _ = writeln!(out, "- {a} → {b}: unchanged");
                continue;
            }
            let edits: Vec<String> = self.diffs[i]
                .iter()
                .filter(|d| d.kind != DiffKind::Equal)
                .map(|d| {
                    let sign = if d.kind == DiffKind::Delete { '-' } else { '+' };
                    format!("{sign}`{}`", d.tokens.join(" ").replace('\n', "⏎"))
                })
                .collect();
            let _ = writeln!(out, "- {a} → {b}: {}", edits.join(" "));
        }
        for (s, n) in self.settings.iter().zip(&self.nearest) {
            let _ = writeln!(out, "- nearest reference for {}: {} ({:.3})", s.label, n.problem_id, n.codebleu);
        }
        out
    }
}

fn problem_of<'a>(problems: &'a [Problem], id: &str) -> Result<&'a Problem> {
    problems
        .iter()
        .find(|p| p.problem_id == id)
        .ok_or_else(|| Error::UnknownProblem(id.to_string()))
}

fn require_factors(ck: &Checkpoint) -> Result<()> {
    if ck.config.objective == ObjectiveKind::Oirt {
        return Err(Error::InvalidArgument("an OIRT checkpoint has no interpretable factors".into()));
    }
    Ok(())
}

fn sweep(ck: &Checkpoint, problems: &[Problem], student: &str, problem_id: &str, settings: Vec<LatentSetting>) -> Result<SweepResult> {
    let problem = problem_of(problems, problem_id)?;
    let tokens = ck.vocab.encode(&problem.statement);
    let k = ck.store.config.k;
    let mut codes = Vec::with_capacity(settings.len());
    let mut ids = Vec::with_capacity(settings.len());
    for s in &settings {
        let disc = s
            .disc
            .iter()
            .map(|&c| (0..k).map(|j| if j == c { 1.0 } else { 0.0 }).collect())
            .collect::<Vec<Vec<f64>>>();
        let sample = LatentSample {
            cont_values: s.cont.clone(),
            disc_relaxed: disc.clone(),
            disc_values: disc,
            differentiable: false,
            mode: SampleMode::Deterministic,
            temperature: 1.0,
            noise: None,
        };
        let g = generate_for(ck, student, &tokens, Some(&sample))?;
        codes.push(ck.vocab.decode(&g.ids)?);
        ids.push(g.ids);
    }
    let diffs = codes.windows(2).map(|w| token_diff(&w[0], &w[1])).collect();
    let changed = ids.windows(2).map(|w| w[0] != w[1]).collect();
    let parses = codes.iter().map(|c| parse_mini_java(c).is_ok()).collect();
    Ok(SweepResult {
        student_id: student.to_string(),
        problem_id: problem_id.to_string(),
        settings,
        codes,
        diffs,
        changed,
        parses,
        nearest: Vec::new(),
    })
}

fn learned_setting(ck: &Checkpoint, student: &str, label: String) -> Result<LatentSetting> {
    let state = ck.store.state_of(student)?;
    let c = state.config;
    Ok(LatentSetting {
        label,
        cont: (0..c.d_cont).map(|i| state.mu(i)).collect(),
        disc: (0..c.d_disc).map(|i| state.learned_class(i)).collect(),
    })
}

/// Generate with discrete factor `factor` forced to each class in turn, the
/// rest of the state at its learned values.
pub fn sweep_discrete(ck: &Checkpoint, problems: &[Problem], student: &str, problem_id: &str, factor: usize) -> Result<SweepResult> {
    require_factors(ck)?;
    let d_disc = ck.store.config.d_disc;
    if factor >= d_disc {
        return Err(Error::InvalidArgument(format!("factor {factor} out of range for {d_disc} discrete factors")));
    }
    let base = learned_setting(ck, student, String::new())?;
    let settings = (0..ck.store.config.k)
        .map(|class| {
            let mut s = base.clone();
            s.disc[factor] = class;
            s.label = format!("disc[{factor}] = {class}");
            s
        })
        .collect();
    sweep(ck, problems, student, problem_id, settings)
}

/// Generate with the first continuous factor set to each value.
pub fn sweep_continuous(ck: &Checkpoint, problems: &[Problem], student: &str, problem_id: &str, values: &[f64]) -> Result<SweepResult> {
    require_factors(ck)?;
    if ck.store.config.d_cont == 0 {
        return Err(Error::InvalidArgument("the checkpoint has no continuous factor".into()));
    }
    if values.is_empty() {
        return Err(Error::InvalidArgument("no sweep values given".into()));
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!("sweep value {v} is not finite")));
    }
    let base = learned_setting(ck, student, String::new())?;
    let settings = values
        .iter()
        .map(|&v| {
            let mut s = base.clone();
            s.cont[0] = v;
            s.label = format!("cont = {v}");
            s
        })
        .collect();
    sweep(ck, problems, student, problem_id, settings)
}

/// For each generated code, the problem whose reference submission is most
/// similar by CodeBLEU. Descriptive only.
pub fn annotate_nearest(result: &mut SweepResult, corpus: &Corpus, weights: CodeBleuWeights) -> Result<()> {
    let refs: Vec<(&str, String)> = corpus
        .submissions
        .iter()
        .map(|s| (s.problem_id.as_str(), canonicalize(&s.code)))
        .collect();
    if refs.is_empty() {
        return Err(Error::InvalidArgument("corpus has no reference code".into()));
    }
    result.nearest = result
        .codes
        .iter()
        .map(|code| {
            let mut best = NearestProblem {
                problem_id: String::new(),
                codebleu: f64::NEG_INFINITY,
            };
            for (pid, r) in &refs {
                let score = codebleu(code, r, weights)?.total;
                if score > best.codebleu {
                    best = NearestProblem {
                        problem_id: pid.to_string(),
                        codebleu: score,
                    };
                }
            }
            Ok(best)
        })
        .collect::<Result<_>>()?;
    Ok(())
}

/// Continuous-sweep behavior over many (student, problem) pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRobustness {
    pub pairs: usize,
    pub small_values: Vec<f64>,
    pub extreme_values: Vec<f64>,
    /// Pairs whose generation is identical across all small values.
    pub unchanged_fraction: f64,
    /// Share of generations at the extreme values that parse.
    pub extreme_parse_rate: f64,
}

pub fn sweep_robustness(
    ck: &Checkpoint,
    problems: &[Problem],
    pairs: &[(String, String)],
    small: &[f64],
    extreme: &[f64],
) -> Result<SweepRobustness> {
    if pairs.is_empty() {
        return Err(Error::InvalidArgument("no (student, problem) pairs".into()));
    }
    let mut unchanged = 0usize;
    let mut parsed = 0usize;
    let mut generated = 0usize;
    for (student, problem) in pairs {
        if sweep_continuous(ck, problems, student, problem, small)?.unchanged() {
            unchanged += 1;
        }
        let ext = sweep_continuous(ck, problems, student, problem, extreme)?;
        parsed += ext.parses.iter().filter(|p| **p).count();
        generated += ext.parses.len();
    }
    Ok(SweepRobustness {
        pairs: pairs.len(),
        small_values: small.to_vec(),
        extreme_values: extreme.to_vec(),
        unchanged_fraction: unchanged as f64 / pairs.len() as f64,
        extreme_parse_rate: parsed as f64 / generated as f64,
    })
}

/// Share of pairs where flipping `factor` switches the rule-classified style
/// of the generated code.
pub fn flip_rate<T: PartialEq>(
    ck: &Checkpoint,
    problems: &[Problem],
    pairs: &[(String, String)],
    factor: usize,
    classify: impl Fn(&str) -> Option<T>,
) -> Result<f64> {
    let mut considered = 0usize;
    let mut flipped = 0usize;
    for (student, problem) in pairs {
        let r = sweep_discrete(ck, problems, student, problem, factor)?;
        let styles: Vec<Option<T>> = r.codes.iter().map(|c| classify(c)).collect();
        if styles.iter().all(Option::is_some) {
            considered += 1;
            if styles.windows(2).any(|w| w[0] != w[1]) {
                flipped += 1;
            }
        }
    }
    if considered == 0 {
        return Err(Error::InvalidArgument("no generation could be classified".into()));
    }
    Ok(flipped as f64 / considered as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiSeries {
    pub label: String,
    pub q_nll: Vec<f64>,
}

/// Per-epoch Q negative log-likelihood of one or more runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiCurve {
    pub epochs: usize,
    pub series: Vec<MiSeries>,
}

pub fn mi_curve(logs: &[(String, TrainLog)]) -> Result<MiCurve> {
    let Some((_, first)) = logs.first() else {
        return Err(Error::InvalidArgument("no training logs given".into()));
    };
    let epochs = first.epochs.len();
    if epochs == 0 {
        return Err(Error::InvalidArgument("training log has no epochs".into()));
    }
    let mut series = Vec::with_capacity(logs.len());
    for (label, log) in logs {
        if log.epochs.len() != epochs {
            return Err(Error::InvalidArgument(format!(
                "log {label} has {} epochs, expected {epochs}",
                log.epochs.len()
            )));
        }
        series.push(MiSeries {
            label: label.clone(),
            q_nll: log.q_nll_series(),
        });
    }
    Ok(MiCurve { epochs, series })
}

impl MiCurve {
    pub fn table(&self) -> String {
        let mut out = String::from("| epoch |");
        for s in &self.series {
            let _ = write!(out, " {} |", s.label);
        }
        out.push_str("\n|---|");
        out.push_str(&"---|".repeat(self.series.len()));
        for e in 0..self.epochs {
            let _ = write!(out, "\n| {e} |");
            for s in &self.series {
                let _ = write!(out, " {:.4} |", s.q_nll[e]);
            }
        }
        out.push('\n');
        out
    }

    /// Line plot of every series against epoch.
    pub fn svg(&self) -> String {
        const W: f64 = 640.0;
        const H: f64 = 400.0;
        const M: f64 = 50.0;
        const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];
        let values = self.series.iter().flat_map(|s| s.q_nll.iter().copied()).filter(|v| v.is_finite());
        let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        let (lo, hi) = if lo < hi { (lo, hi) } else { (lo - 1.0, lo + 1.0) };
        let x = |e: usize| M + (W - 2.0 * M) * e as f64 / (self.epochs.max(2) - 1) as f64;
        let y = |v: f64| H - M - (H - 2.0 * M) * (v - lo) / (hi - lo);
        let mut out = format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" font-family=\"sans-serif\" font-size=\"12\">\n\
             <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
             <line x1=\"{M}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n\
             <line x1=\"{M}\" y1=\"{M}\" x2=\"{M}\" y2=\"{b}\" stroke=\"black\"/>\n\
             <text x=\"{cx}\" y=\"{ly}\" text-anchor=\"middle\">epoch</text>\n\
             <text x=\"14\" y=\"{cy}\" transform=\"rotate(-90 14 {cy})\" text-anchor=\"middle\">Q negative log-likelihood</text>\n\
             <text x=\"{tx}\" y=\"{b}\" text-anchor=\"end\">{lo:.2}</text>\n\
             <text x=\"{tx}\" y=\"{ty}\" text-anchor=\"end\">{hi:.2}</text>\n\
             <text x=\"{M}\" y=\"{ey}\" text-anchor=\"middle\">0</text>\n\
             <text x=\"{r}\" y=\"{ey}\" text-anchor=\"middle\">{last}</text>\n",
            b = H - M,
            r = W - M,
            cx = W / 2.0,
            ly = H - 12.0,
            cy = H / 2.0,
            tx = M - 4.0,
            ty = M + 4.0,
            ey = H - M + 16.0,
            last = self.epochs - 1,
        );
        for (i, s) in self.series.iter().enumerate() {
            let color = COLORS[i % COLORS.len()];
            let points: Vec<String> = s
                .q_nll
                .iter()
                .enumerate()
                .filter(|(_, v)| v.is_finite())
                .map(|(e, v)| format!("{:.1},{:.1}", x(e), y(*v)))
                .collect();
            let _ = writeln!(
                out,
                "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"2\" points=\"{}\"/>",
                points.join(" ")
            );
            let ly = M + 16.0 * i as f64;
            let _ = writeln!(
                out,
                "<line x1=\"{a}\" y1=\"{ly}\" x2=\"{b}\" y2=\"{ly}\" stroke=\"{color}\" stroke-width=\"2\"/><text x=\"{c}\" y=\"{t}\">{}</text>",
                escape(&s.label),
                a = W - M - 120.0,
                b = W - M - 100.0,
                c = W - M - 95.0,
                t = ly + 4.0,
            );
        }
        out.push_str("</svg>\n");
        out
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorAgreement {
    pub factor: usize,
    pub attribute: StyleAttribute,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Match {
    pub attribute: StyleAttribute,
    pub factor: usize,
    pub accuracy: f64,
    pub chance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub students: usize,
    /// Every (factor, attribute) pair.
    pub agreements: Vec<FactorAgreement>,
    /// Injective factor assignment maximizing total accuracy.
    pub assignment: Vec<Match>,
    /// Majority frequency of each attribute.
    pub chance: BTreeMap<StyleAttribute, f64>,
}

impl RecoveryReport {
    pub fn accuracy(&self, factor: usize, attribute: StyleAttribute) -> Option<f64> {
        self.agreements
            .iter()
            .find(|a| a.factor == factor && a.attribute == attribute)
            .map(|a| a.accuracy)
    }

    pub fn matched(&self, attribute: StyleAttribute) -> Option<&Match> {
        self.assignment.iter().find(|m| m.attribute == attribute)
    }

    pub fn table(&self) -> String {
        let attrs: Vec<StyleAttribute> = self.chance.keys().copied().collect();
        let mut out = String::from("| factor |");
        for a in &attrs {
            let _ = write!(out, " {a} |");
        }
        out.push_str("\n|---|");
        out.push_str(&"---|".repeat(attrs.len()));
        let factors = self.agreements.iter().map(|a| a.factor + 1).max().unwrap_or(0);
        for f in 0..factors {
            let _ = write!(out, "\n| {f} |");
            for a in &attrs {
                let acc = self.accuracy(f, *a).unwrap_or(f64::NAN);
                let mark = if self.matched(*a).is_some_and(|m| m.factor == f) { "*" } else { "" };
                let _ = write!(out, " {acc:.3}{mark} |");
            }
        }
        out.push_str("\n| chance |");
        for a in &attrs {
            let _ = write!(out, " {:.3} |", self.chance[a]);
        }
        out.push('\n');
        out
    }
}

/// Purity of `classes` with respect to `labels`: each class predicts its
/// majority label (ties to the lower label).
pub fn agreement(classes: &[usize], labels: &[usize]) -> f64 {
    if classes.is_empty() {
        return 0.0;
    }
    let mut counts: BTreeMap<usize, BTreeMap<usize, usize>> = BTreeMap::new();
    for (&c, &l) in classes.iter().zip(labels) {
        *counts.entry(c).or_default().entry(l).or_default() += 1;
    }
    let correct: usize = counts.values().map(|m| m.values().copied().max().unwrap_or(0)).sum();
    correct as f64 / classes.len() as f64
}

fn best_assignment(acc: &[Vec<f64>]) -> Vec<usize> {
    // acc[attribute][factor]; exhaustive over injective maps
    fn go(acc: &[Vec<f64>], a: usize, used: &mut Vec<bool>, cur: &mut Vec<usize>, best: &mut (f64, Vec<usize>)) {
        if a == acc.len() {
            let total: f64 = cur.iter().enumerate().map(|(i, &f)| acc[i][f]).sum();
            if total > best.0 + 1e-12 {
                *best = (total, cur.clone());
            }
            return;
        }
        for f in 0..used.len() {
            if !used[f] {
                used[f] = true;
                cur.push(f);
                go(acc, a + 1, used, cur, best);
                cur.pop();
                used[f] = false;
            }
        }
    }
    let factors = acc.first().map_or(0, Vec::len);
    let mut best = (f64::NEG_INFINITY, Vec::new());
    go(acc, 0, &mut vec![false; factors], &mut Vec::new(), &mut best);
    best.1
}

/// Compare each learned discrete factor's class per student with the
/// ground-truth style attributes.
pub fn factor_recovery(ck: &Checkpoint, profiles: &[StudentProfile]) -> Result<RecoveryReport> {
    require_factors(ck)?;
    let by_id: BTreeMap<&str, &StudentProfile> = profiles.iter().map(|p| (p.student_id.as_str(), p)).collect();
    let students = ck.store.students();
    let mut rows = Vec::with_capacity(students.len());
    for (i, s) in students.iter().enumerate() {
        let p = by_id
            .get(s.as_str())
            .ok_or_else(|| Error::InvalidArgument(format!("no ground-truth profile for student {s}")))?;
        rows.push((ck.store.state(i), *p));
    }
    let d_disc = ck.store.config.d_disc;
    let classes: Vec<Vec<usize>> = (0..d_disc)
        .map(|f| rows.iter().map(|(st, _)| st.learned_class(f)).collect())
        .collect();
    let mut agreements = Vec::new();
    let mut acc = Vec::new();
    let mut chance = BTreeMap::new();
    for a in StyleAttribute::ALL {
        let labels: Vec<usize> = rows.iter().map(|(_, p)| p.attribute(a)).collect();
        chance.insert(a, agreement(&vec![0; labels.len()], &labels));
        let row: Vec<f64> = classes.iter().map(|c| agreement(c, &labels)).collect();
        for (f, &x) in row.iter().enumerate() {
            agreements.push(FactorAgreement {
                factor: f,
                attribute: a,
                accuracy: x,
            });
        }
        acc.push(row);
    }
    let assignment = if d_disc >= StyleAttribute::ALL.len() {
        best_assignment(&acc)
            .into_iter()
            .zip(StyleAttribute::ALL)
            .enumerate()
            .map(|(i, (f, a))| Match {
                attribute: a,
                factor: f,
                accuracy: acc[i][f],
                chance: chance[&a],
            })
            .collect()
    } else {
        // fewer factors than attributes: assign factors to the attributes
        // they fit best
        let mut t: Vec<Vec<f64>> = vec![vec![0.0; acc.len()]; d_disc];
        for (a, row) in acc.iter().enumerate() {
            for (f, &x) in row.iter().enumerate() {
                t[f][a] = x;
            }
        }
        best_assignment(&t)
            .into_iter()
            .enumerate()
            .map(|(f, a)| Match {
                attribute: StyleAttribute::ALL[a],
                factor: f,
                accuracy: acc[a][f],
                chance: chance[&StyleAttribute::ALL[a]],
            })
            .collect()
    };
    Ok(RecoveryReport {
        students: students.len(),
        agreements,
        assignment,
        chance,
    })
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "spearman needs two equal-length series of at least 2 values, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let mean = (x.len() as f64 + 1.0) / 2.0;
    let (mut num, mut dx, mut dy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        num += (a - mean) * (b - mean);
        dx += (a - mean).powi(2);
        dy += (b - mean).powi(2);
    }
    if dx == 0.0 || dy == 0.0 {
        return Ok(0.0);
    }
    Ok(num / (dx * dy).sqrt())
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && v[order[j + 1]] == v[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            r[o] = avg;
        }
        i = j + 1;
    }
    r
}
