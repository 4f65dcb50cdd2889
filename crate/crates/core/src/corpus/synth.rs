use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::render::render_method;
use super::templates::{Ctx, TEMPLATES};
use super::{
    BugKind, Corpus, IndentationStyle, LoopStyle, NestingStyle, Problem, SkillTag,
    StudentProfile, Submission,
};
use crate::error::{Error, Result};
use crate::metrics::parse_mini_java;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub n_students: usize,
    pub n_problems: usize,
    pub bug_rate: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_students: 40,
            n_problems: 8,
            bug_rate: 0.3,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_students < 2 {
            return Err(Error::Config("n_students must be at least 2".into()));
        }
        if self.n_problems < 2 {
            return Err(Error::Config("n_problems must be at least 2".into()));
        }
        if !(0.0..=1.0).contains(&self.bug_rate) {
            return Err(Error::Config("bug_rate must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Half of the students (rounded down) get class `b`, assigned by shuffle.
fn balanced<T: Copy>(rng: &mut ChaCha8Rng, n: usize, a: T, b: T) -> Vec<T> {
    let mut v: Vec<T> = (0..n).map(|i| if i < n / 2 { b } else { a }).collect();
    v.shuffle(rng);
    v
}

pub(crate) fn problem_for(index: usize) -> (Problem, usize, i64) {
    let t = index % TEMPLATES.len();
    let variant = (index / TEMPLATES.len()) as i64;
    let tpl = &TEMPLATES[t];
    let name = if variant == 0 {
        tpl.name.to_string()
    } else {
        format!("{}{}", tpl.name, variant + 1)
    };
    let problem = Problem {
        problem_id: format!("P{}", index + 1),
        statement: format!(
            "{} public {} {}({})",
            tpl.sentence, tpl.ret, name, tpl.params
        ),
        skill_tag: tpl.skill,
    };
    (problem, t, variant)
}

pub(crate) fn render_submission(
    profile: &StudentProfile,
    problem_index: usize,
    bug: Option<BugKind>,
) -> String {
    let (_, t, variant) = problem_for(problem_index);
    let tpl = &TEMPLATES[t];
    let name = if variant == 0 {
        tpl.name.to_string()
    } else {
        format!("{}{}", tpl.name, variant + 1)
    };
    let ctx = Ctx {
        nesting: profile.nesting_style,
        loops: profile.loop_style,
        bug,
        variant,
    };
    let signature = format!("public {} {}({})", tpl.ret, name, tpl.params);
    render_method(profile.indentation_style, &signature, &(tpl.body)(&ctx))
}

/// Generate problems, one first-attempt submission per (student, problem),
/// and the ground-truth profiles. Deterministic in `spec`.
pub fn synth_generate(spec: &SynthSpec) -> Result<Corpus> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.n_students;
    let indents = balanced(&mut rng, n, IndentationStyle::KnR, IndentationStyle::Allman);
    let nestings = balanced(&mut rng, n, NestingStyle::Flat, NestingStyle::Nested);
    let loops = balanced(&mut rng, n, LoopStyle::For, LoopStyle::While);

    let mut profiles = Vec::with_capacity(n);
    for i in 0..n {
        let mastery: BTreeMap<SkillTag, f64> = SkillTag::ALL
            .iter()
            .map(|&s| (s, rng.random_range(0.3..1.0)))
            .collect();
        let mut bugs = BugKind::ALL.to_vec();
        bugs.shuffle(&mut rng);
        bugs.truncate(rng.random_range(1..=2));
        bugs.sort();
        profiles.push(StudentProfile {
            student_id: format!("S{}", i + 1),
            indentation_style: indents[i],
            nesting_style: nestings[i],
            loop_style: loops[i],
            mastery,
            bug_repertoire: bugs,
        });
    }

    let problems: Vec<Problem> = (0..spec.n_problems).map(|i| problem_for(i).0).collect();

    let mut submissions = Vec::with_capacity(n * spec.n_problems);
    for profile in &profiles {
        for (pi, problem) in problems.iter().enumerate() {
            let p_bug = spec.bug_rate * (1.0 - profile.mastery[&problem.skill_tag]);
            let draw: f64 = rng.random();
            let pick = rng.random_range(0..profile.bug_repertoire.len());
            let clean = render_submission(profile, pi, None);
            let (code, injected_bug) = if draw < p_bug {
                let bug = profile.bug_repertoire[pick];
                let buggy = render_submission(profile, pi, Some(bug));
                if buggy == clean {
                    (clean, None)
                } else {
                    (buggy, Some(bug))
                }
            } else {
                (clean, None)
            };
            let parses = parse_mini_java(&code).is_ok();
            debug_assert!(parses, "template rendered unparseable code:\n{code}");
            submissions.push(Submission {
                student_id: profile.student_id.clone(),
                problem_id: problem.problem_id.clone(),
                code,
                is_first_attempt: true,
                parses,
                profile_ref: Some(profile.student_id.clone()),
                injected_bug,
            });
        }
    }
    Ok(Corpus {
        problems,
        submissions,
        profiles,
    })
}
