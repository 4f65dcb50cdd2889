//! Brute-force reference implementations and fixtures shared by the
//! integration tests.

#![allow(dead_code)]

use infooirt::metrics::{dataflow, keywords, parse_mini_java, DefKind, Node, NodeKind, Role};
use rand::seq::IndexedRandom;
use rand::Rng;

pub fn words(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

fn grams(t: &[String], n: usize) -> Vec<&[String]> {
    if t.len() < n {
        return Vec::new();
    }
    (0..=t.len() - n).map(|i| &t[i..i + n]).collect()
}

fn weight(g: &[String], weighted: bool) -> f64 {
    if !weighted {
        return 1.0;
    }
    let per: f64 = g
        .iter()
        .map(|t| if keywords().contains(&t.as_str()) { 4.0 } else { 1.0 })
        .sum();
    per / g.len() as f64
}

/// Sentence BLEU to 4-grams from explicit n-gram tables: unsmoothed
/// unigrams, add-one smoothing above, brevity penalty.
pub fn bleu(cand: &[String], reference: &[String], weighted: bool) -> f64 {
    let mut logs = Vec::new();
    for n in 1..=4 {
        let c = grams(cand, n);
        let r = grams(reference, n);
        let mut num = 0.0;
        let mut den = 0.0;
        for (i, g) in c.iter().enumerate() {
            if c[..i].contains(g) {
                continue;
            }
            let in_c = c.iter().filter(|x| *x == g).count();
            let in_r = r.iter().filter(|x| *x == g).count();
            num += weight(g, weighted) * in_c.min(in_r) as f64;
            den += weight(g, weighted) * in_c as f64;
        }
        if n == 1 && num == 0.0 {
            return 0.0;
        }
        let p = if n == 1 { num / den } else { (num + 1.0) / (den + 1.0) };
        logs.push(p.ln());
    }
    let bp = if cand.is_empty() {
        0.0
    } else if cand.len() > reference.len() {
        1.0
    } else {
        (1.0 - reference.len() as f64 / cand.len() as f64).exp()
    };
    bp * (logs.iter().sum::<f64>() / 4.0).exp()
}

fn label(n: &Node) -> String {
    match n.kind {
        NodeKind::Operator | NodeKind::Modifier | NodeKind::TypeName => n.text.clone().unwrap_or_default(),
        k => format!("{k:?}"),
    }
}

fn same_tree(a: &Node, b: &Node) -> bool {
    label(a) == label(b)
        && a.children.len() == b.children.len()
        && a.children.iter().zip(&b.children).all(|(x, y)| same_tree(x, y))
}

fn inner_nodes<'a>(n: &'a Node, out: &mut Vec<&'a Node>) {
    if !n.children.is_empty() {
        out.push(n);
    }
    for c in &n.children {
        inner_nodes(c, out);
    }
}

/// Pair every reference subtree with an unused structurally equal candidate
/// subtree.
fn exhaustive_match<T>(cand: &[T], reference: &[T], eq: impl Fn(&T, &T) -> bool) -> f64 {
    if reference.is_empty() {
        return 1.0;
    }
    let mut used = vec![false; cand.len()];
    let mut matched = 0;
    for r in reference {
        if let Some(i) = (0..cand.len()).find(|&i| !used[i] && eq(&cand[i], r)) {
            used[i] = true;
            matched += 1;
        }
    }
    matched as f64 / reference.len() as f64
}

pub fn ast_match(cand: &str, reference: &str) -> f64 {
    let (Ok(c), Ok(r)) = (parse_mini_java(cand), parse_mini_java(reference)) else {
        return 0.0;
    };
    let (mut cs, mut rs) = (Vec::new(), Vec::new());
    inner_nodes(&c.root, &mut cs);
    inner_nodes(&r.root, &mut rs);
    exhaustive_match(&cs, &rs, |a, b| same_tree(a, b))
}

fn edges(code: &str) -> Option<Vec<(usize, DefKind, NodeKind)>> {
    let g = dataflow(&parse_mini_java(code).ok()?);
    let mut names: Vec<&str> = Vec::new();
    for n in &g.nodes {
        if !names.contains(&n.name.as_str()) {
            names.push(&n.name);
        }
    }
    Some(
        g.edges
            .iter()
            .map(|&(d, u)| {
                let def = &g.nodes[d];
                let Role::Def(kind) = def.role else { panic!("edge from a use") };
                let var = names.iter().position(|x| *x == def.name).unwrap();
                (var, kind, g.nodes[u].context)
            })
            .collect(),
    )
}

pub fn dataflow_match(cand: &str, reference: &str) -> f64 {
    let r = edges(reference).expect("reference parses");
    match edges(cand) {
        Some(c) => exhaustive_match(&c, &r, |a, b| a == b),
        None => 0.0,
    }
}

/// A short statement sequence of at most `max_tokens` space-separated
/// tokens.
pub fn random_statements(rng: &mut impl Rng, max_tokens: usize) -> String {
    let vars = ["a", "b", "c"];
    let nums = ["0", "1", "2"];
    let mut out: Vec<String> = Vec::new();
    for _ in 0..8 {
        let v = *vars.choose(rng).unwrap();
        let w = *vars.choose(rng).unwrap();
        let n = *nums.choose(rng).unwrap();
        let stmt = match rng.random_range(0..6) {
            0 => format!("int {v} = {n} ;"),
            1 => format!("{v} = {w} ;"),
            2 => format!("return {v} ;"),
            3 => format!("{v} ++ ;"),
            4 => format!("{v} += {w} ;"),
            _ => format!("if ( {v} ) {w} = {n} ;"),
        };
        if out.iter().map(|s| s.split(' ').count()).sum::<usize>() + stmt.split(' ').count() > max_tokens {
            break;
        }
        out.push(stmt);
    }
    if out.is_empty() {
        out.push(format!("return {} ;", vars.choose(rng).unwrap()));
    }
    out.join(" ")
}

/// Like [`random_statements`], but half the time the tokens are shuffled so
/// the candidate may not parse.
pub fn random_candidate(rng: &mut impl Rng, max_tokens: usize) -> String {
    let s = random_statements(rng, max_tokens);
    if rng.random_bool(0.5) {
        return s;
    }
    let mut t = words(&s);
    use rand::seq::SliceRandom;
    t.shuffle(rng);
    t.join(" ")
}

pub mod fd {
    use infooirt::generator::{GeneratorConfig, Model};
    use infooirt::knowledge::{KnowledgeConfig, KnowledgeStore, LatentNoise, SampleMode};
    use infooirt::trainer::{
        example_loss, flat_layout, flat_params, set_flat_params, Example, ObjectiveKind, StepSettings,
    };
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup(knowledge: KnowledgeConfig) -> (Model, KnowledgeStore, Example) {
        let g = GeneratorConfig {
            d_model: 8,
            n_layers: 1,
            n_heads: 2,
            max_len: 16,
            vocab_size: 8,
        };
        let mut model = Model::new(g, knowledge, 11).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut store = KnowledgeStore::new(knowledge, &["a".into(), "b".into()], &mut rng).unwrap();
        // move off the symmetric initialization so every path carries gradient
        let mut flat = flat_params(&model, &store);
        for x in flat.iter_mut() {
            *x += rng.random_range(-0.3..0.3);
        }
        set_flat_params(&mut model, &mut store, &flat);
        let ex = Example {
            submission: 0,
            student: 1,
            problem: vec![5, 6, 7],
            code: vec![6, 5, 7, 7],
            targets: vec![6, 5, 7, 7, 2],
        };
        (model, store, ex)
    }

    /// Relative error of the analytic gradient against central differences,
    /// per parameter tensor.
    pub fn check(objective: ObjectiveKind, knowledge: KnowledgeConfig, lambda: f64) -> Vec<(String, f64)> {
        let (mut model, mut store, ex) = setup(knowledge);
        let settings = StepSettings {
            objective,
            lambda,
            q_target_gradient: true,
            mode: SampleMode::Relaxed,
            tau: 0.8,
        };
        let noise = LatentNoise::draw(&knowledge, &mut ChaCha8Rng::seed_from_u64(9));
        let mut mg = model.zeros_like();
        let mut kg = store.zeros_like();
        example_loss(&model, &store, &ex, &settings, Some(noise.clone()), Some((&mut mg, &mut kg))).unwrap();
        let analytic = flat_params(&mg, &kg);
        let base = flat_params(&model, &store);
        let layout = flat_layout(&model, &store);

        let mut errs = Vec::new();
        for (name, start, len) in layout {
            let mut num = 0.0;
            let mut den = 0.0;
            for j in start..start + len {
                let h = 1e-5;
                let mut p = base.clone();
                p[j] += h;
                set_flat_params(&mut model, &mut store, &p);
                let up = example_loss(&model, &store, &ex, &settings, Some(noise.clone()), None).unwrap().total;
                p[j] -= 2.0 * h;
                set_flat_params(&mut model, &mut store, &p);
                let down = example_loss(&model, &store, &ex, &settings, Some(noise.clone()), None).unwrap().total;
                let fd = (up - down) / (2.0 * h);
                num += (fd - analytic[j]).powi(2);
                den += fd.powi(2).max(analytic[j].powi(2));
            }
            set_flat_params(&mut model, &mut store, &base);
            if den > 0.0 {
                errs.push((name, (num / den).sqrt()));
            }
        }
        errs
    }

    pub fn info_config() -> KnowledgeConfig {
        KnowledgeConfig {
            d_bar: 2,
            d_cont: 1,
            d_disc: 2,
            k: 2,
        }
    }
}

pub mod fixtures {
    use std::fmt::Write as _;
    use std::path::{Path, PathBuf};

    pub const HEADER: &str = "SubjectID,ProblemID,ServerTimestamp,Code\n";

    fn quote(code: &str) -> String {
        format!("\"{}\"", code.replace('"', "\"\""))
    }

    /// 100 first attempts (10 students × 10 problems), 15 of which do not
    /// parse. Returns the path and the unparseable (student, problem) pairs.
    pub fn known_bad_rows(dir: &Path) -> (PathBuf, Vec<(String, String)>) {
        let mut csv = String::from(HEADER);
        let mut bad = Vec::new();
        for i in 0..100 {
            let (s, p) = (format!("s{}", i / 10), format!("p{}", i % 10));
            let code = if i < 75 && i % 5 == 2 {
                bad.push((s.clone(), p.clone()));
                format!("public int f(int x) {{ return x + ; }} // {i}")
            } else {
                format!("public int f(int x) {{\n    return x + {i};\n}}")
            };
            let _ = writeln!(csv, "{s},{p},{},{}", 1000 + i, quote(&code));
        }
        let path = dir.join("known_bad.csv");
        std::fs::write(&path, csv).unwrap();
        (path, bad)
    }

    /// Repeated attempts with tied and differently-sized timestamps. Returns
    /// the path and the expected retained `(student, problem, code)` rows.
    pub fn duplicated_timestamps(dir: &Path) -> (PathBuf, Vec<(String, String, String)>) {
        let rows = [
            // numeric comparison: 9 precedes 10
            ("a", "p1", "10", "return 10;"),
            ("a", "p1", "9", "return 9;"),
            // a tie keeps the row that comes first in the file
            ("b", "p1", "5", "return 51;"),
            ("b", "p1", "5", "return 52;"),
            ("b", "p1", "4", "return x +;"),
            // the earliest attempt does not parse: the pair is dropped, not
            // replaced by a later attempt
            ("c", "p2", "1", "return ) ;"),
            ("c", "p2", "2", "return 2;"),
            // interleaved students and problems
            ("a", "p2", "7", "return 7;"),
            ("b", "p2", "3", "return 3;"),
            ("a", "p2", "7", "return 77;"),
            ("b", "p2", "30", "return 30;"),
            // non-numeric timestamps compare as text
            ("c", "p1", "2020-01-02T00:00", "return 102;"),
            ("c", "p1", "2020-01-01T23:59", "return 101;"),
        ];
        let mut csv = String::from(HEADER);
        for (s, p, t, c) in rows {
            let _ = writeln!(csv, "{s},{p},{t},{}", quote(c));
        }
        let path = dir.join("duplicated_timestamps.csv");
        std::fs::write(&path, csv).unwrap();
        let expected = [
            ("a", "p1", "return 9;"),
            ("b", "p1", "return x +;"),
            ("a", "p2", "return 7;"),
            ("b", "p2", "return 3;"),
            ("c", "p1", "return 101;"),
        ];
        let expected = expected
            .iter()
            .filter(|(_, _, c)| !c.contains('+'))
            .map(|(s, p, c)| (s.to_string(), p.to_string(), c.to_string()))
            .collect();
        (path, expected)
    }
}
