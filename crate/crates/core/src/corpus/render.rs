//! Layout-aware rendering of template code under a brace style.

use super::IndentationStyle;

#[derive(Debug, Clone, PartialEq)]
pub enum Stmt {
    Line(String),
    /// `head { body }`, e.g. loops.
    Block { head: String, body: Vec<Stmt> },
    /// `if (c0) {..} else if (c1) {..} else {..}`
    If {
        arms: Vec<(String, Vec<Stmt>)>,
        otherwise: Option<Vec<Stmt>>,
    },
}

pub fn line(s: impl Into<String>) -> Stmt {
    Stmt::Line(s.into())
}

pub fn block(head: impl Into<String>, body: Vec<Stmt>) -> Stmt {
    Stmt::Block {
        head: head.into(),
        body,
    }
}

pub fn if_else(cond: impl Into<String>, then: Vec<Stmt>, otherwise: Option<Vec<Stmt>>) -> Stmt {
    Stmt::If {
        arms: vec![(cond.into(), then)],
        otherwise,
    }
}

pub fn if_chain(arms: Vec<(String, Vec<Stmt>)>, otherwise: Option<Vec<Stmt>>) -> Stmt {
    Stmt::If { arms, otherwise }
}

const TAB: &str = "    ";

struct Out {
    style: IndentationStyle,
    lines: Vec<String>,
}

impl Out {
    fn push(&mut self, level: usize, s: &str) {
        self.lines.push(format!("{}{}", TAB.repeat(level), s));
    }

    /// Opens a braced body after `head`.
    fn open(&mut self, level: usize, head: &str) {
        match self.style {
            IndentationStyle::KnR => self.push(level, &format!("{head} {{")),
            IndentationStyle::Allman => {
                self.push(level, head);
                self.push(level, "{");
            }
        }
    }

    fn body(&mut self, level: usize, body: &[Stmt]) {
        for s in body {
            self.stmt(level, s);
        }
    }

    fn stmt(&mut self, level: usize, s: &Stmt) {
        match s {
            Stmt::Line(l) => self.push(level, l),
            Stmt::Block { head, body } => {
                self.open(level, head);
                self.body(level + 1, body);
                self.push(level, "}");
            }
            Stmt::If { arms, otherwise } => {
                for (i, (cond, body)) in arms.iter().enumerate() {
                    let head = if i == 0 {
                        format!("if ({cond})")
                    } else {
                        format!("else if ({cond})")
                    };
                    self.continue_chain(level, i > 0, &head);
                    self.body(level + 1, body);
                }
                if let Some(body) = otherwise {
                    self.continue_chain(level, true, "else");
                    self.body(level + 1, body);
                }
                self.push(level, "}");
            }
        }
    }

    /// K&R joins `} else {` on one line; Allman closes, then opens.
    fn continue_chain(&mut self, level: usize, after_arm: bool, head: &str) {
        match (self.style, after_arm) {
            (IndentationStyle::KnR, true) => self.push(level, &format!("}} {head} {{")),
            (IndentationStyle::Allman, true) => {
                self.push(level, "}");
                self.open(level, head);
            }
            (_, false) => self.open(level, head),
        }
    }
}

/// Render a method with signature `signature` and `body`.
pub fn render_method(style: IndentationStyle, signature: &str, body: &[Stmt]) -> String {
    let mut out = Out {
        style,
        lines: Vec::new(),
    };
    out.stmt(0, &block(signature, body.to_vec()));
    out.lines.join("\n")
}
