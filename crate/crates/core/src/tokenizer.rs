//! Whitespace-and-punctuation tokenizer with explicit layout tokens.
//!
//! Each source line becomes `INDENT* tokens`, lines are separated by
//! `NEWLINE`. Decoding joins tokens of a line with single spaces, so
//! `decode(encode(x))` is `x` with canonical whitespace.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::lexer::scan;

pub const PAD: &str = "<pad>";
pub const BOS: &str = "<bos>";
pub const EOS: &str = "<eos>";
pub const UNK: &str = "<unk>";
pub const SEP: &str = "<sep>";
pub const INDENT: &str = "<indent>";
pub const NEWLINE: &str = "<nl>";

pub const SPECIALS: [&str; 5] = [PAD, BOS, EOS, UNK, SEP];

/// Columns per indentation level; tabs count as one level.
pub const INDENT_WIDTH: usize = 4;

pub type TokenId = u32;

/// Split text into token strings, including layout tokens.
pub fn split(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut line = 0;
    for lx in scan(text) {
        if lx.line != line {
            if line != 0 {
                out.push(NEWLINE.to_string());
            }
            line = lx.line;
            let level = (lx.column - 1 + INDENT_WIDTH / 2) / INDENT_WIDTH;
            out.extend(std::iter::repeat_n(INDENT.to_string(), level));
        }
        out.push(lx.text);
    }
    out
}

/// Render token strings back to text.
pub fn join(tokens: &[impl AsRef<str>]) -> String {
    let mut out = String::new();
    let mut line_start = true;
    for t in tokens {
        match t.as_ref() {
            NEWLINE => {
                out.push('\n');
                line_start = true;
            }
            INDENT if line_start => out.push_str(&" ".repeat(INDENT_WIDTH)),
            tok => {
                if !line_start {
                    out.push(' ');
                }
                out.push_str(tok);
                line_start = false;
            }
        }
    }
    out
}

/// Canonical whitespace form of `text`.
pub fn canonicalize(text: &str) -> String {
    join(&split(text))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    ids: BTreeMap<String, TokenId>,
}

impl Vocabulary {
    /// Specials first, then every token by descending frequency, ties
    /// broken lexicographically.
    pub fn build<S: AsRef<str>>(texts: &[S]) -> Result<Vocabulary> {
        let mut freq: BTreeMap<String, usize> = BTreeMap::new();
        for t in texts {
            for tok in split(t.as_ref()) {
                *freq.entry(tok).or_insert(0) += 1;
            }
        }
        if freq.is_empty() {
            return Err(Error::Vocabulary("empty corpus".into()));
        }
        let mut ranked: Vec<(String, usize)> = freq
            .into_iter()
            .filter(|(t, _)| !SPECIALS.contains(&t.as_str()))
            .collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let tokens = SPECIALS
            .iter()
            .map(|s| s.to_string())
            .chain(ranked.into_iter().map(|(t, _)| t))
            .collect();
        Self::from_tokens(tokens)
    }

    pub fn from_tokens(tokens: Vec<String>) -> Result<Vocabulary> {
        for (i, s) in SPECIALS.iter().enumerate() {
            if tokens.get(i).map(String::as_str) != Some(*s) {
                return Err(Error::Vocabulary(format!("special {s} must have id {i}")));
            }
        }
        let mut ids = BTreeMap::new();
        for (i, t) in tokens.iter().enumerate() {
            if t.contains('\n') {
                return Err(Error::Vocabulary(format!("token {t:?} contains a newline")));
            }
            if ids.insert(t.clone(), i as TokenId).is_some() {
                return Err(Error::Vocabulary(format!("duplicate token {t:?}")));
            }
        }
        Ok(Vocabulary { tokens, ids })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn id(&self, token: &str) -> Option<TokenId> {
        self.ids.get(token).copied()
    }

    pub fn token(&self, id: TokenId) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn pad(&self) -> TokenId {
        0
    }
    pub fn bos(&self) -> TokenId {
        1
    }
    pub fn eos(&self) -> TokenId {
        2
    }
    pub fn unk(&self) -> TokenId {
        3
    }
    pub fn sep(&self) -> TokenId {
        4
    }

    pub fn encode(&self, text: &str) -> Vec<TokenId> {
        split(text)
            .iter()
            .map(|t| self.id(t).unwrap_or(self.unk()))
            .collect()
    }

    pub fn decode(&self, ids: &[TokenId]) -> Result<String> {
        let toks = ids
            .iter()
            .map(|&i| {
                self.token(i).ok_or_else(|| {
                    Error::Vocabulary(format!("id {i} outside vocabulary of {}", self.len()))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(join(&toks))
    }

    /// One token per line; the line number is the id.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut s = self.tokens.join("\n");
        s.push('\n');
        fs::write(path, s)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Vocabulary> {
        let s = fs::read_to_string(path)?;
        Self::from_tokens(s.lines().map(str::to_string).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn builds_with_specials() {
        let v = Vocabulary::build(&["a b", "b c"]).unwrap();
        assert_eq!(v.len(), 3 + 5);
        assert_eq!(&v.tokens()[..5], SPECIALS);
        // b occurs twice so it ranks first
        assert_eq!(v.token(5), Some("b"));
        for t in ["a", "b", "c"] {
            assert!(v.id(t).is_some());
        }
    }

    #[test]
    fn deterministic_ids() {
        let a = Vocabulary::build(&["x y z", "z"]).unwrap();
        let b = Vocabulary::build(&["x y z", "z"]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn empty_corpus_rejected() {
        assert!(Vocabulary::build(&[""]).is_err());
        assert!(Vocabulary::build::<&str>(&[]).is_err());
    }

    #[test]
    fn round_trip_single_line() {
        let src = "if ( x ) { return 0 ; }";
        let v = Vocabulary::build(&[src]).unwrap();
        assert_eq!(v.decode(&v.encode(src)).unwrap(), src);
    }

    #[test]
    fn layout_is_encoded() {
        let src = "void f()\n{\n    return;\n}";
        assert_eq!(
            split(src),
            ["void", "f", "(", ")", NEWLINE, "{", NEWLINE, INDENT, "return", ";", NEWLINE, "}"]
        );
        assert_eq!(canonicalize(src), "void f ( )\n{\n    return ;\n}");
    }

    #[test]
    fn unknown_maps_to_unk_and_bad_id_errors() {
        let v = Vocabulary::build(&["a b"]).unwrap();
        assert_eq!(v.encode("zzz"), [v.unk()]);
        assert!(v.decode(&[v.len() as TokenId]).is_err());
    }

    #[test]
    fn save_load() {
        let dir = tempfile::tempdir().unwrap();
        let v = Vocabulary::build(&["int x = \"a b\" ;"]).unwrap();
        let p = dir.path().join("vocab.txt");
        v.save(&p).unwrap();
        assert_eq!(Vocabulary::load(&p).unwrap(), v);
    }

    proptest! {
        #[test]
        fn canonical_text_round_trips(
            lines in prop::collection::vec(
                (0usize..4, prop::collection::vec(
                    prop::sample::select(vec!["if", "(", "x", ")", "{", "}", "return", "0", ";", "i++", "a[i]", "\"s t\""]),
                    1..6)),
                1..5)
        ) {
            let text: String = lines
                .iter()
                .map(|(lvl, toks)| format!("{}{}", "    ".repeat(*lvl), toks.join(" ")))
                .collect::<Vec<_>>()
                .join("\n");
            let canon = canonicalize(&text);
            let v = Vocabulary::build(&[text.as_str()]).unwrap();
            prop_assert_eq!(v.decode(&v.encode(&text)).unwrap(), canon.clone());
            // canonical form is a fixed point and encodes identically
            prop_assert_eq!(canonicalize(&canon), canon.clone());
            prop_assert_eq!(v.encode(&canon), v.encode(&text));
        }
    }
}
