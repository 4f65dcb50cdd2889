//! Total scanner for Java-like source text.
//!
//! Never fails: characters outside the language become [`LexemeKind::Unknown`]
//! lexemes. The parser rejects those; the tokenizer keeps them as ordinary
//! tokens so arbitrary submissions still encode.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LexemeKind {
    Word,
    Number,
    Str,
    Char,
    Punct,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lexeme {
    pub kind: LexemeKind,
    pub text: String,
    /// Byte offset of the first character.
    pub offset: usize,
    /// 1-based line.
    pub line: usize,
    /// 1-based column, tabs expanded to 4.
    pub column: usize,
}

impl Lexeme {
    pub fn end(&self) -> usize {
        self.offset + self.text.len()
    }
}

const PUNCT: &[&str] = &[
    ">>>=", "<<=", ">>=", ">>>", "==", "!=", "<=", ">=", "&&", "||", "++", "--", "+=", "-=", "*=",
    "/=", "%=", "&=", "|=", "^=", "<<", ">>", "->", "::", "(", ")", "{", "}", "[", "]", ";", ",",
    ".", "=", "<", ">", "!", "~", "?", ":", "+", "-", "*", "/", "&", "|", "^", "%", "@",
];

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
    line: usize,
    column: usize,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn peek_at(&self, n: usize) -> Option<char> {
        self.src[self.pos..].chars().nth(n)
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        match c {
            '\n' => {
                self.line += 1;
                self.column = 1;
            }
            '\t' => self.column += 4,
            _ => self.column += 1,
        }
        Some(c)
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }
}

/// Scan `src` into lexemes, skipping whitespace and comments.
pub fn scan(src: &str) -> Vec<Lexeme> {
    let mut cur = Cursor {
        src,
        pos: 0,
        line: 1,
        column: 1,
    };
    let mut out = Vec::new();
    while let Some(c) = cur.peek() {
        if c.is_whitespace() {
            cur.bump();
            continue;
        }
        if cur.rest().starts_with("//") {
            while let Some(c) = cur.peek() {
                if c == '\n' {
                    break;
                }
                cur.bump();
            }
            continue;
        }
        if cur.rest().starts_with("/*") {
            cur.bump();
            cur.bump();
            while cur.peek().is_some() && !cur.rest().starts_with("*/") {
                cur.bump();
            }
            cur.bump();
            cur.bump();
            continue;
        }
        let (start, line, column) = (cur.pos, cur.line, cur.column);
        let kind = if c.is_ascii_alphabetic() || c == '_' || c == '$' {
            while matches!(cur.peek(), Some(c) if c.is_ascii_alphanumeric() || c == '_' || c == '$')
            {
                cur.bump();
            }
            LexemeKind::Word
        } else if c.is_ascii_digit() {
            while matches!(cur.peek(), Some(c) if c.is_ascii_digit()) {
                cur.bump();
            }
            if cur.peek() == Some('.') && matches!(cur.peek_at(1), Some(d) if d.is_ascii_digit()) {
                cur.bump();
                while matches!(cur.peek(), Some(c) if c.is_ascii_digit()) {
                    cur.bump();
                }
            }
            if matches!(cur.peek(), Some('L' | 'l' | 'f' | 'F' | 'd' | 'D')) {
                cur.bump();
            }
            LexemeKind::Number
        } else if c == '"' || c == '\'' {
            cur.bump();
            while let Some(d) = cur.peek() {
                if d == '\n' {
                    break;
                }
                cur.bump();
                if d == '\\' {
                    cur.bump();
                } else if d == c {
                    break;
                }
            }
            if c == '"' {
                LexemeKind::Str
            } else {
                LexemeKind::Char
            }
        } else if let Some(p) = PUNCT.iter().find(|p| cur.rest().starts_with(**p)) {
            for _ in 0..p.len() {
                cur.bump();
            }
            LexemeKind::Punct
        } else {
            cur.bump();
            LexemeKind::Unknown
        };
        out.push(Lexeme {
            kind,
            text: src[start..cur.pos].to_string(),
            offset: start,
            line,
            column,
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn texts(src: &str) -> Vec<String> {
        scan(src).into_iter().map(|l| l.text).collect()
    }

    #[test]
    fn splits_operators_longest_first() {
        assert_eq!(texts("a<=b&&c++"), ["a", "<=", "b", "&&", "c", "++"]);
        assert_eq!(texts("x+=1;"), ["x", "+=", "1", ";"]);
    }

    #[test]
    fn literals_are_single_lexemes() {
        let l = scan(r#"s = "a b\"c" + 'x';"#);
        assert_eq!(l[2].text, r#""a b\"c""#);
        assert_eq!(l[2].kind, LexemeKind::Str);
        assert_eq!(l[4].kind, LexemeKind::Char);
    }

    #[test]
    fn comments_skipped_and_positions_tracked() {
        let l = scan("// hi\n\tint /* x */ y;");
        assert_eq!(l[0].text, "int");
        assert_eq!((l[0].line, l[0].column), (2, 5));
        assert_eq!(l[1].text, "y");
    }

    #[test]
    fn unknown_characters_survive() {
        let l = scan("a # b");
        assert_eq!(l[1].kind, LexemeKind::Unknown);
        assert_eq!(l.len(), 3);
    }
}
