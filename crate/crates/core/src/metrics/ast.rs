//! Recursive-descent parser for the mini-Java subset.
//!
//! Accepts either a single method declaration or a bare sequence of
//! statements. Both parse to a tree rooted at [`NodeKind::Program`].

use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::lexer::{scan, Lexeme, LexemeKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum NodeKind {
    Program,
    Method,
    Params,
    Param,
    Block,
    LocalVar,
    Declarator,
    If,
    While,
    For,
    ForInit,
    ForCond,
    ForUpdate,
    Return,
    ExprStmt,
    Assign,
    Conditional,
    Binary,
    Unary,
    Postfix,
    Cast,
    Paren,
    Call,
    Args,
    Member,
    Index,
    NewArray,
    // terminals
    Modifier,
    TypeName,
    Name,
    Ident,
    IntLit,
    StrLit,
    CharLit,
    BoolLit,
    NullLit,
    Operator,
    Break,
    Continue,
    Empty,
}

impl NodeKind {
    pub fn is_terminal(self) -> bool {
        self >= NodeKind::Modifier
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Node {
    pub kind: NodeKind,
    /// Source text for terminals.
    pub text: Option<String>,
    pub span: Span,
    pub children: Vec<Node>,
}

impl Node {
    fn leaf(kind: NodeKind, lx: &Lexeme) -> Node {
        Node {
            kind,
            text: Some(lx.text.clone()),
            span: Span {
                start: lx.offset,
                end: lx.end(),
            },
            children: Vec::new(),
        }
    }

    fn inner(kind: NodeKind, start: usize, end: usize, children: Vec<Node>) -> Node {
        Node {
            kind,
            text: None,
            span: Span { start, end },
            children,
        }
    }

    /// Label used for kind-labeled subtree comparison. Identifiers and
    /// literals collapse to their kind; keyword-like terminals keep their text.
    pub fn label(&self) -> String {
        match self.kind {
            NodeKind::Operator | NodeKind::Modifier | NodeKind::TypeName => {
                self.text.clone().unwrap_or_default()
            }
            k => k.to_string(),
        }
    }

    /// S-expression of the whole subtree under `self`, by [`Node::label`].
    pub fn signature(&self) -> String {
        if self.children.is_empty() {
            return self.label();
        }
        let mut s = format!("({}", self.label());
        for c in &self.children {
            s.push(' ');
            s.push_str(&c.signature());
        }
        s.push(')');
        s
    }

    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a Node)) {
        f(self);
        for c in &self.children {
            c.walk(f);
        }
    }

    pub fn count(&self) -> usize {
        1 + self.children.iter().map(Node::count).sum::<usize>()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MiniAst {
    pub root: Node,
}

impl MiniAst {
    /// Signatures of every subtree with depth ≥ 2 (a node with at least one
    /// child), in pre-order.
    pub fn subtree_signatures(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.root.walk(&mut |n| {
            if !n.children.is_empty() {
                out.push(n.signature());
            }
        });
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("syntax error at {line}:{column}: expected {}, found {found:?}", expected.join(" | "))]
pub struct SyntaxError {
    pub line: usize,
    pub column: usize,
    pub expected: Vec<String>,
    pub found: String,
}

const MODIFIERS: &[&str] = &["public", "private", "protected", "static", "final"];
const PRIMITIVES: &[&str] = &[
    "int", "boolean", "char", "double", "long", "float", "short", "byte", "void", "String",
];
const RESERVED: &[&str] = &[
    "if", "else", "for", "while", "return", "break", "continue", "new", "true", "false", "null",
    "public", "private", "protected", "static", "final", "int", "boolean", "char", "double",
    "long", "float", "short", "byte", "void", "do", "class",
];

/// Reserved words of the mini-Java grammar, used as keyword tokens by the
/// weighted n-gram metric.
pub fn keywords() -> &'static [&'static str] {
    RESERVED
}

type PResult<T> = Result<T, SyntaxError>;

struct Parser {
    toks: Vec<Lexeme>,
    pos: usize,
    src_len: usize,
    eof_line: usize,
    eof_col: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Lexeme> {
        self.toks.get(self.pos)
    }

    fn peek_text(&self, n: usize) -> Option<&str> {
        self.toks.get(self.pos + n).map(|l| l.text.as_str())
    }

    fn at(&self, s: &str) -> bool {
        self.peek_text(0) == Some(s)
    }

    fn error(&self, expected: &[&str]) -> SyntaxError {
        let (line, column, found) = match self.peek() {
            Some(l) => (l.line, l.column, l.text.clone()),
            None => (self.eof_line, self.eof_col, "<eof>".to_string()),
        };
        SyntaxError {
            line,
            column,
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found,
        }
    }

    fn next(&mut self) -> Lexeme {
        let l = self.toks[self.pos].clone();
        self.pos += 1;
        l
    }

    fn expect(&mut self, s: &str) -> PResult<Lexeme> {
        if self.at(s) {
            Ok(self.next())
        } else {
            Err(self.error(&[s]))
        }
    }

    fn last_end(&self) -> usize {
        if self.pos == 0 {
            0
        } else {
            self.toks[self.pos - 1].end()
        }
    }

    fn start(&self) -> usize {
        self.peek().map_or(self.src_len, |l| l.offset)
    }

    fn is_ident_at(&self, n: usize) -> bool {
        self.toks
            .get(self.pos + n)
            .is_some_and(|l| l.kind == LexemeKind::Word && !RESERVED.contains(&l.text.as_str()))
    }

    fn is_type_start_at(&self, n: usize) -> bool {
        match self.toks.get(self.pos + n) {
            Some(l) if l.kind == LexemeKind::Word => {
                PRIMITIVES.contains(&l.text.as_str()) || !RESERVED.contains(&l.text.as_str())
            }
            _ => false,
        }
    }

    /// Number of lexemes a type occupies at offset `n`, if one starts there.
    fn type_len_at(&self, n: usize) -> Option<usize> {
        if !self.is_type_start_at(n) {
            return None;
        }
        let mut len = 1;
        while self.peek_text(n + len) == Some("[") && self.peek_text(n + len + 1) == Some("]") {
            len += 2;
        }
        Some(len)
    }

    fn parse_type(&mut self) -> PResult<Node> {
        let Some(len) = self.type_len_at(0) else {
            return Err(self.error(&["type"]));
        };
        let first = self.next();
        let mut text = first.text.clone();
        for _ in 1..len {
            text.push_str(&self.next().text);
        }
        Ok(Node {
            kind: NodeKind::TypeName,
            text: Some(text),
            span: Span {
                start: first.offset,
                end: self.last_end(),
            },
            children: Vec::new(),
        })
    }

    fn looks_like_method(&self) -> bool {
        if self
            .peek_text(0)
            .is_some_and(|t| MODIFIERS.contains(&t))
        {
            return true;
        }
        match self.type_len_at(0) {
            Some(len) => self.is_ident_at(len) && self.peek_text(len + 1) == Some("("),
            None => false,
        }
    }

    fn program(&mut self) -> PResult<Node> {
        let mut children = Vec::new();
        if self.looks_like_method() {
            children.push(self.method()?);
        } else {
            while self.peek().is_some() {
                children.push(self.statement()?);
            }
        }
        if self.peek().is_some() {
            return Err(self.error(&["<eof>"]));
        }
        if children.is_empty() {
            return Err(self.error(&["statement", "method"]));
        }
        Ok(Node::inner(NodeKind::Program, 0, self.src_len, children))
    }

    fn method(&mut self) -> PResult<Node> {
        let start = self.start();
        let mut children = Vec::new();
        while self.peek_text(0).is_some_and(|t| MODIFIERS.contains(&t)) {
            let l = self.next();
            children.push(Node::leaf(NodeKind::Modifier, &l));
        }
        children.push(self.parse_type()?);
        if !self.is_ident_at(0) {
            return Err(self.error(&["identifier"]));
        }
        let name = self.next();
        children.push(Node::leaf(NodeKind::Name, &name));
        let open = self.expect("(")?;
        let mut params = Vec::new();
        if !self.at(")") {
            loop {
                let pstart = self.start();
                if self.type_len_at(0).is_none() {
                    return Err(self.error(&["type", ")"]));
                }
                let ty = self.parse_type()?;
                if !self.is_ident_at(0) {
                    return Err(self.error(&["identifier"]));
                }
                let id = self.next();
                params.push(Node::inner(
                    NodeKind::Param,
                    pstart,
                    self.last_end(),
                    vec![ty, Node::leaf(NodeKind::Ident, &id)],
                ));
                if self.at(",") {
                    self.next();
                } else {
                    break;
                }
            }
        }
        self.expect(")")?;
        if !params.is_empty() {
            children.push(Node::inner(
                NodeKind::Params,
                open.offset,
                self.last_end(),
                params,
            ));
        }
        if !self.at("{") {
            return Err(self.error(&["{"]));
        }
        children.push(self.block()?);
        Ok(Node::inner(NodeKind::Method, start, self.last_end(), children))
    }

    fn block(&mut self) -> PResult<Node> {
        let open = self.expect("{")?;
        let mut stmts = Vec::new();
        while !self.at("}") {
            if self.peek().is_none() {
                return Err(self.error(&["}"]));
            }
            stmts.push(self.statement()?);
        }
        self.next();
        Ok(Node::inner(NodeKind::Block, open.offset, self.last_end(), stmts))
    }

    fn is_declaration(&self) -> bool {
        match self.type_len_at(0) {
            Some(len) => self.is_ident_at(len),
            None => false,
        }
    }

    fn local_var(&mut self) -> PResult<Node> {
        let start = self.start();
        let ty = self.parse_type()?;
        let mut children = vec![ty];
        loop {
            let dstart = self.start();
            if !self.is_ident_at(0) {
                return Err(self.error(&["identifier"]));
            }
            let id = self.next();
            let mut dchildren = vec![Node::leaf(NodeKind::Ident, &id)];
            if self.at("=") {
                self.next();
                dchildren.push(self.expr()?);
            }
            children.push(Node::inner(
                NodeKind::Declarator,
                dstart,
                self.last_end(),
                dchildren,
            ));
            if self.at(",") {
                self.next();
            } else {
                break;
            }
        }
        Ok(Node::inner(NodeKind::LocalVar, start, self.last_end(), children))
    }

    fn paren_cond(&mut self) -> PResult<Node> {
        self.expect("(")?;
        let e = self.expr()?;
        self.expect(")")?;
        Ok(e)
    }

    fn statement(&mut self) -> PResult<Node> {
        let start = self.start();
        let Some(first) = self.peek() else {
            return Err(self.error(&["statement"]));
        };
        match first.text.as_str() {
            "{" => self.block(),
            ";" => {
                let l = self.next();
                Ok(Node::leaf(NodeKind::Empty, &l))
            }
            "if" => {
                self.next();
                let cond = self.paren_cond()?;
                let then = self.statement()?;
                let mut children = vec![cond, then];
                if self.at("else") {
                    self.next();
                    children.push(self.statement()?);
                }
                Ok(Node::inner(NodeKind::If, start, self.last_end(), children))
            }
            "while" => {
                self.next();
                let cond = self.paren_cond()?;
                let body = self.statement()?;
                Ok(Node::inner(
                    NodeKind::While,
                    start,
                    self.last_end(),
                    vec![cond, body],
                ))
            }
            "for" => self.for_stmt(),
            "return" => {
                self.next();
                let mut children = Vec::new();
                if !self.at(";") {
                    children.push(self.expr()?);
                }
                self.expect(";")?;
                Ok(Node::inner(NodeKind::Return, start, self.last_end(), children))
            }
            "break" | "continue" => {
                let l = self.next();
                self.expect(";")?;
                let kind = if l.text == "break" {
                    NodeKind::Break
                } else {
                    NodeKind::Continue
                };
                Ok(Node::leaf(kind, &l))
            }
            _ if self.is_declaration() => {
                let decl = self.local_var()?;
                self.expect(";")?;
                Ok(decl)
            }
            _ => {
                let e = self.expr()?;
                self.expect(";")?;
                Ok(Node::inner(
                    NodeKind::ExprStmt,
                    start,
                    self.last_end(),
                    vec![e],
                ))
            }
        }
    }

    fn expr_list(&mut self, kind: NodeKind, stop: &str) -> PResult<Option<Node>> {
        if self.at(stop) {
            return Ok(None);
        }
        let start = self.start();
        let mut items = vec![self.expr()?];
        while self.at(",") {
            self.next();
            items.push(self.expr()?);
        }
        Ok(Some(Node::inner(kind, start, self.last_end(), items)))
    }

    fn for_stmt(&mut self) -> PResult<Node> {
        let start = self.start();
        self.next();
        self.expect("(")?;
        let mut children = Vec::new();
        if !self.at(";") {
            let istart = self.start();
            let init = if self.is_declaration() {
                self.local_var()?
            } else {
                self.expr_list(NodeKind::ForInit, ";")?
                    .expect("non-empty init list")
            };
            let init = if init.kind == NodeKind::ForInit {
                init
            } else {
                Node::inner(NodeKind::ForInit, istart, self.last_end(), vec![init])
            };
            children.push(init);
        }
        self.expect(";")?;
        if !self.at(";") {
            let cstart = self.start();
            let c = self.expr()?;
            children.push(Node::inner(
                NodeKind::ForCond,
                cstart,
                self.last_end(),
                vec![c],
            ));
        }
        self.expect(";")?;
        if let Some(u) = self.expr_list(NodeKind::ForUpdate, ")")? {
            children.push(u);
        }
        self.expect(")")?;
        children.push(self.statement()?);
        Ok(Node::inner(NodeKind::For, start, self.last_end(), children))
    }

    fn expr(&mut self) -> PResult<Node> {
        let start = self.start();
        let lhs = self.conditional()?;
        let is_assign = self.peek().is_some_and(|l| {
            l.kind == LexemeKind::Punct
                && matches!(
                    l.text.as_str(),
                    "=" | "+=" | "-=" | "*=" | "/=" | "%=" | "&=" | "|=" | "^=" | "<<=" | ">>="
                )
        });
        if !is_assign {
            return Ok(lhs);
        }
        if !matches!(lhs.kind, NodeKind::Ident | NodeKind::Index | NodeKind::Member) {
            return Err(self.error(&[";", ")"]));
        }
        let op = self.next();
        let rhs = self.expr()?;
        Ok(Node::inner(
            NodeKind::Assign,
            start,
            self.last_end(),
            vec![lhs, Node::leaf(NodeKind::Operator, &op), rhs],
        ))
    }

    fn conditional(&mut self) -> PResult<Node> {
        let start = self.start();
        let cond = self.binary(0)?;
        if !self.at("?") {
            return Ok(cond);
        }
        self.next();
        let a = self.expr()?;
        self.expect(":")?;
        let b = self.conditional()?;
        Ok(Node::inner(
            NodeKind::Conditional,
            start,
            self.last_end(),
            vec![cond, a, b],
        ))
    }

    fn binary(&mut self, level: usize) -> PResult<Node> {
        const LEVELS: &[&[&str]] = &[
            &["||"],
            &["&&"],
            &["|"],
            &["^"],
            &["&"],
            &["==", "!="],
            &["<", "<=", ">", ">="],
            &["<<", ">>", ">>>"],
            &["+", "-"],
            &["*", "/", "%"],
        ];
        if level == LEVELS.len() {
            return self.unary();
        }
        let start = self.start();
        let mut lhs = self.binary(level + 1)?;
        while self
            .peek()
            .is_some_and(|l| l.kind == LexemeKind::Punct && LEVELS[level].contains(&l.text.as_str()))
        {
            let op = self.next();
            let rhs = self.binary(level + 1)?;
            lhs = Node::inner(
                NodeKind::Binary,
                start,
                self.last_end(),
                vec![lhs, Node::leaf(NodeKind::Operator, &op), rhs],
            );
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Node> {
        let start = self.start();
        if self
            .peek()
            .is_some_and(|l| matches!(l.text.as_str(), "!" | "-" | "+" | "++" | "--" | "~"))
        {
            let op = self.next();
            let operand = self.unary()?;
            return Ok(Node::inner(
                NodeKind::Unary,
                start,
                self.last_end(),
                vec![Node::leaf(NodeKind::Operator, &op), operand],
            ));
        }
        // (T) expr for primitive T
        if self.at("(")
            && self
                .peek_text(1)
                .is_some_and(|t| PRIMITIVES.contains(&t) && t != "void" && t != "String")
            && self.peek_text(2) == Some(")")
        {
            self.next();
            let ty = self.parse_type()?;
            self.expect(")")?;
            let operand = self.unary()?;
            return Ok(Node::inner(
                NodeKind::Cast,
                start,
                self.last_end(),
                vec![ty, operand],
            ));
        }
        self.postfix()
    }

    fn args(&mut self) -> PResult<Option<Node>> {
        let open = self.expect("(")?;
        let mut items = Vec::new();
        if !self.at(")") {
            items.push(self.expr()?);
            while self.at(",") {
                self.next();
                items.push(self.expr()?);
            }
        }
        self.expect(")")?;
        Ok((!items.is_empty()).then(|| {
            Node::inner(NodeKind::Args, open.offset, self.last_end(), items)
        }))
    }

    fn postfix(&mut self) -> PResult<Node> {
        let start = self.start();
        let mut e = self.primary()?;
        loop {
            match self.peek_text(0) {
                Some("[") => {
                    self.next();
                    let idx = self.expr()?;
                    self.expect("]")?;
                    e = Node::inner(NodeKind::Index, start, self.last_end(), vec![e, idx]);
                }
                Some(".") => {
                    self.next();
                    if !self
                        .peek()
                        .is_some_and(|l| l.kind == LexemeKind::Word)
                    {
                        return Err(self.error(&["identifier"]));
                    }
                    let name = self.next();
                    e = Node::inner(
                        NodeKind::Member,
                        start,
                        self.last_end(),
                        vec![e, Node::leaf(NodeKind::Name, &name)],
                    );
                    if self.at("(") {
                        let mut children = vec![e];
                        children.extend(self.args()?);
                        e = Node::inner(NodeKind::Call, start, self.last_end(), children);
                    }
                }
                Some("(") if e.kind == NodeKind::Ident => {
                    e.kind = NodeKind::Name;
                    let mut children = vec![e];
                    children.extend(self.args()?);
                    e = Node::inner(NodeKind::Call, start, self.last_end(), children);
                }
                Some("++") | Some("--") => {
                    let op = self.next();
                    e = Node::inner(
                        NodeKind::Postfix,
                        start,
                        self.last_end(),
                        vec![e, Node::leaf(NodeKind::Operator, &op)],
                    );
                }
                _ => return Ok(e),
            }
        }
    }

    fn primary(&mut self) -> PResult<Node> {
        let start = self.start();
        let Some(l) = self.peek().cloned() else {
            return Err(self.error(&["expression"]));
        };
        match l.kind {
            LexemeKind::Number => {
                self.next();
                Ok(Node::leaf(NodeKind::IntLit, &l))
            }
            LexemeKind::Str => {
                self.next();
                Ok(Node::leaf(NodeKind::StrLit, &l))
            }
            LexemeKind::Char => {
                self.next();
                Ok(Node::leaf(NodeKind::CharLit, &l))
            }
            LexemeKind::Word => match l.text.as_str() {
                "true" | "false" => {
                    self.next();
                    Ok(Node::leaf(NodeKind::BoolLit, &l))
                }
                "null" => {
                    self.next();
                    Ok(Node::leaf(NodeKind::NullLit, &l))
                }
                "new" => {
                    self.next();
                    if !self.is_type_start_at(0) {
                        return Err(self.error(&["type"]));
                    }
                    let t = self.next();
                    let ty = Node::leaf(NodeKind::TypeName, &t);
                    self.expect("[")?;
                    let size = self.expr()?;
                    self.expect("]")?;
                    Ok(Node::inner(
                        NodeKind::NewArray,
                        start,
                        self.last_end(),
                        vec![ty, size],
                    ))
                }
                _ if self.is_ident_at(0) => {
                    self.next();
                    Ok(Node::leaf(NodeKind::Ident, &l))
                }
                _ => Err(self.error(&["expression"])),
            },
            LexemeKind::Punct if l.text == "(" => {
                self.next();
                let e = self.expr()?;
                self.expect(")")?;
                Ok(Node::inner(NodeKind::Paren, start, self.last_end(), vec![e]))
            }
            _ => Err(self.error(&["expression"])),
        }
    }
}

/// Parse a mini-Java method or statement sequence.
pub fn parse_mini_java(code: &str) -> Result<MiniAst, SyntaxError> {
    let toks = scan(code);
    let (eof_line, eof_col) = {
        let line = code.matches('\n').count() + 1;
        let col = code.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
        (line, col)
    };
    let mut p = Parser {
        toks,
        pos: 0,
        src_len: code.len(),
        eof_line,
        eof_col,
    };
    if let Some(bad) = p.toks.iter().position(|l| l.kind == LexemeKind::Unknown) {
        p.pos = bad;
        return Err(p.error(&["token"]));
    }
    let root = p.program()?;
    Ok(MiniAst { root })
}
