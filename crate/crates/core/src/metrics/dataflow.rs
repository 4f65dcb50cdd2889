//! Def-use edges over a [`MiniAst`] by forward reaching-definitions.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::ast::{MiniAst, Node, NodeKind, Span};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum DefKind {
    Param,
    Decl,
    Assign,
    /// `x += e`, `x++` and friends: a use immediately followed by a def.
    Update,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Role {
    Def(DefKind),
    Use,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Occurrence {
    pub name: String,
    pub span: Span,
    pub role: Role,
    /// Kind of the syntactic parent of the identifier.
    pub context: NodeKind,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct DataflowGraph {
    pub nodes: Vec<Occurrence>,
    /// `(def, use)` indices into `nodes`, sorted and unique.
    pub edges: Vec<(usize, usize)>,
}

impl DataflowGraph {
    /// Variable names in order of first occurrence.
    pub fn variable_order(&self) -> Vec<&str> {
        let mut seen = Vec::new();
        for n in &self.nodes {
            if !seen.contains(&n.name.as_str()) {
                seen.push(n.name.as_str());
            }
        }
        seen
    }
}

/// Reaching definitions; `None` means the path is dead (after `return`).
type State = Option<BTreeMap<String, BTreeSet<usize>>>;

fn merge(a: State, b: State) -> State {
    match (a, b) {
        (None, s) | (s, None) => s,
        (Some(mut a), Some(b)) => {
            for (k, v) in b {
                a.entry(k).or_default().extend(v);
            }
            Some(a)
        }
    }
}

struct Builder {
    nodes: Vec<Occurrence>,
    edges: BTreeSet<(usize, usize)>,
    /// Stable id per source position so loop re-visits reuse occurrences.
    by_pos: BTreeMap<(usize, u8), usize>,
}

impl Builder {
    fn occurrence(&mut self, ident: &Node, role: Role, context: NodeKind) -> usize {
        let tag = match role {
            Role::Use => 0,
            Role::Def(_) => 1,
        };
        let key = (ident.span.start, tag);
        if let Some(&id) = self.by_pos.get(&key) {
            return id;
        }
        let id = self.nodes.len();
        self.nodes.push(Occurrence {
            name: ident.text.clone().unwrap_or_default(),
            span: ident.span,
            role,
            context,
        });
        self.by_pos.insert(key, id);
        id
    }

    fn use_var(&mut self, ident: &Node, context: NodeKind, st: &mut State) {
        let u = self.occurrence(ident, Role::Use, context);
        if let Some(map) = st {
            if let Some(defs) = map.get(ident.text.as_deref().unwrap_or_default()) {
                for &d in defs {
                    self.edges.insert((d, u));
                }
            }
        }
    }

    fn def_var(&mut self, ident: &Node, kind: DefKind, context: NodeKind, st: &mut State) {
        let d = self.occurrence(ident, Role::Def(kind), context);
        if let Some(map) = st {
            let name = ident.text.clone().unwrap_or_default();
            map.insert(name, BTreeSet::from([d]));
        }
    }

    fn expr(&mut self, e: &Node, parent: NodeKind, st: &mut State) {
        match e.kind {
            NodeKind::Ident => self.use_var(e, parent, st),
            NodeKind::Assign => {
                let (target, op, value) = (&e.children[0], &e.children[1], &e.children[2]);
                let compound = op.text.as_deref() != Some("=");
                if target.kind == NodeKind::Ident {
                    if compound {
                        self.use_var(target, NodeKind::Assign, st);
                    }
                    self.expr(value, NodeKind::Assign, st);
                    let kind = if compound {
                        DefKind::Update
                    } else {
                        DefKind::Assign
                    };
                    self.def_var(target, kind, NodeKind::Assign, st);
                } else {
                    self.expr(target, NodeKind::Assign, st);
                    self.expr(value, NodeKind::Assign, st);
                }
            }
            NodeKind::Unary | NodeKind::Postfix => {
                let op_first = e.children[0].kind == NodeKind::Operator;
                let (op, operand) = if op_first {
                    (&e.children[0], &e.children[1])
                } else {
                    (&e.children[1], &e.children[0])
                };
                let is_step = matches!(op.text.as_deref(), Some("++") | Some("--"));
                if is_step && operand.kind == NodeKind::Ident {
                    self.use_var(operand, e.kind, st);
                    self.def_var(operand, DefKind::Update, e.kind, st);
                } else {
                    self.expr(operand, e.kind, st);
                }
            }
            NodeKind::Conditional => {
                self.expr(&e.children[0], e.kind, st);
                let mut a = st.clone();
                let mut b = st.clone();
                self.expr(&e.children[1], e.kind, &mut a);
                self.expr(&e.children[2], e.kind, &mut b);
                *st = merge(a, b);
            }
            _ => {
                for c in &e.children {
                    if !c.kind.is_terminal() || c.kind == NodeKind::Ident {
                        self.expr(c, e.kind, st);
                    }
                }
            }
        }
    }

    fn local_var(&mut self, decl: &Node, st: &mut State, scope: &mut Vec<String>) {
        for d in decl.children.iter().filter(|c| c.kind == NodeKind::Declarator) {
            let ident = &d.children[0];
            if let Some(init) = d.children.get(1) {
                self.expr(init, NodeKind::Declarator, st);
            }
            self.def_var(ident, DefKind::Decl, NodeKind::Declarator, st);
            scope.push(ident.text.clone().unwrap_or_default());
        }
    }

    fn close_scope(st: &mut State, scope: &[String]) {
        if let Some(map) = st {
            for name in scope {
                map.remove(name);
            }
        }
    }

    fn stmt(&mut self, s: &Node, st: &mut State, scope: &mut Vec<String>) {
        match s.kind {
            NodeKind::Block => {
                let mut inner = Vec::new();
                for c in &s.children {
                    self.stmt(c, st, &mut inner);
                }
                Self::close_scope(st, &inner);
            }
            NodeKind::LocalVar => self.local_var(s, st, scope),
            NodeKind::ExprStmt => self.expr(&s.children[0], s.kind, st),
            NodeKind::Return => {
                if let Some(e) = s.children.first() {
                    self.expr(e, s.kind, st);
                }
                *st = None;
            }
            NodeKind::If => {
                self.expr(&s.children[0], s.kind, st);
                let mut then_st = st.clone();
                self.branch(&s.children[1], &mut then_st);
                let mut else_st = st.clone();
                if let Some(e) = s.children.get(2) {
                    self.branch(e, &mut else_st);
                }
                *st = merge(then_st, else_st);
            }
            NodeKind::While => {
                self.run_loop(Some(&s.children[0]), &s.children[1], None, st);
            }
            NodeKind::For => {
                let mut for_scope = Vec::new();
                let mut cond = None;
                let mut update = None;
                for c in &s.children[..s.children.len() - 1] {
                    match c.kind {
                        NodeKind::ForInit => {
                            for i in &c.children {
                                if i.kind == NodeKind::LocalVar {
                                    self.local_var(i, st, &mut for_scope);
                                } else {
                                    self.expr(i, c.kind, st);
                                }
                            }
                        }
                        NodeKind::ForCond => cond = Some(&c.children[0]),
                        NodeKind::ForUpdate => update = Some(c),
                        _ => {}
                    }
                }
                let body = s.children.last().expect("for body");
                self.run_loop(cond, body, update, st);
                Self::close_scope(st, &for_scope);
            }
            _ => {}
        }
    }

    /// A branch body gets its own scope even when it is a bare statement.
    fn branch(&mut self, s: &Node, st: &mut State) {
        let mut scope = Vec::new();
        self.stmt(s, st, &mut scope);
        Self::close_scope(st, &scope);
    }

    /// Iterate the loop body until the reaching-definition state at the loop
    /// head stops growing. Edges are a set, so revisits are harmless.
    fn run_loop(&mut self, cond: Option<&Node>, body: &Node, update: Option<&Node>, st: &mut State) {
        let mut head = st.clone();
        loop {
            let mut cur = head.clone();
            if let Some(c) = cond {
                self.expr(c, NodeKind::ForCond, &mut cur);
            }
            let exit = cur.clone();
            self.branch(body, &mut cur);
            if let Some(u) = update {
                for e in &u.children {
                    self.expr(e, u.kind, &mut cur);
                }
            }
            let next = merge(head.clone(), cur);
            if next == head {
                *st = merge(exit, None);
                return;
            }
            head = next;
        }
    }
}

/// Compute def→use edges. Branches merge conservatively; loops iterate to a
/// fixpoint; declarations go out of scope at the end of their block.
pub fn dataflow(ast: &MiniAst) -> DataflowGraph {
    let mut b = Builder {
        nodes: Vec::new(),
        edges: BTreeSet::new(),
        by_pos: BTreeMap::new(),
    };
    let mut st: State = Some(BTreeMap::new());
    let mut scope = Vec::new();
    for top in &ast.root.children {
        if top.kind == NodeKind::Method {
            for c in &top.children {
                if c.kind == NodeKind::Params {
                    for p in &c.children {
                        b.def_var(&p.children[1], DefKind::Param, NodeKind::Param, &mut st);
                    }
                } else if c.kind == NodeKind::Block {
                    b.stmt(c, &mut st, &mut scope);
                }
            }
        } else {
            b.stmt(top, &mut st, &mut scope);
        }
    }
    // Occurrences were created in visiting order, which for loops can differ
    // from source order only by revisits; re-sort by position for stability.
    let mut order: Vec<usize> = (0..b.nodes.len()).collect();
    order.sort_by_key(|&i| (b.nodes[i].span.start, matches!(b.nodes[i].role, Role::Def(_))));
    let mut remap = vec![0; order.len()];
    for (new, &old) in order.iter().enumerate() {
        remap[old] = new;
    }
    let nodes = order.iter().map(|&i| b.nodes[i].clone()).collect();
    let mut edges: Vec<(usize, usize)> = b
        .edges
        .into_iter()
        .map(|(d, u)| (remap[d], remap[u]))
        .collect();
    edges.sort_unstable();
    DataflowGraph { nodes, edges }
}
