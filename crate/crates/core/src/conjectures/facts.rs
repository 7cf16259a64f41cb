//! Static facts about a test program: global assignments, their
//! constituent variables and the assignment instances of each local.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::fold::{fold, operand_vars, parse_int_literal};
use super::{
    ConjectureError, Constituent, ConstituentClass, FunctionSpan, GlobalAssign, Instance,
    LhsStorage, SourceFacts, VarInstances,
};
use crate::corpus::TestProgram;
use crate::csource::{self, Block, Expr, ExprKind, Function, Program, Stmt, StmtKind, UnOp};

pub fn analyze_source(program: &TestProgram) -> Result<SourceFacts, ConjectureError> {
    let parsed = csource::parse(&program.source_text)?;
    let mut facts = facts_for(&parsed);
    facts.opaque_calls = program.injected_call.iter().cloned().collect();
    Ok(facts)
}

pub(crate) fn facts_for(program: &Program) -> SourceFacts {
    let mut facts = SourceFacts::default();
    let defined: BTreeSet<&str> = program.functions.iter().map(|f| f.name.as_str()).collect();
    let mut instances: BTreeMap<(String, String), BTreeMap<u32, Instance>> = BTreeMap::new();
    for f in &program.functions {
        facts.functions.push(FunctionSpan {
            name: f.name.clone(),
            start_line: f.line,
            end_line: f.body.close_line,
        });
        let mut w = Walker::new(program, &defined, f);
        w.block(&f.body);
        let (assigns, simplifiable) = w.finish_assigns();
        facts.global_assign_lines.extend(assigns);
        facts.simplifiable_lines.extend(simplifiable);
        for v in w.vars.iter().filter(|v| !v.param) {
            let slot = instances.entry((f.name.clone(), v.name.clone())).or_default();
            for d in &v.defs {
                slot.entry(d.line).or_insert(Instance {
                    assign_line: d.line,
                    scope_end_line: v.scope_end,
                });
            }
        }
    }
    facts.var_instances = instances
        .into_iter()
        .filter(|(_, i)| !i.is_empty())
        .map(|((function, variable), i)| VarInstances {
            function,
            variable,
            instances: i.into_values().collect(),
        })
        .collect();
    facts.simplifiable_lines.sort_unstable();
    facts.simplifiable_lines.dedup();
    facts
}

struct Def {
    line: u32,
    /// Canonical text of the assigned constant, if it is one.
    constant: Option<String>,
}

struct LocalVar {
    name: String,
    param: bool,
    scope_end: u32,
    addr_taken: bool,
    escapes: bool,
    defs: Vec<Def>,
    reads: Vec<u32>,
}

struct Pending {
    line: u32,
    storage: LhsStorage,
    operands: Vec<(String, usize)>,
    simplifiable: bool,
    indexes_global: BTreeSet<usize>,
    loops: Vec<(u32, u32)>,
}

struct Walker<'a> {
    program: &'a Program,
    defined: &'a BTreeSet<&'a str>,
    function: &'a Function,
    vars: Vec<LocalVar>,
    scopes: Vec<(HashMap<String, usize>, u32)>,
    loops: Vec<(u32, u32)>,
    pending: Vec<Pending>,
}

impl<'a> Walker<'a> {
    fn new(program: &'a Program, defined: &'a BTreeSet<&'a str>, function: &'a Function) -> Self {
        let mut w = Walker {
            program,
            defined,
            function,
            vars: Vec::new(),
            scopes: vec![(HashMap::new(), function.body.close_line)],
            loops: Vec::new(),
            pending: Vec::new(),
        };
        for p in &function.params {
            w.declare(&p.name, true);
        }
        w
    }

    fn declare(&mut self, name: &str, param: bool) -> usize {
        let (scope, end) = self.scopes.last_mut().expect("scope");
        let idx = self.vars.len();
        self.vars.push(LocalVar {
            name: name.to_string(),
            param,
            scope_end: *end,
            addr_taken: false,
            escapes: false,
            defs: Vec::new(),
            reads: Vec::new(),
        });
        scope.insert(name.to_string(), idx);
        idx
    }

    fn resolve(&self, name: &str) -> Option<usize> {
        self.scopes.iter().rev().find_map(|(s, _)| s.get(name).copied())
    }

    fn is_global(&self, name: &str) -> bool {
        self.resolve(name).is_none() && self.program.global(name).is_some()
    }

    fn block(&mut self, b: &Block) {
        self.scopes.push((HashMap::new(), b.close_line));
        for s in &b.stmts {
            self.stmt(s);
        }
        self.scopes.pop();
    }

    fn stmt(&mut self, s: &Stmt) {
        match &s.kind {
            StmtKind::Decl(decls) => {
                for d in decls {
                    let idx = self.declare(&d.name, false);
                    if let Some(init) = &d.init {
                        self.expr(init);
                        let constant = constant_sig(init);
                        self.vars[idx].defs.push(Def { line: d.line, constant });
                    }
                }
            }
            StmtKind::Block(b) => self.block(b),
            StmtKind::For { init, cond, step, body } => {
                self.scopes.push((HashMap::new(), s.end_line));
                self.loops.push((s.line, s.end_line));
                if let Some(i) = init {
                    self.stmt(i);
                }
                for e in cond.iter().chain(step.iter()) {
                    self.expr(e);
                }
                self.stmt(body);
                self.loops.pop();
                self.scopes.pop();
            }
            StmtKind::While { .. } | StmtKind::DoWhile { .. } => {
                self.loops.push((s.line, s.end_line));
                for e in s.own_exprs() {
                    self.expr(e);
                }
                for c in s.children() {
                    self.stmt(c);
                }
                self.loops.pop();
            }
            _ => {
                for e in s.own_exprs() {
                    self.expr(e);
                }
                for c in s.children() {
                    self.stmt(c);
                }
            }
        }
    }

    fn read(&mut self, name: &str, line: u32) {
        if let Some(i) = self.resolve(name) {
            self.vars[i].reads.push(line);
        }
    }

    fn expr(&mut self, e: &Expr) {
        match &e.kind {
            ExprKind::Ident(n) => self.read(n, e.line),
            ExprKind::Sizeof(_) | ExprKind::SizeofType(_) => {}
            ExprKind::Unary(UnOp::AddrOf, inner) => self.addr_of(inner),
            ExprKind::Unary(UnOp::PreInc | UnOp::PreDec, inner)
            | ExprKind::PostInc(inner)
            | ExprKind::PostDec(inner) => {
                if let Some(i) = inner.ident().and_then(|n| self.resolve(n)) {
                    self.vars[i].reads.push(e.line);
                    self.vars[i].defs.push(Def { line: e.line, constant: None });
                } else {
                    self.expr(inner);
                }
            }
            ExprKind::Assign(op, lhs, rhs) => {
                self.global_assign(e, lhs, rhs);
                match lhs.ident().and_then(|n| self.resolve(n)) {
                    Some(i) => {
                        if op.is_some() {
                            self.vars[i].reads.push(e.line);
                        }
                        let constant = if op.is_none() {
                            constant_sig(rhs)
                        } else {
                            None
                        };
                        self.vars[i].defs.push(Def { line: e.line, constant });
                    }
                    None if lhs.ident().is_some() => {}
                    None => self.expr(lhs),
                }
                self.expr(rhs);
            }
            ExprKind::Call(callee, args) => {
                let opaque = match callee.ident() {
                    Some(f) => self.resolve(f).is_none() && !self.defined.contains(f),
                    None => {
                        self.expr(callee);
                        false
                    }
                };
                for a in args {
                    if opaque {
                        if let Some(i) = strip_casts(a).ident().and_then(|n| self.resolve(n)) {
                            self.vars[i].escapes = true;
                        }
                    }
                    self.expr(a);
                }
            }
            ExprKind::Int(_) | ExprKind::Float(_) | ExprKind::Str(_) | ExprKind::Char(_) => {}
            ExprKind::Unary(_, a)
            | ExprKind::Member(a, _, _)
            | ExprKind::Cast(_, a) => self.expr(a),
            ExprKind::Binary(_, a, b) | ExprKind::Index(a, b) | ExprKind::Comma(a, b) => {
                self.expr(a);
                self.expr(b);
            }
            ExprKind::Cond(a, b, c) => {
                self.expr(a);
                self.expr(b);
                self.expr(c);
            }
            ExprKind::InitList(items) => {
                for i in items {
                    self.expr(i);
                }
            }
        }
    }

    fn addr_of(&mut self, e: &Expr) {
        match &e.kind {
            ExprKind::Ident(n) => {
                if let Some(i) = self.resolve(n) {
                    self.vars[i].addr_taken = true;
                }
            }
            ExprKind::Index(a, b) => {
                self.addr_of(a);
                self.expr(b);
            }
            ExprKind::Member(a, _, false) => self.addr_of(a),
            _ => self.expr(e),
        }
    }

    fn storage_of(&self, lhs: &Expr) -> Option<LhsStorage> {
        let mut cur = lhs;
        let mut indexed = false;
        loop {
            match &cur.kind {
                ExprKind::Index(base, _) => {
                    indexed = true;
                    cur = base;
                }
                ExprKind::Member(base, _, false) => cur = base,
                ExprKind::Ident(n) if self.is_global(n) => {
                    let g = self.program.global(n)?;
                    return Some(if g.ty.volatile {
                        LhsStorage::VolatileGlobal
                    } else if indexed {
                        LhsStorage::GlobalArrayElem
                    } else {
                        LhsStorage::GlobalVar
                    });
                }
                _ => return None,
            }
        }
    }

    /// Locals used inside subscripts of index chains rooted at a global.
    fn global_subscripts(&self, e: &Expr, out: &mut BTreeSet<usize>) {
        e.walk(&mut |x| {
            if matches!(x.kind, ExprKind::Index(..)) && self.rooted_at_global(x) {
                self.subscript_vars(x, out);
            }
        });
    }

    fn subscript_vars(&self, chain: &Expr, out: &mut BTreeSet<usize>) {
        match &chain.kind {
            ExprKind::Index(base, idx) => {
                idx.walk(&mut |x| {
                    if let Some(i) = x.ident().and_then(|n| self.resolve(n)) {
                        out.insert(i);
                    }
                });
                self.subscript_vars(base, out);
            }
            ExprKind::Member(base, _, false) => self.subscript_vars(base, out),
            _ => {}
        }
    }

    fn rooted_at_global(&self, e: &Expr) -> bool {
        match &e.kind {
            ExprKind::Index(base, _) | ExprKind::Member(base, _, false) => self.rooted_at_global(base),
            ExprKind::Ident(n) => self.is_global(n),
            _ => false,
        }
    }

    fn global_assign(&mut self, e: &Expr, lhs: &Expr, rhs: &Expr) {
        let Some(storage) = self.storage_of(lhs) else {
            return;
        };
        let is_local = |n: &str| self.resolve(n).is_some();
        let operands_set = operand_vars(rhs, &is_local);
        let surviving = fold(rhs, &is_local).vars();
        let simplifiable = surviving.len() < operands_set.len();
        let operands = operands_set
            .into_iter()
            .filter_map(|n| self.resolve(&n).map(|i| (n, i)))
            .collect();
        let mut indexes_global = BTreeSet::new();
        self.global_subscripts(lhs, &mut indexes_global);
        self.global_subscripts(rhs, &mut indexes_global);
        self.pending.push(Pending {
            line: e.line,
            storage,
            operands,
            simplifiable,
            indexes_global,
            loops: self.loops.clone(),
        });
    }

    fn finish_assigns(&self) -> (Vec<GlobalAssign>, Vec<u32>) {
        let mut assigns = Vec::new();
        let mut simplifiable = Vec::new();
        for p in &self.pending {
            if p.simplifiable {
                simplifiable.push(p.line);
                continue;
            }
            let constituents = p
                .operands
                .iter()
                .map(|(name, idx)| {
                    let (klass, evidence) = self.classify(*idx, p);
                    Constituent { name: name.clone(), klass, evidence }
                })
                .collect();
            assigns.push(GlobalAssign {
                line: p.line,
                function: self.function.name.clone(),
                lhs_storage: p.storage,
                constituents,
            });
        }
        (assigns, simplifiable)
    }

    fn classify(&self, idx: usize, p: &Pending) -> (ConstituentClass, String) {
        let v = &self.vars[idx];
        if !v.param && !v.addr_taken && !v.defs.is_empty() {
            let first = v.defs[0].constant.as_ref();
            if first.is_some() && v.defs.iter().all(|d| d.constant.as_ref() == first) {
                let lines: Vec<String> = v.defs.iter().map(|d| d.line.to_string()).collect();
                return (
                    ConstituentClass::ConstantValued,
                    format!("always `{}` (lines {})", first.unwrap(), lines.join(", ")),
                );
            }
        }
        let reason = if p.indexes_global.contains(&idx) {
            Some("indexes global storage")
        } else if v.escapes {
            Some("passed to an opaque call")
        } else {
            None
        };
        if let Some(reason) = reason {
            let later = v
                .reads
                .iter()
                .find(|&&r| r > p.line && r <= v.scope_end)
                .map(|r| format!("read again at line {r}"))
                .or_else(|| {
                    v.reads
                        .iter()
                        .find(|&&r| p.loops.iter().any(|&(s, e)| s <= r && r <= e))
                        .map(|r| format!("read at line {r} inside an enclosing loop"))
                });
            if let Some(later) = later {
                return (ConstituentClass::Unalterable, format!("{reason}; {later}"));
            }
        }
        (ConstituentClass::Other, String::new())
    }
}

fn strip_casts(e: &Expr) -> &Expr {
    match &e.kind {
        ExprKind::Cast(_, inner) => strip_casts(inner),
        _ => e,
    }
}

fn render_place(e: &Expr) -> Option<String> {
    Some(match &e.kind {
        ExprKind::Ident(n) => n.clone(),
        ExprKind::Index(b, i) => format!("{}[{}]", render_place(b)?, render_place(i)?),
        ExprKind::Member(b, f, arrow) => {
            format!("{}{}{}", render_place(b)?, if *arrow { "->" } else { "." }, f)
        }
        ExprKind::Int(t) => parse_int_literal(t)?.to_string(),
        _ => return None,
    })
}

/// Canonical text of `e` when it always evaluates to the same constant.
fn constant_sig(e: &Expr) -> Option<String> {
    let e = strip_casts(e);
    match &e.kind {
        ExprKind::Str(s) => Some(s.clone()),
        ExprKind::Unary(UnOp::AddrOf, inner) => render_place(inner).map(|p| format!("&{p}")),
        ExprKind::Assign(None, _, rhs) => constant_sig(rhs),
        _ => match fold(e, &|_| true) {
            super::Folded::Const(c) => Some(c.to_string()),
            super::Folded::Vars(_) => None,
        },
    }
}
