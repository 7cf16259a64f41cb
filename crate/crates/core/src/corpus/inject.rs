use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::stub::{prototype, DEFAULT_ARITY, DEFAULT_CALLEE};
use super::{CorpusError, O0Check, OpaqueCallSite, TestProgram};
use crate::csource::{self, BinOp, Block, CType, Expr, ExprKind, Stmt, StmtKind, UnOp};

#[derive(Debug, Clone)]
pub struct InjectOptions {
    pub callee: String,
    pub arity: usize,
    pub compile_check: Option<O0Check>,
    /// Additional sites tried after a post-injection compile failure.
    pub max_retries: usize,
}

impl Default for InjectOptions {
    fn default() -> Self {
        InjectOptions {
            callee: DEFAULT_CALLEE.into(),
            arity: DEFAULT_ARITY,
            compile_check: None,
            max_retries: 5,
        }
    }
}

/// A statement boundary where a call can be inserted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Site {
    pub function: String,
    pub line: u32,
    /// Eligible locals in declaration order, with the cast needed to pass them as `int`.
    pub vars: Vec<(String, Option<&'static str>)>,
    /// Outer locals hidden by an inner declaration at this site.
    pub shadowed: Vec<String>,
}

#[derive(Debug, Clone)]
struct Binding {
    name: String,
    ty: CType,
    param: bool,
    initialized: bool,
    order: usize,
}

struct Walker {
    scopes: Vec<Vec<Binding>>,
    order: usize,
    function: String,
    sites: Vec<Site>,
}

impl Walker {
    fn visible(&self) -> (Vec<&Binding>, Vec<String>) {
        let mut seen: Vec<&Binding> = Vec::new();
        let mut shadowed = Vec::new();
        for scope in self.scopes.iter().rev() {
            for b in scope.iter().rev() {
                if seen.iter().any(|s| s.name == b.name) {
                    if !b.param && !shadowed.contains(&b.name) {
                        shadowed.push(b.name.clone());
                    }
                } else {
                    seen.push(b);
                }
            }
        }
        (seen, shadowed)
    }

    fn mark_initialized(&mut self, name: &str) {
        for scope in self.scopes.iter_mut().rev() {
            if let Some(b) = scope.iter_mut().rev().find(|b| b.name == name) {
                b.initialized = true;
                return;
            }
        }
    }

    fn declare(&mut self, name: &str, ty: &CType, initialized: bool, param: bool) {
        self.order += 1;
        let b = Binding {
            name: name.to_string(),
            ty: ty.clone(),
            param,
            initialized,
            order: self.order,
        };
        self.scopes.last_mut().expect("scope").push(b);
    }

    fn record_site(&mut self, line: u32) {
        let (visible, shadowed) = self.visible();
        let mut eligible: Vec<&Binding> = visible
            .into_iter()
            .filter(|b| !b.param && b.initialized && b.ty.is_scalar() && !b.ty.is_floating())
            .collect();
        if eligible.is_empty() {
            return;
        }
        eligible.sort_by_key(|b| b.order);
        let vars = eligible
            .iter()
            .map(|b| {
                let cast = if b.ty.is_pointer() { Some("(int)(long)") } else { None };
                (b.name.clone(), cast)
            })
            .collect();
        self.sites.push(Site {
            function: self.function.clone(),
            line,
            vars,
            shadowed,
        });
    }

    fn assignments(&mut self, e: &Expr) {
        let mut names = Vec::new();
        unconditional_assignments(e, &mut names);
        for n in names {
            self.mark_initialized(&n);
        }
    }

    fn block(&mut self, b: &Block) {
        self.scopes.push(Vec::new());
        for s in &b.stmts {
            let site_ok = s.first_on_line
                && !matches!(s.kind, StmtKind::Case(..) | StmtKind::Label(..) | StmtKind::Empty);
            if site_ok {
                self.record_site(s.line);
            }
            self.stmt(s);
        }
        self.scopes.pop();
    }

    fn stmt(&mut self, s: &Stmt) {
        match &s.kind {
            StmtKind::Decl(decls) => {
                for d in decls {
                    self.declare(&d.name, &d.ty, d.init.is_some(), false);
                    if let Some(init) = &d.init {
                        self.assignments(init);
                    }
                }
            }
            StmtKind::Expr(e) => self.assignments(e),
            StmtKind::Block(b) => self.block(b),
            StmtKind::If { cond, then, els } => {
                self.assignments(cond);
                self.nested(then);
                if let Some(e) = els {
                    self.nested(e);
                }
            }
            StmtKind::While { cond, body } | StmtKind::Switch { cond, body } => {
                self.assignments(cond);
                self.nested(body);
            }
            StmtKind::DoWhile { body, .. } => self.nested(body),
            StmtKind::For { init, body, .. } => {
                self.scopes.push(Vec::new());
                if let Some(i) = init {
                    self.stmt(i);
                }
                self.nested(body);
                self.scopes.pop();
            }
            StmtKind::Case(_, body) | StmtKind::Label(_, body) => self.nested(body),
            StmtKind::Return(_) | StmtKind::Goto(_) | StmtKind::Break | StmtKind::Continue | StmtKind::Empty => {}
        }
    }

    /// Walk a statement whose assignments may not execute.
    fn nested(&mut self, s: &Stmt) {
        let saved: Vec<Vec<bool>> = self
            .scopes
            .iter()
            .map(|sc| sc.iter().map(|b| b.initialized).collect())
            .collect();
        self.stmt(s);
        for (scope, flags) in self.scopes.iter_mut().zip(saved) {
            for (b, f) in scope.iter_mut().zip(flags) {
                b.initialized = f;
            }
        }
    }
}

/// Names assigned by `e` on every evaluation path.
fn unconditional_assignments(e: &Expr, out: &mut Vec<String>) {
    match &e.kind {
        ExprKind::Assign(_, lhs, rhs) => {
            unconditional_assignments(rhs, out);
            if let Some(n) = lhs.ident() {
                out.push(n.to_string());
            } else {
                unconditional_assignments(lhs, out);
            }
        }
        ExprKind::Binary(BinOp::LogAnd | BinOp::LogOr, a, _) => unconditional_assignments(a, out),
        ExprKind::Cond(c, _, _) => unconditional_assignments(c, out),
        ExprKind::Unary(UnOp::AddrOf, _) | ExprKind::Sizeof(_) => {}
        ExprKind::Binary(_, a, b) | ExprKind::Index(a, b) | ExprKind::Comma(a, b) => {
            unconditional_assignments(a, out);
            unconditional_assignments(b, out);
        }
        ExprKind::Unary(_, a)
        | ExprKind::PostInc(a)
        | ExprKind::PostDec(a)
        | ExprKind::Member(a, _, _)
        | ExprKind::Cast(_, a) => unconditional_assignments(a, out),
        ExprKind::Call(c, args) => {
            unconditional_assignments(c, out);
            for a in args {
                unconditional_assignments(a, out);
            }
        }
        ExprKind::InitList(items) => {
            for i in items {
                unconditional_assignments(i, out);
            }
        }
        _ => {}
    }
}

/// All statement boundaries with at least one eligible local, in source order.
pub fn eligible_sites(program: &csource::Program) -> Vec<Site> {
    let mut sites = Vec::new();
    for f in &program.functions {
        let mut w = Walker {
            scopes: vec![Vec::new()],
            order: 0,
            function: f.name.clone(),
            sites: Vec::new(),
        };
        for p in &f.params {
            w.declare(&p.name, &p.ty, true, true);
        }
        w.block(&f.body);
        sites.extend(w.sites);
    }
    sites
}

fn render_call(site: &Site, opts: &InjectOptions) -> (String, Vec<String>) {
    let arity = opts.arity.max(1);
    let keep = site.vars.len().min(arity);
    let chosen = &site.vars[site.vars.len() - keep..];
    let mut args: Vec<String> = chosen
        .iter()
        .map(|(n, cast)| format!("{}{n}", cast.unwrap_or("")))
        .collect();
    while args.len() < arity {
        args.push("0".into());
    }
    let call = format!(
        "{} {}({});",
        prototype(arity, &opts.callee),
        opts.callee,
        args.join(", ")
    );
    (call, chosen.iter().map(|(n, _)| n.clone()).collect())
}

fn insert_line(source: &str, line: u32, text: &str) -> String {
    let lines: Vec<&str> = source.split_inclusive('\n').collect();
    let idx = (line as usize - 1).min(lines.len());
    let indent: String = lines
        .get(idx)
        .map(|l| l.chars().take_while(|c| *c == ' ' || *c == '\t').collect())
        .unwrap_or_default();
    let mut out = String::with_capacity(source.len() + text.len() + indent.len() + 1);
    for l in &lines[..idx] {
        out.push_str(l);
    }
    if idx > 0 && !out.ends_with('\n') {
        out.push('\n');
    }
    out.push_str(&indent);
    out.push_str(text);
    out.push('\n');
    for l in &lines[idx..] {
        out.push_str(l);
    }
    out
}

/// Insert one call to the opaque stub at a seeded, uniformly chosen site.
pub fn inject_opaque_call(
    program: &TestProgram,
    seed: u64,
    opts: &InjectOptions,
) -> Result<TestProgram, CorpusError> {
    if program.injected_call.is_some() {
        return Err(CorpusError::AlreadyInjected);
    }
    let ast = csource::parse(&program.source_text)?;
    let mut sites = eligible_sites(&ast);
    if sites.is_empty() {
        return Err(CorpusError::NoEligibleSite);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sites.shuffle(&mut rng);
    let mut last_log = String::new();
    let attempts = sites.len().min(opts.max_retries + 1);
    for site in sites.iter().take(attempts) {
        let (call, argument_vars) = render_call(site, opts);
        let text = insert_line(&program.source_text, site.line, &call);
        if let Some(check) = &opts.compile_check {
            if let Err(log) = check.compiles(&text) {
                last_log = log;
                continue;
            }
        }
        if !site.shadowed.is_empty() {
            log::debug!(
                "injection at {}:{} skips shadowed {:?}",
                site.function,
                site.line,
                site.shadowed
            );
        }
        let mut out = TestProgram::new(text, program.source_path.clone());
        out.source_path = program
            .source_path
            .with_file_name(format!("{}.c", out.id));
        out.injected_call = Some(OpaqueCallSite {
            line: site.line,
            callee: opts.callee.clone(),
            argument_vars,
            function: site.function.clone(),
        });
        out.recipe = program.recipe.clone();
        out.parent_id = Some(program.id.clone());
        return Ok(out);
    }
    Err(CorpusError::PostInjectionCompileFailure {
        attempts,
        last_log,
    })
}
