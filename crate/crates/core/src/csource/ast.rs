use serde::{Deserialize, Serialize};

/// Just enough type information to decide scalar-ness and volatility.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CType {
    /// Base type words, e.g. `unsigned int`, `int32_t`, `struct S0`.
    pub base: String,
    pub pointers: u8,
    pub array_dims: u8,
    pub volatile: bool,
    pub is_const: bool,
}

impl CType {
    pub fn is_aggregate_base(&self) -> bool {
        self.base.starts_with("struct ") || self.base.starts_with("union ")
    }

    /// Integer or pointer-compatible scalar that can be passed as `int`.
    pub fn is_scalar(&self) -> bool {
        if self.array_dims > 0 {
            return false;
        }
        if self.pointers > 0 {
            return true;
        }
        !self.is_aggregate_base() && self.base != "void"
    }

    pub fn is_pointer(&self) -> bool {
        self.array_dims == 0 && self.pointers > 0
    }

    pub fn is_floating(&self) -> bool {
        self.pointers == 0 && (self.base.contains("float") || self.base.contains("double"))
    }

    pub fn is_plain_int(&self) -> bool {
        self.pointers == 0 && self.array_dims == 0 && (self.base == "int" || self.base == "signed int")
    }
}

#[derive(Debug, Clone)]
pub struct Program {
    pub globals: Vec<VarDecl>,
    pub functions: Vec<Function>,
}

impl Program {
    pub fn global(&self, name: &str) -> Option<&VarDecl> {
        self.globals.iter().find(|g| g.name == name)
    }

    pub fn function(&self, name: &str) -> Option<&Function> {
        self.functions.iter().find(|f| f.name == name)
    }
}

#[derive(Debug, Clone)]
pub struct Function {
    pub name: String,
    pub line: u32,
    pub params: Vec<VarDecl>,
    pub body: Block,
}

#[derive(Debug, Clone)]
pub struct VarDecl {
    pub name: String,
    pub ty: CType,
    pub line: u32,
    pub init: Option<Expr>,
}

#[derive(Debug, Clone)]
pub struct Block {
    pub open_line: u32,
    pub close_line: u32,
    /// Whether the closing brace is the first token on its line.
    pub close_first_on_line: bool,
    pub stmts: Vec<Stmt>,
}

#[derive(Debug, Clone)]
pub struct Stmt {
    pub line: u32,
    /// Last source line touched by the statement.
    pub end_line: u32,
    /// Whether the statement's first token starts its line.
    pub first_on_line: bool,
    pub kind: StmtKind,
}

#[derive(Debug, Clone)]
pub enum StmtKind {
    Decl(Vec<VarDecl>),
    Expr(Expr),
    Block(Block),
    If {
        cond: Expr,
        then: Box<Stmt>,
        els: Option<Box<Stmt>>,
    },
    While {
        cond: Expr,
        body: Box<Stmt>,
    },
    DoWhile {
        body: Box<Stmt>,
        cond: Expr,
    },
    For {
        init: Option<Box<Stmt>>,
        cond: Option<Expr>,
        step: Option<Expr>,
        body: Box<Stmt>,
    },
    Switch {
        cond: Expr,
        body: Box<Stmt>,
    },
    Case(Option<Expr>, Box<Stmt>),
    Label(String, Box<Stmt>),
    Goto(String),
    Return(Option<Expr>),
    Break,
    Continue,
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnOp {
    Neg,
    Plus,
    Not,
    BitNot,
    Deref,
    AddrOf,
    PreInc,
    PreDec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Mul,
    Div,
    Mod,
    Add,
    Sub,
    Shl,
    Shr,
    Lt,
    Gt,
    Le,
    Ge,
    Eq,
    Ne,
    BitAnd,
    BitXor,
    BitOr,
    LogAnd,
    LogOr,
}

#[derive(Debug, Clone)]
pub struct Expr {
    pub line: u32,
    pub kind: ExprKind,
}

#[derive(Debug, Clone)]
pub enum ExprKind {
    Ident(String),
    Int(String),
    Float(String),
    Str(String),
    Char(String),
    Unary(UnOp, Box<Expr>),
    PostInc(Box<Expr>),
    PostDec(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    /// `lhs op= rhs`; `None` is plain assignment.
    Assign(Option<BinOp>, Box<Expr>, Box<Expr>),
    Cond(Box<Expr>, Box<Expr>, Box<Expr>),
    Call(Box<Expr>, Vec<Expr>),
    Index(Box<Expr>, Box<Expr>),
    Member(Box<Expr>, String, bool),
    Cast(CType, Box<Expr>),
    SizeofType(CType),
    Sizeof(Box<Expr>),
    Comma(Box<Expr>, Box<Expr>),
    InitList(Vec<Expr>),
}

impl Expr {
    pub fn ident(&self) -> Option<&str> {
        match &self.kind {
            ExprKind::Ident(n) => Some(n),
            _ => None,
        }
    }

    /// Visit every sub-expression in pre-order.
    pub fn walk<'a>(&'a self, f: &mut dyn FnMut(&'a Expr)) {
        f(self);
        match &self.kind {
            ExprKind::Ident(_)
            | ExprKind::Int(_)
            | ExprKind::Float(_)
            | ExprKind::Str(_)
            | ExprKind::Char(_)
            | ExprKind::SizeofType(_) => {}
            ExprKind::Unary(_, e)
            | ExprKind::PostInc(e)
            | ExprKind::PostDec(e)
            | ExprKind::Member(e, _, _)
            | ExprKind::Cast(_, e)
            | ExprKind::Sizeof(e) => e.walk(f),
            ExprKind::Binary(_, a, b)
            | ExprKind::Assign(_, a, b)
            | ExprKind::Index(a, b)
            | ExprKind::Comma(a, b) => {
                a.walk(f);
                b.walk(f);
            }
            ExprKind::Cond(a, b, c) => {
                a.walk(f);
                b.walk(f);
                c.walk(f);
            }
            ExprKind::Call(callee, args) => {
                callee.walk(f);
                for a in args {
                    a.walk(f);
                }
            }
            ExprKind::InitList(items) => {
                for i in items {
                    i.walk(f);
                }
            }
        }
    }
}

impl Stmt {
    /// Expressions directly owned by this statement (not by nested statements).
    pub fn own_exprs(&self) -> Vec<&Expr> {
        match &self.kind {
            StmtKind::Decl(decls) => decls.iter().filter_map(|d| d.init.as_ref()).collect(),
            StmtKind::Expr(e) => vec![e],
            StmtKind::If { cond, .. }
            | StmtKind::While { cond, .. }
            | StmtKind::DoWhile { cond, .. }
            | StmtKind::Switch { cond, .. } => vec![cond],
            StmtKind::For { cond, step, .. } => cond.iter().chain(step.iter()).collect(),
            StmtKind::Return(Some(e)) => vec![e],
            StmtKind::Case(Some(e), _) => vec![e],
            _ => Vec::new(),
        }
    }

    /// Nested statements in source order.
    pub fn children(&self) -> Vec<&Stmt> {
        match &self.kind {
            StmtKind::Block(b) => b.stmts.iter().collect(),
            StmtKind::If { then, els, .. } => {
                let mut v = vec![then.as_ref()];
                if let Some(e) = els {
                    v.push(e);
                }
                v
            }
            StmtKind::While { body, .. }
            | StmtKind::DoWhile { body, .. }
            | StmtKind::Switch { body, .. }
            | StmtKind::Case(_, body)
            | StmtKind::Label(_, body) => vec![body],
            StmtKind::For { init, body, .. } => {
                let mut v = Vec::new();
                if let Some(i) = init {
                    v.push(i.as_ref());
                }
                v.push(body);
                v
            }
            _ => Vec::new(),
        }
    }

    pub fn is_loop(&self) -> bool {
        matches!(
            self.kind,
            StmtKind::While { .. } | StmtKind::DoWhile { .. } | StmtKind::For { .. }
        )
    }
}
