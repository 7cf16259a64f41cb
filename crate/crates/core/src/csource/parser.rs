use std::collections::HashSet;

use super::ast::*;
use super::lexer::{tokenize, Tok, Token};
use super::ParseError;

const STD_TYPEDEFS: &[&str] = &[
    "int8_t", "int16_t", "int32_t", "int64_t", "uint8_t", "uint16_t", "uint32_t", "uint64_t",
    "intptr_t", "uintptr_t", "size_t", "ptrdiff_t", "ssize_t", "FILE", "bool",
];

const BASE_WORDS: &[&str] = &[
    "void", "char", "short", "int", "long", "float", "double", "signed", "unsigned", "_Bool",
];

const QUALIFIERS: &[&str] = &[
    "const", "volatile", "static", "extern", "register", "inline", "auto", "__inline",
    "__inline__", "__extension__", "_Noreturn", "restrict", "__restrict",
];

#[derive(Debug, Default)]
struct DeclSpec {
    base: Vec<String>,
    volatile: bool,
    is_const: bool,
    is_typedef: bool,
}

pub fn parse_program(src: &str) -> Result<Program, ParseError> {
    let toks = tokenize(src)?;
    let mut p = Parser {
        toks,
        pos: 0,
        typedefs: STD_TYPEDEFS.iter().map(|s| s.to_string()).collect(),
    };
    p.program()
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    typedefs: HashSet<String>,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn peek_at(&self, n: usize) -> Option<&Tok> {
        self.toks.get(self.pos + n).map(|t| &t.tok)
    }

    fn line(&self) -> u32 {
        self.toks
            .get(self.pos)
            .or_else(|| self.toks.last())
            .map(|t| t.line)
            .unwrap_or(1)
    }

    fn prev_line(&self) -> u32 {
        if self.pos == 0 {
            1
        } else {
            self.toks[self.pos - 1].line
        }
    }

    fn first_on_line(&self) -> bool {
        self.pos == 0 || self.toks[self.pos - 1].line != self.line()
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError::new(self.line(), msg))
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Some(Tok::Punct(q)) if *q == p)
    }

    fn is_word(&self, w: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(q)) if q == w)
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if self.is_punct(p) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, p: &str) -> Result<(), ParseError> {
        if self.eat_punct(p) {
            Ok(())
        } else {
            self.err(format!("expected `{p}`, found {:?}", self.peek()))
        }
    }

    fn expect_ident(&mut self) -> Result<String, ParseError> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            other => self.err(format!("expected identifier, found {other:?}")),
        }
    }

    fn skip_balanced(&mut self, open: &str, close: &str) -> Result<(), ParseError> {
        self.expect_punct(open)?;
        let mut depth = 1;
        while depth > 0 {
            match self.peek() {
                None => return self.err(format!("unbalanced `{open}`")),
                Some(Tok::Punct(p)) if *p == open => depth += 1,
                Some(Tok::Punct(p)) if *p == close => depth -= 1,
                _ => {}
            }
            self.pos += 1;
        }
        Ok(())
    }

    fn skip_attributes(&mut self) -> Result<(), ParseError> {
        while self.is_word("__attribute__") || self.is_word("__asm__") || self.is_word("asm") {
            self.pos += 1;
            self.skip_balanced("(", ")")?;
        }
        Ok(())
    }

    fn tok_starts_type(&self, tok: Option<&Tok>) -> bool {
        match tok {
            Some(Tok::Ident(w)) => {
                BASE_WORDS.contains(&w.as_str())
                    || QUALIFIERS.contains(&w.as_str())
                    || matches!(w.as_str(), "struct" | "union" | "enum" | "typedef")
                    || self.typedefs.contains(w)
            }
            _ => false,
        }
    }

    fn starts_type(&self) -> bool {
        self.tok_starts_type(self.peek())
    }

    fn decl_spec(&mut self) -> Result<DeclSpec, ParseError> {
        let mut spec = DeclSpec::default();
        loop {
            self.skip_attributes()?;
            let word = match self.peek() {
                Some(Tok::Ident(w)) => w.clone(),
                _ => break,
            };
            match word.as_str() {
                "const" => spec.is_const = true,
                "volatile" => spec.volatile = true,
                "typedef" => spec.is_typedef = true,
                w if QUALIFIERS.contains(&w) => {}
                w if BASE_WORDS.contains(&w) => spec.base.push(word.clone()),
                "struct" | "union" | "enum" => {
                    self.pos += 1;
                    let tag = match self.peek() {
                        Some(Tok::Ident(t)) => {
                            let t = t.clone();
                            self.pos += 1;
                            t
                        }
                        _ => "<anon>".to_string(),
                    };
                    self.skip_attributes()?;
                    if self.is_punct("{") {
                        self.skip_balanced("{", "}")?;
                    }
                    if word == "enum" {
                        spec.base.push("int".into());
                    } else {
                        spec.base.push(format!("{word} {tag}"));
                    }
                    continue;
                }
                w if spec.base.is_empty() && self.typedefs.contains(w) => {
                    spec.base.push(word.clone())
                }
                _ => break,
            }
            self.pos += 1;
        }
        Ok(spec)
    }

    /// Parses `* qualifiers ... name [dims]`; the name is optional for abstract declarators.
    fn declarator(&mut self, spec: &DeclSpec) -> Result<(Option<String>, CType), ParseError> {
        let mut pointers = 0u8;
        let mut ptr_volatile = false;
        let mut ptr_const = false;
        while self.eat_punct("*") {
            pointers += 1;
            ptr_volatile = false;
            ptr_const = false;
            loop {
                if self.is_word("volatile") {
                    ptr_volatile = true;
                } else if self.is_word("const") {
                    ptr_const = true;
                } else if self.is_word("restrict") || self.is_word("__restrict") {
                } else {
                    break;
                }
                self.pos += 1;
            }
        }
        if self.is_punct("(") && matches!(self.peek_at(1), Some(Tok::Punct("*"))) {
            return self.err("parenthesized declarators are outside the supported subset");
        }
        let name = match self.peek() {
            Some(Tok::Ident(n)) if !self.tok_starts_type(self.peek()) => {
                let n = n.clone();
                self.pos += 1;
                Some(n)
            }
            _ => None,
        };
        let mut array_dims = 0u8;
        while self.is_punct("[") {
            self.skip_balanced("[", "]")?;
            array_dims += 1;
        }
        self.skip_attributes()?;
        let base = if spec.base.is_empty() {
            "int".to_string()
        } else {
            spec.base.join(" ")
        };
        let (volatile, is_const) = if pointers > 0 {
            (ptr_volatile, ptr_const)
        } else {
            (spec.volatile, spec.is_const)
        };
        Ok((
            name,
            CType {
                base,
                pointers,
                array_dims,
                volatile,
                is_const,
            },
        ))
    }

    fn type_name(&mut self) -> Result<CType, ParseError> {
        let spec = self.decl_spec()?;
        if spec.base.is_empty() && !spec.volatile && !spec.is_const {
            return self.err("expected type name");
        }
        let (_, ty) = self.declarator(&spec)?;
        Ok(ty)
    }

    fn program(&mut self) -> Result<Program, ParseError> {
        let mut globals = Vec::new();
        let mut functions = Vec::new();
        while self.peek().is_some() {
            if self.eat_punct(";") {
                continue;
            }
            let start = self.pos;
            let spec = self.decl_spec()?;
            if self.pos == start {
                return self.err(format!("unexpected token {:?} at top level", self.peek()));
            }
            if self.eat_punct(";") {
                continue;
            }
            loop {
                let line = self.line();
                let (name, ty) = self.declarator(&spec)?;
                let name = match name {
                    Some(n) => n,
                    None => return self.err("declarator without a name"),
                };
                if self.is_punct("(") {
                    let params = self.params()?;
                    self.skip_attributes()?;
                    if self.is_punct("{") {
                        let body = self.block()?;
                        functions.push(Function {
                            name,
                            line,
                            params,
                            body,
                        });
                        break;
                    }
                } else if spec.is_typedef {
                    self.typedefs.insert(name);
                } else {
                    let init = if self.eat_punct("=") {
                        Some(self.initializer()?)
                    } else {
                        None
                    };
                    globals.push(VarDecl {
                        name,
                        ty,
                        line,
                        init,
                    });
                }
                if self.eat_punct(",") {
                    continue;
                }
                self.expect_punct(";")?;
                break;
            }
        }
        Ok(Program { globals, functions })
    }

    fn params(&mut self) -> Result<Vec<VarDecl>, ParseError> {
        self.expect_punct("(")?;
        let mut out = Vec::new();
        if self.eat_punct(")") {
            return Ok(out);
        }
        if self.is_word("void") && matches!(self.peek_at(1), Some(Tok::Punct(")"))) {
            self.pos += 2;
            return Ok(out);
        }
        loop {
            if self.eat_punct("...") {
                self.expect_punct(")")?;
                break;
            }
            let line = self.line();
            let spec = self.decl_spec()?;
            let (name, mut ty) = self.declarator(&spec)?;
            if ty.array_dims > 0 {
                // array parameters decay
                ty.pointers += ty.array_dims;
                ty.array_dims = 0;
            }
            if let Some(name) = name {
                out.push(VarDecl {
                    name,
                    ty,
                    line,
                    init: None,
                });
            }
            if self.eat_punct(",") {
                continue;
            }
            self.expect_punct(")")?;
            break;
        }
        Ok(out)
    }

    fn initializer(&mut self) -> Result<Expr, ParseError> {
        if self.is_punct("{") {
            let line = self.line();
            self.pos += 1;
            let mut items = Vec::new();
            while !self.eat_punct("}") {
                if self.is_punct(".") || self.is_punct("[") {
                    return self.err("designated initializers are outside the supported subset");
                }
                items.push(self.initializer()?);
                if !self.eat_punct(",") {
                    self.expect_punct("}")?;
                    break;
                }
            }
            Ok(Expr {
                line,
                kind: ExprKind::InitList(items),
            })
        } else {
            self.assign_expr()
        }
    }

    fn block(&mut self) -> Result<Block, ParseError> {
        let open_line = self.line();
        self.expect_punct("{")?;
        let mut stmts = Vec::new();
        while !self.is_punct("}") {
            if self.peek().is_none() {
                return self.err("unterminated block");
            }
            stmts.push(self.stmt()?);
        }
        let close_first_on_line = self.first_on_line();
        let close_line = self.line();
        self.pos += 1;
        Ok(Block {
            open_line,
            close_line,
            close_first_on_line,
            stmts,
        })
    }

    fn local_decl(&mut self) -> Result<Vec<VarDecl>, ParseError> {
        let spec = self.decl_spec()?;
        let mut decls = Vec::new();
        if self.eat_punct(";") {
            return Ok(decls);
        }
        loop {
            let line = self.line();
            let (name, ty) = self.declarator(&spec)?;
            let name = match name {
                Some(n) => n,
                None => return self.err("declarator without a name"),
            };
            if self.is_punct("(") {
                // local prototype
                self.skip_balanced("(", ")")?;
            } else if spec.is_typedef {
                self.typedefs.insert(name);
            } else {
                let init = if self.eat_punct("=") {
                    Some(self.initializer()?)
                } else {
                    None
                };
                decls.push(VarDecl {
                    name,
                    ty,
                    line,
                    init,
                });
            }
            if self.eat_punct(",") {
                continue;
            }
            self.expect_punct(";")?;
            break;
        }
        Ok(decls)
    }

    fn stmt(&mut self) -> Result<Stmt, ParseError> {
        let line = self.line();
        let first_on_line = self.first_on_line();
        let kind = self.stmt_kind()?;
        Ok(Stmt {
            line,
            end_line: self.prev_line(),
            first_on_line,
            kind,
        })
    }

    fn paren_expr(&mut self) -> Result<Expr, ParseError> {
        self.expect_punct("(")?;
        let e = self.expr()?;
        self.expect_punct(")")?;
        Ok(e)
    }

    fn stmt_kind(&mut self) -> Result<StmtKind, ParseError> {
        if self.is_punct("{") {
            return Ok(StmtKind::Block(self.block()?));
        }
        if self.eat_punct(";") {
            return Ok(StmtKind::Empty);
        }
        if let Some(Tok::Ident(w)) = self.peek() {
            let w = w.clone();
            match w.as_str() {
                "if" => {
                    self.pos += 1;
                    let cond = self.paren_expr()?;
                    let then = Box::new(self.stmt()?);
                    let els = if self.is_word("else") {
                        self.pos += 1;
                        Some(Box::new(self.stmt()?))
                    } else {
                        None
                    };
                    return Ok(StmtKind::If { cond, then, els });
                }
                "while" => {
                    self.pos += 1;
                    let cond = self.paren_expr()?;
                    let body = Box::new(self.stmt()?);
                    return Ok(StmtKind::While { cond, body });
                }
                "do" => {
                    self.pos += 1;
                    let body = Box::new(self.stmt()?);
                    if !self.is_word("while") {
                        return self.err("expected `while` after do-body");
                    }
                    self.pos += 1;
                    let cond = self.paren_expr()?;
                    self.expect_punct(";")?;
                    return Ok(StmtKind::DoWhile { body, cond });
                }
                "for" => {
                    self.pos += 1;
                    self.expect_punct("(")?;
                    let init = if self.is_punct(";") {
                        self.pos += 1;
                        None
                    } else if self.starts_type() {
                        let line = self.line();
                        let first_on_line = self.first_on_line();
                        let decls = self.local_decl()?;
                        Some(Box::new(Stmt {
                            line,
                            end_line: self.prev_line(),
                            first_on_line,
                            kind: StmtKind::Decl(decls),
                        }))
                    } else {
                        let line = self.line();
                        let first_on_line = self.first_on_line();
                        let e = self.expr()?;
                        self.expect_punct(";")?;
                        Some(Box::new(Stmt {
                            line,
                            end_line: self.prev_line(),
                            first_on_line,
                            kind: StmtKind::Expr(e),
                        }))
                    };
                    let cond = if self.is_punct(";") {
                        None
                    } else {
                        Some(self.expr()?)
                    };
                    self.expect_punct(";")?;
                    let step = if self.is_punct(")") {
                        None
                    } else {
                        Some(self.expr()?)
                    };
                    self.expect_punct(")")?;
                    let body = Box::new(self.stmt()?);
                    return Ok(StmtKind::For {
                        init,
                        cond,
                        step,
                        body,
                    });
                }
                "switch" => {
                    self.pos += 1;
                    let cond = self.paren_expr()?;
                    let body = Box::new(self.stmt()?);
                    return Ok(StmtKind::Switch { cond, body });
                }
                "case" => {
                    self.pos += 1;
                    let e = self.cond_expr()?;
                    self.expect_punct(":")?;
                    return Ok(StmtKind::Case(Some(e), Box::new(self.stmt()?)));
                }
                "default" if matches!(self.peek_at(1), Some(Tok::Punct(":"))) => {
                    self.pos += 2;
                    return Ok(StmtKind::Case(None, Box::new(self.stmt()?)));
                }
                "return" => {
                    self.pos += 1;
                    let e = if self.is_punct(";") {
                        None
                    } else {
                        Some(self.expr()?)
                    };
                    self.expect_punct(";")?;
                    return Ok(StmtKind::Return(e));
                }
                "break" => {
                    self.pos += 1;
                    self.expect_punct(";")?;
                    return Ok(StmtKind::Break);
                }
                "continue" => {
                    self.pos += 1;
                    self.expect_punct(";")?;
                    return Ok(StmtKind::Continue);
                }
                "goto" => {
                    self.pos += 1;
                    let label = self.expect_ident()?;
                    self.expect_punct(";")?;
                    return Ok(StmtKind::Goto(label));
                }
                _ => {}
            }
            if matches!(self.peek_at(1), Some(Tok::Punct(":"))) && !self.starts_type() {
                self.pos += 2;
                return Ok(StmtKind::Label(w, Box::new(self.stmt()?)));
            }
        }
        if self.starts_type() {
            return Ok(StmtKind::Decl(self.local_decl()?));
        }
        let e = self.expr()?;
        self.expect_punct(";")?;
        Ok(StmtKind::Expr(e))
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.assign_expr()?;
        while self.is_punct(",") {
            self.pos += 1;
            let rhs = self.assign_expr()?;
            lhs = Expr {
                line: lhs.line,
                kind: ExprKind::Comma(Box::new(lhs), Box::new(rhs)),
            };
        }
        Ok(lhs)
    }

    fn assign_expr(&mut self) -> Result<Expr, ParseError> {
        let lhs = self.cond_expr()?;
        let op = match self.peek() {
            Some(Tok::Punct(p)) => match *p {
                "=" => Some(None),
                "+=" => Some(Some(BinOp::Add)),
                "-=" => Some(Some(BinOp::Sub)),
                "*=" => Some(Some(BinOp::Mul)),
                "/=" => Some(Some(BinOp::Div)),
                "%=" => Some(Some(BinOp::Mod)),
                "&=" => Some(Some(BinOp::BitAnd)),
                "|=" => Some(Some(BinOp::BitOr)),
                "^=" => Some(Some(BinOp::BitXor)),
                "<<=" => Some(Some(BinOp::Shl)),
                ">>=" => Some(Some(BinOp::Shr)),
                _ => None,
            },
            _ => None,
        };
        match op {
            Some(op) => {
                self.pos += 1;
                let rhs = self.assign_expr()?;
                Ok(Expr {
                    line: lhs.line,
                    kind: ExprKind::Assign(op, Box::new(lhs), Box::new(rhs)),
                })
            }
            None => Ok(lhs),
        }
    }

    fn cond_expr(&mut self) -> Result<Expr, ParseError> {
        let c = self.binary(1)?;
        if self.eat_punct("?") {
            let t = self.expr()?;
            self.expect_punct(":")?;
            let f = self.cond_expr()?;
            return Ok(Expr {
                line: c.line,
                kind: ExprKind::Cond(Box::new(c), Box::new(t), Box::new(f)),
            });
        }
        Ok(c)
    }

    fn binop(&self) -> Option<(BinOp, u8)> {
        let p = match self.peek() {
            Some(Tok::Punct(p)) => *p,
            _ => return None,
        };
        Some(match p {
            "||" => (BinOp::LogOr, 1),
            "&&" => (BinOp::LogAnd, 2),
            "|" => (BinOp::BitOr, 3),
            "^" => (BinOp::BitXor, 4),
            "&" => (BinOp::BitAnd, 5),
            "==" => (BinOp::Eq, 6),
            "!=" => (BinOp::Ne, 6),
            "<" => (BinOp::Lt, 7),
            ">" => (BinOp::Gt, 7),
            "<=" => (BinOp::Le, 7),
            ">=" => (BinOp::Ge, 7),
            "<<" => (BinOp::Shl, 8),
            ">>" => (BinOp::Shr, 8),
            "+" => (BinOp::Add, 9),
            "-" => (BinOp::Sub, 9),
            "*" => (BinOp::Mul, 10),
            "/" => (BinOp::Div, 10),
            "%" => (BinOp::Mod, 10),
            _ => return None,
        })
    }

    fn binary(&mut self, min_prec: u8) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        while let Some((op, prec)) = self.binop() {
            if prec < min_prec {
                break;
            }
            self.pos += 1;
            let rhs = self.binary(prec + 1)?;
            lhs = Expr {
                line: lhs.line,
                kind: ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)),
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        let line = self.line();
        let op = match self.peek() {
            Some(Tok::Punct(p)) => match *p {
                "++" => Some(UnOp::PreInc),
                "--" => Some(UnOp::PreDec),
                "&" => Some(UnOp::AddrOf),
                "*" => Some(UnOp::Deref),
                "+" => Some(UnOp::Plus),
                "-" => Some(UnOp::Neg),
                "~" => Some(UnOp::BitNot),
                "!" => Some(UnOp::Not),
                _ => None,
            },
            _ => None,
        };
        if let Some(op) = op {
            self.pos += 1;
            let e = self.unary()?;
            return Ok(Expr {
                line,
                kind: ExprKind::Unary(op, Box::new(e)),
            });
        }
        if self.is_word("sizeof") {
            self.pos += 1;
            if self.is_punct("(") && self.tok_starts_type(self.peek_at(1)) {
                self.pos += 1;
                let ty = self.type_name()?;
                self.expect_punct(")")?;
                return Ok(Expr {
                    line,
                    kind: ExprKind::SizeofType(ty),
                });
            }
            let e = self.unary()?;
            return Ok(Expr {
                line,
                kind: ExprKind::Sizeof(Box::new(e)),
            });
        }
        if self.is_punct("(") && self.tok_starts_type(self.peek_at(1)) {
            self.pos += 1;
            let ty = self.type_name()?;
            self.expect_punct(")")?;
            if self.is_punct("{") {
                return self.err("compound literals are outside the supported subset");
            }
            let e = self.unary()?;
            return Ok(Expr {
                line,
                kind: ExprKind::Cast(ty, Box::new(e)),
            });
        }
        self.postfix()
    }

    fn postfix(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.primary()?;
        loop {
            let line = e.line;
            if self.eat_punct("[") {
                let idx = self.expr()?;
                self.expect_punct("]")?;
                e = Expr {
                    line,
                    kind: ExprKind::Index(Box::new(e), Box::new(idx)),
                };
            } else if self.eat_punct("(") {
                let mut args = Vec::new();
                if !self.eat_punct(")") {
                    loop {
                        args.push(self.assign_expr()?);
                        if self.eat_punct(",") {
                            continue;
                        }
                        self.expect_punct(")")?;
                        break;
                    }
                }
                e = Expr {
                    line,
                    kind: ExprKind::Call(Box::new(e), args),
                };
            } else if self.is_punct(".") || self.is_punct("->") {
                let arrow = self.is_punct("->");
                self.pos += 1;
                let field = self.expect_ident()?;
                e = Expr {
                    line,
                    kind: ExprKind::Member(Box::new(e), field, arrow),
                };
            } else if self.eat_punct("++") {
                e = Expr {
                    line,
                    kind: ExprKind::PostInc(Box::new(e)),
                };
            } else if self.eat_punct("--") {
                e = Expr {
                    line,
                    kind: ExprKind::PostDec(Box::new(e)),
                };
            } else {
                break;
            }
        }
        Ok(e)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let line = self.line();
        let kind = match self.peek().cloned() {
            Some(Tok::Ident(n)) => {
                self.pos += 1;
                ExprKind::Ident(n)
            }
            Some(Tok::Num(n)) => {
                self.pos += 1;
                let lower = n.to_ascii_lowercase();
                let is_hex = lower.starts_with("0x");
                if lower.contains('.') || (!is_hex && lower.contains('e')) || (is_hex && lower.contains('p')) {
                    ExprKind::Float(n)
                } else {
                    ExprKind::Int(n)
                }
            }
            Some(Tok::Str(s)) => {
                self.pos += 1;
                let mut s = s;
                while let Some(Tok::Str(more)) = self.peek().cloned() {
                    self.pos += 1;
                    s.push_str(&more);
                }
                ExprKind::Str(s)
            }
            Some(Tok::Char(c)) => {
                self.pos += 1;
                ExprKind::Char(c)
            }
            Some(Tok::Punct("(")) => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect_punct(")")?;
                return Ok(e);
            }
            other => return self.err(format!("unexpected token {other:?} in expression")),
        };
        Ok(Expr { line, kind })
    }
}
