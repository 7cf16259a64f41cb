//! Literal-only constant folding used to detect simplifiable assignments.

use std::collections::BTreeSet;

use crate::csource::{BinOp, Expr, ExprKind, UnOp};

/// Result of folding an expression: a known constant, or the local
/// variables still contributing to its value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Folded {
    Const(i128),
    Vars(BTreeSet<String>),
}

impl Folded {
    pub fn vars(&self) -> BTreeSet<String> {
        match self {
            Folded::Const(_) => BTreeSet::new(),
            Folded::Vars(v) => v.clone(),
        }
    }

    fn konst(&self) -> Option<i128> {
        match self {
            Folded::Const(c) => Some(*c),
            Folded::Vars(_) => None,
        }
    }

    fn union(self, other: Folded) -> Folded {
        let mut v = self.vars();
        v.extend(other.vars());
        Folded::Vars(v)
    }
}

pub fn parse_int_literal(text: &str) -> Option<i128> {
    let t = text.trim_end_matches(['u', 'U', 'l', 'L']);
    if let Some(h) = t.strip_prefix("0x").or_else(|| t.strip_prefix("0X")) {
        i128::from_str_radix(h, 16).ok()
    } else if t.len() > 1 && t.starts_with('0') {
        i128::from_str_radix(&t[1..], 8).ok()
    } else {
        t.parse().ok()
    }
}

fn char_value(text: &str) -> Option<i128> {
    let inner = text.strip_prefix('\'')?.strip_suffix('\'')?;
    let mut chars = inner.chars();
    match (chars.next()?, chars.next()) {
        ('\\', Some(c)) => Some(match c {
            'n' => 10,
            't' => 9,
            'r' => 13,
            '0' => 0,
            '\\' => 92,
            '\'' => 39,
            _ => return None,
        }),
        (c, None) => Some(c as i128),
        _ => None,
    }
}

/// Fold `e`, treating names accepted by `is_local` as variables.
pub fn fold(e: &Expr, is_local: &dyn Fn(&str) -> bool) -> Folded {
    fold_with(e, is_local, true)
}

/// Local variables read while computing `e`, without any simplification.
pub fn operand_vars(e: &Expr, is_local: &dyn Fn(&str) -> bool) -> BTreeSet<String> {
    fold_with(e, is_local, false).vars()
}

fn fold_with(e: &Expr, is_local: &dyn Fn(&str) -> bool, absorb: bool) -> Folded {
    use ExprKind::*;
    let fold = |e: &Expr, l: &dyn Fn(&str) -> bool| fold_with(e, l, absorb);
    let empty = || Folded::Vars(BTreeSet::new());
    match &e.kind {
        Int(t) => parse_int_literal(t).map(Folded::Const).unwrap_or_else(empty),
        Char(t) => char_value(t).map(Folded::Const).unwrap_or_else(empty),
        Float(_) | Str(_) | SizeofType(_) | Sizeof(_) => empty(),
        Ident(n) => {
            if is_local(n) {
                Folded::Vars(BTreeSet::from([n.clone()]))
            } else {
                empty()
            }
        }
        Unary(op, inner) => {
            let f = fold(inner, is_local);
            if !absorb && *op != UnOp::AddrOf {
                return f.union(empty());
            }
            match (op, f.konst()) {
                (UnOp::Neg, Some(c)) => Folded::Const(c.wrapping_neg()),
                (UnOp::Plus, Some(c)) => Folded::Const(c),
                (UnOp::Not, Some(c)) => Folded::Const((c == 0) as i128),
                (UnOp::BitNot, Some(c)) => Folded::Const(!c),
                // the address of a variable is not a read of it
                (UnOp::AddrOf, _) => empty(),
                _ => f,
            }
        }
        PostInc(inner) | PostDec(inner) => fold(inner, is_local).union(empty()),
        Cast(_, inner) => fold(inner, is_local),
        Binary(op, a, b) if absorb => fold_binary(*op, fold(a, is_local), fold(b, is_local)),
        Binary(_, a, b) => fold(a, is_local).union(fold(b, is_local)),
        Assign(_, _, rhs) => fold(rhs, is_local).union(empty()),
        Cond(c, t, f) => match fold(c, is_local).konst().filter(|_| absorb) {
            Some(0) => fold(f, is_local),
            Some(_) => fold(t, is_local),
            None => fold(c, is_local)
                .union(fold(t, is_local))
                .union(fold(f, is_local)),
        },
        Comma(_, b) => fold(b, is_local),
        Call(_, args) => args
            .iter()
            .fold(empty(), |acc, a| acc.union(fold(a, is_local))),
        Index(a, b) => fold(a, is_local).union(fold(b, is_local)),
        Member(a, _, _) => fold(a, is_local).union(empty()),
        InitList(items) => items
            .iter()
            .fold(empty(), |acc, a| acc.union(fold(a, is_local))),
    }
}

fn fold_binary(op: BinOp, a: Folded, b: Folded) -> Folded {
    let (ca, cb) = (a.konst(), b.konst());
    if let (Some(x), Some(y)) = (ca, cb) {
        if let Some(v) = eval(op, x, y) {
            return Folded::Const(v);
        }
        return a.union(b);
    }
    let absorbed = match op {
        BinOp::Mul | BinOp::BitAnd => (ca == Some(0) || cb == Some(0)).then_some(0),
        BinOp::LogAnd => (ca == Some(0) || cb == Some(0)).then_some(0),
        BinOp::LogOr => (matches!(ca, Some(c) if c != 0) || matches!(cb, Some(c) if c != 0)).then_some(1),
        BinOp::BitOr => (ca == Some(-1) || cb == Some(-1)).then_some(-1),
        BinOp::Mod => matches!(cb, Some(1) | Some(-1)).then_some(0),
        BinOp::Shl | BinOp::Shr => (ca == Some(0)).then_some(0),
        _ => None,
    };
    match absorbed {
        Some(v) => Folded::Const(v),
        None => a.union(b),
    }
}

fn eval(op: BinOp, x: i128, y: i128) -> Option<i128> {
    Some(match op {
        BinOp::Mul => x.checked_mul(y)?,
        BinOp::Div => x.checked_div(y)?,
        BinOp::Mod => x.checked_rem(y)?,
        BinOp::Add => x.checked_add(y)?,
        BinOp::Sub => x.checked_sub(y)?,
        BinOp::Shl => x.checked_shl(u32::try_from(y).ok()?)?,
        BinOp::Shr => x.checked_shr(u32::try_from(y).ok()?)?,
        BinOp::Lt => (x < y) as i128,
        BinOp::Gt => (x > y) as i128,
        BinOp::Le => (x <= y) as i128,
        BinOp::Ge => (x >= y) as i128,
        BinOp::Eq => (x == y) as i128,
        BinOp::Ne => (x != y) as i128,
        BinOp::BitAnd => x & y,
        BinOp::BitXor => x ^ y,
        BinOp::BitOr => x | y,
        BinOp::LogAnd => (x != 0 && y != 0) as i128,
        BinOp::LogOr => (x != 0 || y != 0) as i128,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::csource;

    fn rhs_of(src: &str) -> Expr {
        let p = csource::parse(&format!("int g; int f(int x, int y) {{ g = {src}; return 0; }}")).unwrap();
        match &p.functions[0].body.stmts[0].kind {
            csource::StmtKind::Expr(Expr { kind: ExprKind::Assign(_, _, r), .. }) => (**r).clone(),
            other => panic!("{other:?}"),
        }
    }

    fn folded(src: &str) -> Folded {
        fold(&rhs_of(src), &|n| n == "x" || n == "y")
    }

    #[test]
    fn absorbing_rules() {
        assert_eq!(folded("x * 0"), Folded::Const(0));
        assert_eq!(folded("(x + y) & 0"), Folded::Const(0));
        assert_eq!(folded("0 && x"), Folded::Const(0));
        assert_eq!(folded("x || 3"), Folded::Const(1));
        assert_eq!(folded("x % 1"), Folded::Const(0));
        assert_eq!(folded("0 << y"), Folded::Const(0));
        assert_eq!(folded("(2 - 2) ? x : y"), Folded::Vars(BTreeSet::from(["y".into()])));
        assert_eq!(folded("(x, y)"), Folded::Vars(BTreeSet::from(["y".into()])));
    }

    #[test]
    fn keeps_live_operands() {
        assert_eq!(folded("x + y * 1").vars().len(), 2);
        assert_eq!(folded("g + x"), Folded::Vars(BTreeSet::from(["x".into()])));
        assert_eq!(folded("0x10 + 010"), Folded::Const(24));
    }
}
