use crate::symbol::Sym;

use super::value::Value;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Mod => "mod",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }

    pub fn is_comparison(self) -> bool {
        matches!(
            self,
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum UnOp {
    Neg,
    Not,
}

/// Built-in list functions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Builtin {
    /// `count(x, L)`: number of occurrences of `x` in `L`.
    Count,
    /// `len(L)`.
    Len,
}

impl Builtin {
    pub fn by_name(name: &str) -> Option<Builtin> {
        match name {
            "count" => Some(Builtin::Count),
            "len" => Some(Builtin::Len),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Builtin::Count => "count",
            Builtin::Len => "len",
        }
    }
}

/// Index into a [`FuncTable`](super::FuncTable).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct FuncId(pub u32);

/// Data expression.
///
/// The parser produces `Var` for bare identifiers and `App` for applications;
/// [`resolve`](super::resolve) turns constructor and map references into
/// `Lit` and `Func` nodes.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Lit(Value),
    Var(Sym),
    App(Sym, Vec<Expr>),
    Func(FuncId, Vec<Expr>),
    Builtin(Builtin, Vec<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Un(UnOp, Box<Expr>),
    If(Box<Expr>, Box<Expr>, Box<Expr>),
    List(Vec<Expr>),
    /// `L.i`, zero-based.
    Index(Box<Expr>, Box<Expr>),
    /// `x in {a, b, ...}`
    In(Box<Expr>, Vec<Expr>),
}

impl Expr {
    pub fn bin(op: BinOp, a: Expr, b: Expr) -> Expr {
        Expr::Bin(op, Box::new(a), Box::new(b))
    }

    pub fn var(name: &str) -> Expr {
        Expr::Var(Sym::new(name))
    }

    pub fn int(i: i64) -> Expr {
        Expr::Lit(Value::Int(i))
    }

    /// Children in evaluation order.
    pub fn children(&self) -> Vec<&Expr> {
        match self {
            Expr::Lit(_) | Expr::Var(_) => vec![],
            Expr::App(_, a) | Expr::Func(_, a) | Expr::Builtin(_, a) | Expr::List(a) => a.iter().collect(),
            Expr::Bin(_, a, b) | Expr::Index(a, b) => vec![a, b],
            Expr::Un(_, a) => vec![a],
            Expr::If(c, a, b) => vec![c, a, b],
            Expr::In(x, set) => std::iter::once(&**x).chain(set.iter()).collect(),
        }
    }

    /// Variables occurring in the expression (no binders exist at the data
    /// level, so every occurrence is free). Sorted and deduplicated.
    pub fn free_vars(&self) -> Vec<Sym> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out.sort();
        out.dedup();
        out
    }

    pub fn collect_vars(&self, out: &mut Vec<Sym>) {
        if let Expr::Var(s) = self {
            out.push(*s);
        }
        for c in self.children() {
            c.collect_vars(out);
        }
    }

    pub fn mentions(&self, name: Sym) -> bool {
        match self {
            Expr::Var(s) => *s == name,
            _ => self.children().into_iter().any(|c| c.mentions(name)),
        }
    }

    /// Simultaneously replaces variables by expressions.
    pub fn substitute_exprs(&self, map: &[(Sym, Expr)]) -> Expr {
        let sub = |e: &Expr| e.substitute_exprs(map);
        let subv = |v: &[Expr]| v.iter().map(sub).collect::<Vec<_>>();
        match self {
            Expr::Var(s) => match map.iter().find(|(n, _)| n == s) {
                Some((_, e)) => e.clone(),
                None => self.clone(),
            },
            Expr::Lit(_) => self.clone(),
            Expr::App(f, a) => Expr::App(*f, subv(a)),
            Expr::Func(f, a) => Expr::Func(*f, subv(a)),
            Expr::Builtin(f, a) => Expr::Builtin(*f, subv(a)),
            Expr::Bin(op, a, b) => Expr::Bin(*op, Box::new(sub(a)), Box::new(sub(b))),
            Expr::Un(op, a) => Expr::Un(*op, Box::new(sub(a))),
            Expr::If(c, a, b) => Expr::If(Box::new(sub(c)), Box::new(sub(a)), Box::new(sub(b))),
            Expr::List(a) => Expr::List(subv(a)),
            Expr::Index(a, b) => Expr::Index(Box::new(sub(a)), Box::new(sub(b))),
            Expr::In(x, set) => Expr::In(Box::new(sub(x)), subv(set)),
        }
    }

    /// Replaces every occurrence of variable `name` with `value`.
    pub fn substitute(&self, name: Sym, value: &Value) -> Expr {
        let sub = |e: &Expr| e.substitute(name, value);
        let subv = |v: &[Expr]| v.iter().map(sub).collect::<Vec<_>>();
        match self {
            Expr::Var(s) if *s == name => Expr::Lit(value.clone()),
            Expr::Lit(_) | Expr::Var(_) => self.clone(),
            Expr::App(f, a) => Expr::App(*f, subv(a)),
            Expr::Func(f, a) => Expr::Func(*f, subv(a)),
            Expr::Builtin(f, a) => Expr::Builtin(*f, subv(a)),
            Expr::Bin(op, a, b) => Expr::Bin(*op, Box::new(sub(a)), Box::new(sub(b))),
            Expr::Un(op, a) => Expr::Un(*op, Box::new(sub(a))),
            Expr::If(c, a, b) => Expr::If(Box::new(sub(c)), Box::new(sub(a)), Box::new(sub(b))),
            Expr::List(a) => Expr::List(subv(a)),
            Expr::Index(a, b) => Expr::Index(Box::new(sub(a)), Box::new(sub(b))),
            Expr::In(x, set) => Expr::In(Box::new(sub(x)), subv(set)),
        }
    }
}
