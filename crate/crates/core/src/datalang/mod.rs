//! Data sub-language: sorts, values, expressions and single-equation
//! functions.

mod eval;
mod expr;
mod sort;
mod value;

use std::collections::HashMap;

use thiserror::Error;

use crate::symbol::Sym;

pub use eval::{Env, Evaluator, ReadTracker};
pub use expr::{BinOp, Builtin, Expr, FuncId, UnOp};
pub use sort::{EnumDef, Sort, SortTable};
pub use value::{EnumVal, Rational, Value};

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum DataError {
    #[error("unknown name `{0}`")]
    UnknownName(String),
    #[error("type mismatch: {0}")]
    TypeMismatch(String),
    #[error("`{name}` expects {expected} argument(s), got {got}")]
    ArityMismatch { name: String, expected: usize, got: usize },
    #[error("division by zero")]
    DivisionByZero,
    #[error("list index {index} out of range for length {len}")]
    IndexOutOfRange { index: i64, len: usize },
    #[error("natural number below zero: {0}")]
    NatUnderflow(String),
    #[error("integer overflow")]
    Overflow,
    #[error("sort {0} is infinite")]
    InfiniteSort(String),
    #[error("duplicate constructor `{ctor}` in sort {sort}")]
    DuplicateConstructor { sort: String, ctor: String },
    #[error("duplicate definition of `{0}`")]
    DuplicateName(String),
    #[error("unresolved application of `{0}`")]
    Unresolved(String),
}

/// A user-defined total function `name(params) : result = body`. Constants
/// are functions without parameters; their value is computed once.
#[derive(Clone, Debug)]
pub struct FunctionDef {
    pub name: String,
    pub params: Vec<(Sym, Sort)>,
    pub result: Sort,
    pub body: Expr,
    pub value: Option<Value>,
}

#[derive(Clone, Debug, Default)]
pub struct FuncTable {
    defs: Vec<FunctionDef>,
    by_name: HashMap<String, FuncId>,
}

impl FuncTable {
    pub fn get(&self, id: FuncId) -> &FunctionDef {
        &self.defs[id.0 as usize]
    }

    pub fn lookup(&self, name: &str) -> Option<FuncId> {
        self.by_name.get(name).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (FuncId, &FunctionDef)> {
        self.defs.iter().enumerate().map(|(i, d)| (FuncId(i as u32), d))
    }

    pub fn len(&self) -> usize {
        self.defs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.defs.is_empty()
    }

    /// Adds a function. The body may only refer to the parameters and to
    /// functions defined earlier, which rules out recursion.
    pub fn define(
        &mut self,
        sorts: &SortTable,
        name: &str,
        params: Vec<(Sym, Sort)>,
        result: Sort,
        body: &Expr,
    ) -> Result<FuncId, DataError> {
        if self.by_name.contains_key(name) || sorts.ctor(name).is_some() {
            return Err(DataError::DuplicateName(name.to_string()));
        }
        let ctx = TypeCtx {
            sorts,
            funcs: self,
            vars: params.clone(),
        };
        let (body, sort) = resolve(body, &ctx)?;
        if !assignable(&sort, &result) {
            return Err(DataError::TypeMismatch(format!(
                "body of `{name}` has sort {}, declared {}",
                sort.display(sorts),
                result.display(sorts)
            )));
        }
        let mut def = FunctionDef {
            name: name.to_string(),
            params,
            result,
            body,
            value: None,
        };
        if def.params.is_empty() {
            let v = Evaluator::new(self, sorts).eval(&Env::EMPTY, &def.body)?;
            if !v.fits(&def.result) {
                return Err(DataError::TypeMismatch(format!(
                    "value of `{name}` does not fit its sort"
                )));
            }
            def.value = Some(v);
        }
        let id = FuncId(self.defs.len() as u32);
        self.defs.push(def);
        self.by_name.insert(name.to_string(), id);
        Ok(id)
    }
}

/// Typing environment: declared sorts, functions, and variables in scope
/// (later entries shadow earlier ones).
#[derive(Clone)]
pub struct TypeCtx<'a> {
    pub sorts: &'a SortTable,
    pub funcs: &'a FuncTable,
    pub vars: Vec<(Sym, Sort)>,
}

impl<'a> TypeCtx<'a> {
    pub fn new(sorts: &'a SortTable, funcs: &'a FuncTable) -> Self {
        TypeCtx {
            sorts,
            funcs,
            vars: Vec::new(),
        }
    }

    pub fn with(&self, name: Sym, sort: Sort) -> Self {
        let mut c = self.clone();
        c.vars.push((name, sort));
        c
    }

    pub fn var(&self, name: Sym) -> Option<&Sort> {
        self.vars.iter().rev().find(|(s, _)| *s == name).map(|(_, t)| t)
    }
}

/// Whether a value of sort `from` may be bound to a slot of sort `to`.
/// `Int` into `Nat` is accepted statically and checked at run time.
pub fn assignable(from: &Sort, to: &Sort) -> bool {
    from.conforms_to(to) || (*from == Sort::Int && *to == Sort::Nat)
}

fn compatible(a: &Sort, b: &Sort) -> Option<Sort> {
    if a == b {
        return Some(a.clone());
    }
    if let Some(j) = a.numeric_join(b) {
        return Some(j);
    }
    match (a, b) {
        (Sort::List(x), Sort::List(y)) => compatible(x, y).map(|s| Sort::List(Box::new(s))),
        _ => None,
    }
}

/// Returns the sort of `e`.
pub fn typecheck_expr(e: &Expr, ctx: &TypeCtx) -> Result<Sort, DataError> {
    resolve(e, ctx).map(|(_, s)| s)
}

/// Evaluates a resolved expression.
pub fn eval_expr(funcs: &FuncTable, sorts: &SortTable, env: &Env, e: &Expr) -> Result<Value, DataError> {
    Evaluator::new(funcs, sorts).eval(env, e)
}

/// Resolves names (constructors, constants, functions, builtins) and
/// computes the sort of `e`.
pub fn resolve(e: &Expr, ctx: &TypeCtx) -> Result<(Expr, Sort), DataError> {
    let sorts = ctx.sorts;
    let mismatch = |what: &str| DataError::TypeMismatch(what.to_string());
    let show = |s: &Sort| s.display(sorts).to_string();
    match e {
        Expr::Lit(v) => {
            let s = match v {
                Value::Bool(_) => Sort::Bool,
                Value::Int(i) if *i >= 0 => Sort::Nat,
                Value::Int(_) => Sort::Int,
                Value::Real(_) => Sort::Real,
                Value::Enum(ev) => Sort::Enum(ev.sort),
                Value::List(_) => return Err(mismatch("list values cannot be literals")),
            };
            Ok((e.clone(), s))
        }
        Expr::Var(name) => {
            if let Some(s) = ctx.var(*name) {
                return Ok((e.clone(), s.clone()));
            }
            let n = name.as_str();
            if let Some(ev) = sorts.ctor(&n) {
                return Ok((Expr::Lit(Value::Enum(ev)), Sort::Enum(ev.sort)));
            }
            if let Some(id) = ctx.funcs.lookup(&n) {
                return resolve_call(id, &[], ctx);
            }
            Err(DataError::UnknownName(n))
        }
        Expr::App(name, args) => {
            let n = name.as_str();
            if let Some(b) = Builtin::by_name(&n) {
                return resolve_builtin(b, args, ctx);
            }
            match ctx.funcs.lookup(&n) {
                Some(id) => resolve_call(id, args, ctx),
                None => Err(DataError::UnknownName(n)),
            }
        }
        Expr::Func(id, args) => resolve_call(*id, args, ctx),
        Expr::Builtin(b, args) => resolve_builtin(*b, args, ctx),
        Expr::Bin(op, a, b) => {
            let (a, sa) = resolve(a, ctx)?;
            let (b, sb) = resolve(b, ctx)?;
            let sort = match op {
                BinOp::And | BinOp::Or => {
                    if sa != Sort::Bool || sb != Sort::Bool {
                        return Err(DataError::TypeMismatch(format!(
                            "`{}` expects Bool operands, got {} and {}",
                            op.symbol(),
                            show(&sa),
                            show(&sb)
                        )));
                    }
                    Sort::Bool
                }
                BinOp::Eq | BinOp::Ne => {
                    if compatible(&sa, &sb).is_none() {
                        return Err(DataError::TypeMismatch(format!(
                            "cannot compare {} with {}",
                            show(&sa),
                            show(&sb)
                        )));
                    }
                    Sort::Bool
                }
                _ => {
                    let Some(j) = sa.numeric_join(&sb) else {
                        return Err(DataError::TypeMismatch(format!(
                            "`{}` expects numbers, got {} and {}",
                            op.symbol(),
                            show(&sa),
                            show(&sb)
                        )));
                    };
                    match op {
                        BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => Sort::Bool,
                        BinOp::Div => Sort::Real,
                        BinOp::Sub if j == Sort::Nat => Sort::Int,
                        BinOp::Mod if j == Sort::Real => return Err(mismatch("`mod` expects integers")),
                        _ => j,
                    }
                }
            };
            Ok((Expr::bin(*op, a, b), sort))
        }
        Expr::Un(op, a) => {
            let (a, s) = resolve(a, ctx)?;
            let sort = match (op, &s) {
                (UnOp::Not, Sort::Bool) => Sort::Bool,
                (UnOp::Neg, Sort::Nat | Sort::Int) => Sort::Int,
                (UnOp::Neg, Sort::Real) => Sort::Real,
                _ => return Err(DataError::TypeMismatch(format!("bad operand sort {}", show(&s)))),
            };
            Ok((Expr::Un(*op, Box::new(a)), sort))
        }
        Expr::If(c, a, b) => {
            let (c, sc) = resolve(c, ctx)?;
            if sc != Sort::Bool {
                return Err(mismatch("if condition must be Bool"));
            }
            let (a, sa) = resolve(a, ctx)?;
            let (b, sb) = resolve(b, ctx)?;
            let Some(s) = compatible(&sa, &sb) else {
                return Err(DataError::TypeMismatch(format!(
                    "if branches have sorts {} and {}",
                    show(&sa),
                    show(&sb)
                )));
            };
            Ok((Expr::If(Box::new(c), Box::new(a), Box::new(b)), s))
        }
        Expr::List(items) => {
            if items.is_empty() {
                return Err(mismatch("empty list literal"));
            }
            let mut out = Vec::with_capacity(items.len());
            let mut elem: Option<Sort> = None;
            for i in items {
                let (i, s) = resolve(i, ctx)?;
                elem = Some(match elem {
                    None => s,
                    Some(prev) => compatible(&prev, &s).ok_or_else(|| mismatch("list elements of different sorts"))?,
                });
                out.push(i);
            }
            Ok((Expr::List(out), Sort::List(Box::new(elem.unwrap()))))
        }
        Expr::Index(l, i) => {
            let (l, sl) = resolve(l, ctx)?;
            let (i, si) = resolve(i, ctx)?;
            let Sort::List(elem) = sl else {
                return Err(DataError::TypeMismatch(format!("indexing a {}", show(&sl))));
            };
            if !matches!(si, Sort::Nat | Sort::Int) {
                return Err(mismatch("list index must be an integer"));
            }
            Ok((Expr::Index(Box::new(l), Box::new(i)), *elem))
        }
        Expr::In(x, set) => {
            let (x, sx) = resolve(x, ctx)?;
            let mut out = Vec::with_capacity(set.len());
            for m in set {
                let (m, sm) = resolve(m, ctx)?;
                if compatible(&sx, &sm).is_none() {
                    return Err(DataError::TypeMismatch(format!(
                        "set member of sort {} for element of sort {}",
                        show(&sm),
                        show(&sx)
                    )));
                }
                out.push(m);
            }
            Ok((Expr::In(Box::new(x), out), Sort::Bool))
        }
    }
}

fn resolve_call(id: FuncId, args: &[Expr], ctx: &TypeCtx) -> Result<(Expr, Sort), DataError> {
    let def = ctx.funcs.get(id);
    if def.params.len() != args.len() {
        return Err(DataError::ArityMismatch {
            name: def.name.clone(),
            expected: def.params.len(),
            got: args.len(),
        });
    }
    if let Some(v) = &def.value {
        return Ok((Expr::Lit(v.clone()), def.result.clone()));
    }
    let mut out = Vec::with_capacity(args.len());
    for (a, (p, ps)) in args.iter().zip(&def.params) {
        let (a, sa) = resolve(a, ctx)?;
        if !assignable(&sa, ps) {
            return Err(DataError::TypeMismatch(format!(
                "argument {p} of `{}` has sort {}, expected {}",
                def.name,
                sa.display(ctx.sorts),
                ps.display(ctx.sorts)
            )));
        }
        out.push(a);
    }
    Ok((Expr::Func(id, out), def.result.clone()))
}

fn resolve_builtin(b: Builtin, args: &[Expr], ctx: &TypeCtx) -> Result<(Expr, Sort), DataError> {
    let expected = match b {
        Builtin::Count => 2,
        Builtin::Len => 1,
    };
    if args.len() != expected {
        return Err(DataError::ArityMismatch {
            name: b.name().to_string(),
            expected,
            got: args.len(),
        });
    }
    let mut out = Vec::with_capacity(args.len());
    let mut sorts = Vec::with_capacity(args.len());
    for a in args {
        let (a, s) = resolve(a, ctx)?;
        out.push(a);
        sorts.push(s);
    }
    let list = sorts.last().unwrap();
    let Sort::List(elem) = list else {
        return Err(DataError::TypeMismatch(format!("`{}` expects a list", b.name())));
    };
    if b == Builtin::Count && compatible(&sorts[0], elem).is_none() {
        return Err(DataError::TypeMismatch("count: element sort differs from list".into()));
    }
    Ok((Expr::Builtin(b, out), Sort::Nat))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn symbol_table() -> SortTable {
        let mut t = SortTable::default();
        let names = [
            "orange",
            "grapes",
            "pear",
            "melon",
            "blueberry",
            "strawberry",
            "bell",
            "seven",
            "star",
        ];
        t.add_enum("Symbol", names.iter().map(|s| s.to_string()).collect())
            .unwrap();
        t
    }

    fn sym(name: &str) -> Sym {
        Sym::new(name)
    }

    fn app(f: &str, args: Vec<Expr>) -> Expr {
        Expr::App(sym(f), args)
    }

    fn eval_closed(funcs: &FuncTable, sorts: &SortTable, e: &Expr) -> Value {
        let (e, _) = resolve(e, &TypeCtx::new(sorts, funcs)).unwrap();
        eval_expr(funcs, sorts, &Env::EMPTY, &e).unwrap()
    }

    #[test]
    fn if_literal_is_nat() {
        let t = SortTable::default();
        let f = FuncTable::default();
        let e = Expr::If(
            Box::new(Expr::Lit(Value::Bool(true))),
            Box::new(Expr::int(1)),
            Box::new(Expr::int(0)),
        );
        assert_eq!(typecheck_expr(&e, &TypeCtx::new(&t, &f)).unwrap(), Sort::Nat);
        let e2 = Expr::If(
            Box::new(Expr::bin(BinOp::Eq, Expr::int(2), Expr::int(2))),
            Box::new(Expr::int(7)),
            Box::new(Expr::int(0)),
        );
        assert_eq!(eval_closed(&f, &t, &e2), Value::Int(7));
    }

    #[test]
    fn add_bool_is_mismatch() {
        let t = SortTable::default();
        let f = FuncTable::default();
        let e = Expr::bin(BinOp::Add, Expr::int(1), Expr::Lit(Value::Bool(true)));
        assert!(matches!(
            typecheck_expr(&e, &TypeCtx::new(&t, &f)),
            Err(DataError::TypeMismatch(_))
        ));
    }

    #[test]
    fn all_equal_is_bool() {
        let t = symbol_table();
        let mut f = FuncTable::default();
        let s = Sort::Enum(0);
        let body = Expr::bin(
            BinOp::And,
            Expr::bin(BinOp::Eq, Expr::var("s1"), Expr::var("s2")),
            Expr::bin(BinOp::Eq, Expr::var("s2"), Expr::var("s3")),
        );
        let params = vec![(sym("s1"), s.clone()), (sym("s2"), s.clone()), (sym("s3"), s.clone())];
        f.define(&t, "all_equal", params, Sort::Bool, &body).unwrap();
        let mut ctx = TypeCtx::new(&t, &f);
        for v in ["s1", "s2", "s3"] {
            ctx = ctx.with(sym(v), s.clone());
        }
        let call = app("all_equal", vec![Expr::var("s1"), Expr::var("s2"), Expr::var("s3")]);
        assert_eq!(typecheck_expr(&call, &ctx).unwrap(), Sort::Bool);
        let bad = app("all_equal", vec![Expr::var("s1")]);
        assert!(matches!(
            typecheck_expr(&bad, &ctx),
            Err(DataError::ArityMismatch { .. })
        ));
        assert!(matches!(
            typecheck_expr(&Expr::var("nope"), &ctx),
            Err(DataError::UnknownName(_))
        ));
    }

    #[test]
    fn thirds_sum_to_one() {
        let t = SortTable::default();
        let f = FuncTable::default();
        let third = Expr::bin(BinOp::Div, Expr::int(1), Expr::int(3));
        let e = Expr::bin(BinOp::Add, Expr::bin(BinOp::Add, third.clone(), third.clone()), third);
        assert_eq!(eval_closed(&f, &t, &e), Value::Int(1));
    }

    #[test]
    fn list_index_with_mod() {
        let t = symbol_table();
        let mut f = FuncTable::default();
        let items = ["orange", "orange", "star", "pear"]
            .iter()
            .map(|n| Expr::var(n))
            .collect();
        let list_sort = Sort::List(Box::new(Sort::Enum(0)));
        f.define(&t, "r1", vec![], list_sort, &Expr::List(items)).unwrap();
        let ctx = TypeCtx::new(&t, &f).with(sym("i"), Sort::Nat);
        let e = Expr::Index(
            Box::new(Expr::var("r1")),
            Box::new(Expr::bin(BinOp::Mod, Expr::var("i"), Expr::int(24))),
        );
        let (e, s) = resolve(&e, &ctx).unwrap();
        assert_eq!(s, Sort::Enum(0));
        let env = [(sym("i"), Value::Int(2))];
        let v = eval_expr(&f, &t, &Env::new(&env), &e).unwrap();
        assert_eq!(v, Value::Enum(t.ctor("star").unwrap()));
        let env = [(sym("i"), Value::Int(9))];
        assert!(matches!(
            eval_expr(&f, &t, &Env::new(&env), &e),
            Err(DataError::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn nat_parameter_underflow() {
        let t = SortTable::default();
        let mut f = FuncTable::default();
        f.define(&t, "id", vec![(sym("n"), Sort::Nat)], Sort::Nat, &Expr::var("n"))
            .unwrap();
        let ctx = TypeCtx::new(&t, &f).with(sym("k"), Sort::Nat);
        let e = app("id", vec![Expr::bin(BinOp::Sub, Expr::var("k"), Expr::int(1))]);
        let (e, _) = resolve(&e, &ctx).unwrap();
        let env = [(sym("k"), Value::Int(0))];
        assert!(matches!(
            eval_expr(&f, &t, &Env::new(&env), &e),
            Err(DataError::NatUnderflow(_))
        ));
    }

    #[test]
    fn recursion_is_rejected() {
        let t = SortTable::default();
        let mut f = FuncTable::default();
        let body = app("loop", vec![Expr::var("n")]);
        let r = f.define(&t, "loop", vec![(sym("n"), Sort::Nat)], Sort::Nat, &body);
        assert!(matches!(r, Err(DataError::UnknownName(_))));
    }

    #[test]
    fn division_by_zero() {
        let t = SortTable::default();
        let f = FuncTable::default();
        let e = Expr::bin(BinOp::Div, Expr::int(1), Expr::int(0));
        let (e, _) = resolve(&e, &TypeCtx::new(&t, &f)).unwrap();
        assert_eq!(eval_expr(&f, &t, &Env::EMPTY, &e), Err(DataError::DivisionByZero));
    }

    fn arb_expr() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            (-5i64..6).prop_map(Expr::int),
            Just(Expr::var("x")),
            Just(Expr::var("y")),
        ];
        leaf.prop_recursive(4, 32, 3, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::bin(BinOp::Add, a, b)),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::bin(BinOp::Sub, a, b)),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::bin(BinOp::Mul, a, b)),
                (inner.clone(), inner.clone(), inner.clone()).prop_map(|(a, b, c)| Expr::If(
                    Box::new(Expr::bin(BinOp::Lt, a, b)),
                    Box::new(c.clone()),
                    Box::new(Expr::bin(BinOp::Div, c, Expr::int(3)))
                )),
            ]
        })
    }

    proptest! {
        #[test]
        fn substitution_lemma(e in arb_expr(), x in -20i64..20, y in -20i64..20) {
            let t = SortTable::default();
            let f = FuncTable::default();
            let ctx = TypeCtx::new(&t, &f).with(sym("x"), Sort::Int).with(sym("y"), Sort::Int);
            let (r, _) = resolve(&e, &ctx).unwrap();
            let env = [(sym("x"), Value::Int(x)), (sym("y"), Value::Int(y))];
            let direct = eval_expr(&f, &t, &Env::new(&env), &r);
            let substituted = r.substitute(sym("x"), &Value::Int(x));
            let env_y = [(sym("y"), Value::Int(y))];
            let via = eval_expr(&f, &t, &Env::new(&env_y), &substituted);
            prop_assert_eq!(direct, via);
        }
    }
}
