use std::cell::Cell;
use std::sync::Arc;

use num_integer::Integer;
use num_traits::{CheckedAdd, CheckedDiv, CheckedMul, CheckedSub, Zero};
use smallvec::SmallVec;

use crate::symbol::Sym;

use super::expr::{BinOp, Builtin, Expr, UnOp};
use super::sort::SortTable;
use super::value::{Rational, Value};
use super::{DataError, FuncTable};

/// Records which of the first `base` bindings of an environment were read.
///
/// Used by the explorer to key caches on the variables a computation
/// actually depended on.
#[derive(Debug)]
pub struct ReadTracker {
    base: usize,
    mask: Cell<u64>,
}

impl ReadTracker {
    pub fn new(base: usize) -> ReadTracker {
        ReadTracker {
            base,
            mask: Cell::new(0),
        }
    }

    /// Bit `i` set iff binding `i` was read. `None` if more than 64 bindings
    /// are tracked.
    pub fn mask(&self) -> Option<u64> {
        (self.base <= 64).then(|| self.mask.get())
    }

    pub fn mark(&self, i: usize) {
        if i < self.base && i < 64 {
            self.mask.set(self.mask.get() | (1 << i));
        }
    }
}

/// Variable bindings; later bindings shadow earlier ones.
#[derive(Clone, Copy)]
pub struct Env<'a> {
    pub vars: &'a [(Sym, Value)],
    pub tracker: Option<&'a ReadTracker>,
}

impl<'a> Env<'a> {
    pub const EMPTY: Env<'static> = Env {
        vars: &[],
        tracker: None,
    };

    pub fn new(vars: &'a [(Sym, Value)]) -> Env<'a> {
        Env { vars, tracker: None }
    }

    pub fn get(&self, name: Sym) -> Option<&'a Value> {
        let i = self.vars.iter().rposition(|(s, _)| *s == name)?;
        if let Some(t) = self.tracker {
            t.mark(i);
        }
        Some(&self.vars[i].1)
    }
}

/// Evaluates resolved data expressions. Pure: equal inputs give equal values.
#[derive(Clone, Copy)]
pub struct Evaluator<'a> {
    pub funcs: &'a FuncTable,
    pub sorts: &'a SortTable,
}

type Args = SmallVec<[(Sym, Value); 6]>;

impl<'a> Evaluator<'a> {
    pub fn new(funcs: &'a FuncTable, sorts: &'a SortTable) -> Self {
        Evaluator { funcs, sorts }
    }

    pub fn eval(&self, env: &Env, e: &Expr) -> Result<Value, DataError> {
        match e {
            Expr::Lit(v) => Ok(v.clone()),
            Expr::Var(s) => env
                .get(*s)
                .cloned()
                .ok_or_else(|| DataError::UnknownName(s.to_string())),
            Expr::App(s, _) => Err(DataError::Unresolved(s.to_string())),
            Expr::Func(id, args) => {
                let def = self.funcs.get(*id);
                if let Some(v) = &def.value {
                    return Ok(v.clone());
                }
                let mut frame: Args = SmallVec::new();
                // Under a tracker, an argument's reads only count when the
                // body reads the parameter it is bound to.
                let mut masks: SmallVec<[u64; 6]> = SmallVec::new();
                for ((name, sort), a) in def.params.iter().zip(args) {
                    let v = match env.tracker {
                        Some(t) => {
                            let sub = ReadTracker::new(t.base);
                            let v = self.eval(
                                &Env {
                                    vars: env.vars,
                                    tracker: Some(&sub),
                                },
                                a,
                            )?;
                            masks.push(sub.mask.get());
                            v
                        }
                        None => self.eval(env, a)?,
                    };
                    if !v.fits(sort) {
                        return Err(self.sort_violation(&def.name, *name, &v, sort));
                    }
                    frame.push((*name, v));
                }
                let out = match env.tracker {
                    Some(t) => {
                        let inner = ReadTracker::new(frame.len());
                        let out = self.eval(
                            &Env {
                                vars: &frame,
                                tracker: Some(&inner),
                            },
                            &def.body,
                        );
                        let used = inner.mask.get();
                        for (j, m) in masks.iter().enumerate() {
                            if j >= 64 || used & (1 << j) != 0 {
                                t.mask.set(t.mask.get() | m);
                            }
                        }
                        out?
                    }
                    None => self.eval(&Env::new(&frame), &def.body)?,
                };
                if !out.fits(&def.result) {
                    return Err(self.sort_violation(&def.name, Sym::new("result"), &out, &def.result));
                }
                Ok(out)
            }
            Expr::Builtin(b, args) => self.builtin(env, *b, args),
            Expr::Bin(op, a, b) => self.binary(env, *op, a, b),
            Expr::Un(UnOp::Not, a) => Ok(Value::Bool(!self.bool(env, a)?)),
            Expr::Un(UnOp::Neg, a) => match self.eval(env, a)? {
                Value::Int(i) => i.checked_neg().map(Value::Int).ok_or(DataError::Overflow),
                Value::Real(r) => Ok(Value::Real(-r)),
                v => Err(DataError::TypeMismatch(format!("cannot negate {v:?}"))),
            },
            Expr::If(c, a, b) => {
                if self.bool(env, c)? {
                    self.eval(env, a)
                } else {
                    self.eval(env, b)
                }
            }
            Expr::List(items) => {
                let vals = items.iter().map(|i| self.eval(env, i)).collect::<Result<Vec<_>, _>>()?;
                Ok(Value::List(Arc::from(vals)))
            }
            Expr::Index(l, i) => {
                let list = self.eval(env, l)?;
                let idx = self.eval(env, i)?;
                match (&list, &idx) {
                    (Value::List(items), Value::Int(k)) => usize::try_from(*k)
                        .ok()
                        .and_then(|k| items.get(k))
                        .cloned()
                        .ok_or(DataError::IndexOutOfRange {
                            index: *k,
                            len: items.len(),
                        }),
                    _ => Err(DataError::TypeMismatch("list index".into())),
                }
            }
            Expr::In(x, set) => {
                let v = self.eval(env, x)?;
                for s in set {
                    if self.eval(env, s)? == v {
                        return Ok(Value::Bool(true));
                    }
                }
                Ok(Value::Bool(false))
            }
        }
    }

    pub fn bool(&self, env: &Env, e: &Expr) -> Result<bool, DataError> {
        match self.eval(env, e)? {
            Value::Bool(b) => Ok(b),
            v => Err(DataError::TypeMismatch(format!("expected Bool, got {v:?}"))),
        }
    }

    pub fn rational(&self, env: &Env, e: &Expr) -> Result<Rational, DataError> {
        let v = self.eval(env, e)?;
        v.as_rational()
            .ok_or_else(|| DataError::TypeMismatch(format!("expected a number, got {v:?}")))
    }

    fn sort_violation(&self, func: &str, param: Sym, v: &Value, sort: &super::Sort) -> DataError {
        if let (Value::Int(i), super::Sort::Nat) = (v, sort) {
            if *i < 0 {
                return DataError::NatUnderflow(format!("{func}: {param} = {i}"));
            }
        }
        DataError::TypeMismatch(format!(
            "{func}: {param} = {} is not of sort {}",
            v.display(self.sorts),
            sort.display(self.sorts)
        ))
    }

    fn builtin(&self, env: &Env, b: Builtin, args: &[Expr]) -> Result<Value, DataError> {
        match b {
            Builtin::Count => {
                let x = self.eval(env, &args[0])?;
                match self.eval(env, &args[1])? {
                    Value::List(items) => Ok(Value::Int(items.iter().filter(|v| **v == x).count() as i64)),
                    _ => Err(DataError::TypeMismatch("count expects a list".into())),
                }
            }
            Builtin::Len => match self.eval(env, &args[0])? {
                Value::List(items) => Ok(Value::Int(items.len() as i64)),
                _ => Err(DataError::TypeMismatch("len expects a list".into())),
            },
        }
    }

    fn binary(&self, env: &Env, op: BinOp, a: &Expr, b: &Expr) -> Result<Value, DataError> {
        match op {
            BinOp::And => return Ok(Value::Bool(self.bool(env, a)? && self.bool(env, b)?)),
            BinOp::Or => return Ok(Value::Bool(self.bool(env, a)? || self.bool(env, b)?)),
            _ => {}
        }
        let x = self.eval(env, a)?;
        let y = self.eval(env, b)?;
        match op {
            BinOp::Eq => return Ok(Value::Bool(x == y)),
            BinOp::Ne => return Ok(Value::Bool(x != y)),
            _ => {}
        }
        if let (Value::Int(i), Value::Int(j)) = (&x, &y) {
            let (i, j) = (*i, *j);
            return match op {
                BinOp::Add => i.checked_add(j).map(Value::Int).ok_or(DataError::Overflow),
                BinOp::Sub => i.checked_sub(j).map(Value::Int).ok_or(DataError::Overflow),
                BinOp::Mul => i.checked_mul(j).map(Value::Int).ok_or(DataError::Overflow),
                BinOp::Div => {
                    if j == 0 {
                        Err(DataError::DivisionByZero)
                    } else {
                        Ok(Value::number(Rational::new(i, j)))
                    }
                }
                BinOp::Mod => {
                    if j == 0 {
                        Err(DataError::DivisionByZero)
                    } else {
                        Ok(Value::Int(i.mod_floor(&j.abs())))
                    }
                }
                BinOp::Lt => Ok(Value::Bool(i < j)),
                BinOp::Le => Ok(Value::Bool(i <= j)),
                BinOp::Gt => Ok(Value::Bool(i > j)),
                BinOp::Ge => Ok(Value::Bool(i >= j)),
                _ => unreachable!(),
            };
        }
        let (Some(p), Some(q)) = (x.as_rational(), y.as_rational()) else {
            return Err(DataError::TypeMismatch(format!(
                "operator {} applied to {} and {}",
                op.symbol(),
                x.display(self.sorts),
                y.display(self.sorts)
            )));
        };
        let num = |r: Option<Rational>| r.map(Value::number).ok_or(DataError::Overflow);
        match op {
            BinOp::Add => num(p.checked_add(&q)),
            BinOp::Sub => num(p.checked_sub(&q)),
            BinOp::Mul => num(p.checked_mul(&q)),
            BinOp::Div => {
                if q.is_zero() {
                    Err(DataError::DivisionByZero)
                } else {
                    num(p.checked_div(&q))
                }
            }
            BinOp::Mod => Err(DataError::TypeMismatch("mod on non-integers".into())),
            BinOp::Lt => Ok(Value::Bool(p < q)),
            BinOp::Le => Ok(Value::Bool(p <= q)),
            BinOp::Gt => Ok(Value::Bool(p > q)),
            BinOp::Ge => Ok(Value::Bool(p >= q)),
            _ => unreachable!(),
        }
    }
}
