//! Syntactic bounded-support analysis for `dist` over integer sorts.
//!
//! For a weight `w(x)` we compute an interval outside of which `w` is
//! provably zero, recognising guards such as `if(x < 24, e, 0)`, products
//! of such guards and equality chains, after inlining function calls.

use crate::datalang::{BinOp, Expr, FuncTable, Value};
use crate::symbol::Sym;

/// Half-open integer interval `[lo, hi)`; `None` means unbounded.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Interval {
    pub lo: Option<i64>,
    pub hi: Option<i64>,
}

impl Interval {
    const ALL: Interval = Interval { lo: None, hi: None };
    const EMPTY: Interval = Interval {
        lo: Some(0),
        hi: Some(0),
    };

    fn is_empty(&self) -> bool {
        matches!((self.lo, self.hi), (Some(l), Some(h)) if l >= h)
    }

    fn meet(a: Interval, b: Interval) -> Interval {
        let lo = match (a.lo, b.lo) {
            (Some(x), Some(y)) => Some(x.max(y)),
            (x, None) | (None, x) => x,
        };
        let hi = match (a.hi, b.hi) {
            (Some(x), Some(y)) => Some(x.min(y)),
            (x, None) | (None, x) => x,
        };
        Interval { lo, hi }
    }

    fn hull(a: Interval, b: Interval) -> Interval {
        if a.is_empty() {
            return b;
        }
        if b.is_empty() {
            return a;
        }
        Interval {
            lo: a.lo.zip(b.lo).map(|(x, y)| x.min(y)),
            hi: a.hi.zip(b.hi).map(|(x, y)| x.max(y)),
        }
    }
}

const MAX_INLINE_DEPTH: usize = 32;

/// Interval outside of which `weight` is zero as a function of `x`.
pub fn support_interval(weight: &Expr, x: Sym, funcs: &FuncTable) -> Interval {
    bound(weight, x, funcs, 0).unwrap_or(Interval::ALL)
}

fn is_zero_lit(e: &Expr) -> bool {
    matches!(e, Expr::Lit(v) if v.is_zero())
}

fn inline(e: &Expr, funcs: &FuncTable) -> Option<Expr> {
    match e {
        Expr::Func(id, args) => {
            let def = funcs.get(*id);
            if let Some(v) = &def.value {
                return Some(Expr::Lit(v.clone()));
            }
            let map: Vec<(Sym, Expr)> = def.params.iter().map(|(p, _)| *p).zip(args.iter().cloned()).collect();
            Some(def.body.substitute_exprs(&map))
        }
        _ => None,
    }
}

/// `None`: no bound known.
fn bound(e: &Expr, x: Sym, funcs: &FuncTable, depth: usize) -> Option<Interval> {
    if is_zero_lit(e) {
        return Some(Interval::EMPTY);
    }
    if depth > MAX_INLINE_DEPTH {
        return None;
    }
    match e {
        Expr::If(c, a, b) => {
            let ba = bound(a, x, funcs, depth);
            let bb = bound(b, x, funcs, depth)?;
            let then = match (cond_range(c, x, funcs, depth), ba) {
                (Some(r), Some(i)) => Interval::meet(r, i),
                (Some(r), None) => r,
                (None, Some(i)) => i,
                (None, None) => return None,
            };
            Some(Interval::hull(then, bb))
        }
        Expr::Bin(BinOp::Mul, a, b) => match (bound(a, x, funcs, depth), bound(b, x, funcs, depth)) {
            (Some(i), Some(j)) => Some(Interval::meet(i, j)),
            (i, None) | (None, i) => i,
        },
        Expr::Bin(BinOp::Div, a, _) => bound(a, x, funcs, depth),
        Expr::Func(..) => bound(&inline(e, funcs)?, x, funcs, depth + 1),
        _ => None,
    }
}

fn const_int(e: &Expr) -> Option<i64> {
    match e {
        Expr::Lit(Value::Int(i)) => Some(*i),
        _ => None,
    }
}

fn is_var(e: &Expr, x: Sym) -> bool {
    matches!(e, Expr::Var(v) if *v == x)
}

/// Interval of `x` values on which `c` may hold.
fn cond_range(c: &Expr, x: Sym, funcs: &FuncTable, depth: usize) -> Option<Interval> {
    match c {
        Expr::Bin(BinOp::And, a, b) => match (cond_range(a, x, funcs, depth), cond_range(b, x, funcs, depth)) {
            (Some(i), Some(j)) => Some(Interval::meet(i, j)),
            (i, None) | (None, i) => i,
        },
        Expr::Bin(BinOp::Or, a, b) => Some(Interval::hull(
            cond_range(a, x, funcs, depth)?,
            cond_range(b, x, funcs, depth)?,
        )),
        Expr::Bin(op, a, b) if op.is_comparison() => {
            // Normalise to `x op k`.
            let (op, k) = if is_var(a, x) {
                (*op, const_int(b)?)
            } else if is_var(b, x) {
                let flipped = match op {
                    BinOp::Lt => BinOp::Gt,
                    BinOp::Le => BinOp::Ge,
                    BinOp::Gt => BinOp::Lt,
                    BinOp::Ge => BinOp::Le,
                    o => *o,
                };
                (flipped, const_int(a)?)
            } else {
                return None;
            };
            let k1 = k.checked_add(1)?;
            Some(match op {
                BinOp::Lt => Interval { lo: None, hi: Some(k) },
                BinOp::Le => Interval { lo: None, hi: Some(k1) },
                BinOp::Gt => Interval { lo: Some(k1), hi: None },
                BinOp::Ge => Interval { lo: Some(k), hi: None },
                BinOp::Eq => Interval {
                    lo: Some(k),
                    hi: Some(k1),
                },
                _ => return None,
            })
        }
        Expr::Func(..) if depth < MAX_INLINE_DEPTH => cond_range(&inline(c, funcs)?, x, funcs, depth + 1),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datalang::{resolve, Sort, SortTable, TypeCtx};
    use crate::speclang::parse_expr;

    fn interval(src: &str, funcs: &FuncTable) -> Interval {
        let sorts = SortTable::default();
        let x = Sym::new("x");
        let ctx = TypeCtx::new(&sorts, funcs).with(x, Sort::Nat);
        let (e, _) = resolve(&parse_expr(src).unwrap(), &ctx).unwrap();
        support_interval(&e, x, funcs)
    }

    #[test]
    fn guard_gives_bound() {
        let f = FuncTable::default();
        assert_eq!(interval("if(x < 24, 1/24, 0)", &f).hi, Some(24));
        assert_eq!(interval("if(24 > x, 1/24, 0)", &f).hi, Some(24));
        assert_eq!(interval("1/24", &f), Interval::ALL);
        assert_eq!(
            interval("if(x == 0, 1/2, if(x == 3, 1/2, 0))", &f),
            Interval {
                lo: Some(0),
                hi: Some(4)
            }
        );
    }

    #[test]
    fn bound_through_function_and_product() {
        let sorts = SortTable::default();
        let mut f = FuncTable::default();
        let body = parse_expr("if(i < 24, 1/24, 0)").unwrap();
        f.define(
            &sorts,
            "distribution",
            vec![(Sym::new("i"), Sort::Nat)],
            Sort::Real,
            &body,
        )
        .unwrap();
        let i = interval("distribution(x) * distribution(7)", &f);
        assert_eq!(i.hi, Some(24));
    }
}
