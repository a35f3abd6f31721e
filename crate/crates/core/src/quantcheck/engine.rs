use std::sync::Arc;

use num_traits::{CheckedAdd, CheckedDiv, CheckedMul, CheckedSub, Signed, Zero};
use rustc_hash::FxHashMap;
use smallvec::SmallVec;

use crate::datalang::{BinOp, DataError, Env, Evaluator, Expr, Rational, UnOp, Value};
use crate::speclang::{FixKind, Quant};
use crate::statespace::{ActionLabel, DistId, Plts, StateId};
use crate::symbol::Sym;

use super::compile::{FixId, Ir, Kind, NodeId, Pat};
use super::{QuantError, Scalar, V};

const DIST: u32 = 1 << 31;

type Key = (NodeId, u32, u32);
pub(crate) type Bindings = Vec<(Sym, Value)>;

/// Decisions taken at choice points, keyed by (modal node, environment,
/// state).
#[derive(Clone, Debug, Default)]
pub(crate) struct Recorder {
    pub labels: Vec<ActionLabel>,
    label_ids: FxHashMap<ActionLabel, u32>,
    pub choice_sets: Vec<Box<[u32]>>,
    choice_ids: FxHashMap<Box<[u32]>, u32>,
    pub envs: Vec<Box<[(Sym, Value)]>>,
    env_ids: FxHashMap<Box<[(Sym, Value)]>, u32>,
    pub entries: FxHashMap<(NodeId, u32, StateId), Entry>,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct Entry {
    pub choices: u32,
    pub chosen: u32,
    pub value: f64,
    /// Every alternative is as good as the chosen one.
    pub tied: bool,
}

impl Recorder {
    fn label(&mut self, l: &ActionLabel) -> u32 {
        if let Some(&i) = self.label_ids.get(l) {
            return i;
        }
        self.labels.push(l.clone());
        self.label_ids.insert(l.clone(), self.labels.len() as u32 - 1);
        self.labels.len() as u32 - 1
    }

    fn env(&mut self, env: Box<[(Sym, Value)]>) -> u32 {
        if let Some(&i) = self.env_ids.get(&env) {
            return i;
        }
        self.envs.push(env.clone());
        self.env_ids.insert(env, self.envs.len() as u32 - 1);
        self.envs.len() as u32 - 1
    }

    fn choices(&mut self, set: Box<[u32]>) -> u32 {
        if let Some(&i) = self.choice_ids.get(&set) {
            return i;
        }
        self.choice_sets.push(set.clone());
        self.choice_ids.insert(set, self.choice_sets.len() as u32 - 1);
        self.choice_sets.len() as u32 - 1
    }

    /// Drops decisions taken at the given nodes.
    pub fn forget(&mut self, nodes: &[NodeId]) {
        self.entries.retain(|k, _| !nodes.contains(&k.0));
    }
}

type PolicyKey = (NodeId, Box<[(Sym, Value)]>, StateId);

/// A fixed resolution of choice points.
#[derive(Clone, Debug, Default)]
pub(crate) struct Policy {
    pub map: FxHashMap<PolicyKey, ActionLabel>,
}

#[derive(Default)]
pub(crate) struct Hooks {
    pub record: Option<Recorder>,
    pub follow: Option<Policy>,
}

/// Equation variables of the generic solver.
#[derive(Default)]
pub(crate) struct VarTable<S> {
    pub index: FxHashMap<(FixId, Box<[Value]>, StateId), u32>,
    pub keys: Vec<(FixId, Box<[Value]>, StateId)>,
    pub values: Vec<V<S>>,
}

/// State of backward induction over a horizon parameter.
pub(crate) struct LayerCtx<S> {
    pub fix: FixId,
    pub h_pos: usize,
    pub acc: Option<(usize, Sym)>,
    pub r: i64,
    /// Values at layer `r + 1`, affine in the accumulator.
    pub next: Option<Vec<V<S>>>,
}

pub(crate) struct LayerSolution<S> {
    pub h0: i64,
    pub h_pos: usize,
    pub acc_pos: Option<usize>,
    pub values: Vec<V<S>>,
}

pub(crate) struct Engine<'a, S: Scalar> {
    pub ir: &'a Ir,
    pub plts: &'a Plts,
    ev: Evaluator<'a>,
    weights: Arc<Vec<Box<[S]>>>,
    env_ids: FxHashMap<Box<[(Sym, Value)]>, u32>,
    pure_memo: FxHashMap<Key, V<S>>,
    memo: FxHashMap<Key, (u32, V<S>)>,
    /// Impure memo entries from older generations are stale.
    pub gen: u32,
    pub layer: Option<LayerCtx<S>>,
    pub layered: Vec<Option<LayerSolution<S>>>,
    pub vars: VarTable<S>,
    /// Discovery mode: create variables on first use and collect the
    /// variables each evaluation reads.
    pub discover: bool,
    pub deps: Vec<u32>,
    pub record: Option<Recorder>,
    pub follow: Option<Policy>,
}

fn data_err(e: DataError) -> QuantError {
    match e {
        DataError::DivisionByZero => QuantError::UndefinedArithmetic("division by zero".into()),
        other => QuantError::Data(other.to_string()),
    }
}

fn overflow() -> QuantError {
    QuantError::Data("integer overflow in accumulator".into())
}

/// Tie-break key among equally good labels: fewest `true` arguments, then
/// the positions of the `true` arguments, then the label itself.
fn tie_key(l: &ActionLabel) -> (usize, Vec<usize>, &ActionLabel) {
    let trues: Vec<usize> = l
        .args
        .iter()
        .enumerate()
        .filter(|(_, v)| matches!(v, Value::Bool(true)))
        .map(|(i, _)| i)
        .collect();
    (trues.len(), trues, l)
}

impl<'a, S: Scalar> Engine<'a, S> {
    pub fn new(ir: &'a Ir, plts: &'a Plts, weights: Arc<Vec<Box<[S]>>>) -> Self {
        let mut env_ids = FxHashMap::default();
        env_ids.insert(Box::from([]), 0);
        Engine {
            ir,
            plts,
            ev: Evaluator::new(&plts.funcs, &plts.sorts),
            weights,
            env_ids,
            pure_memo: FxHashMap::default(),
            memo: FxHashMap::default(),
            gen: 0,
            layer: None,
            layered: (0..ir.fixes.len()).map(|_| None).collect(),
            vars: VarTable {
                index: FxHashMap::default(),
                keys: vec![],
                values: vec![],
            },
            discover: false,
            deps: vec![],
            record: None,
            follow: None,
        }
    }

    pub fn clear_memo(&mut self) {
        self.memo.clear();
    }

    pub fn clear_pure_memo(&mut self) {
        self.pure_memo.clear();
    }

    fn acc_sym(&self) -> Option<Sym> {
        self.layer.as_ref().and_then(|l| l.acc.map(|(_, s)| s))
    }

    /// Values of the node's free variables that are bound in `env`.
    fn project(&self, n: NodeId, env: &[(Sym, Value)]) -> Box<[(Sym, Value)]> {
        self.ir
            .node(n)
            .free
            .iter()
            .filter_map(|v| env.iter().rev().find(|(s, _)| s == v).map(|(s, x)| (*s, x.clone())))
            .collect()
    }

    fn env_id(&mut self, n: NodeId, env: &[(Sym, Value)]) -> u32 {
        if self.ir.node(n).free.is_empty() {
            return 0;
        }
        let p = self.project(n, env);
        let next = self.env_ids.len() as u32;
        *self.env_ids.entry(p).or_insert(next)
    }

    fn memo_get(&self, key: &Key, pure: bool) -> Option<V<S>> {
        if pure {
            self.pure_memo.get(key).cloned()
        } else if self.discover {
            None
        } else {
            match self.memo.get(key) {
                Some((g, v)) if *g == self.gen => Some(v.clone()),
                _ => None,
            }
        }
    }

    fn memo_put(&mut self, key: Key, pure: bool, v: &V<S>) {
        if pure {
            self.pure_memo.insert(key, v.clone());
        } else if !self.discover {
            self.memo.insert(key, (self.gen, v.clone()));
        }
    }

    /// Evaluates a data expression that must not depend on the symbolic
    /// accumulator.
    pub fn value(&self, e: &Expr, env: &[(Sym, Value)]) -> Result<Value, QuantError> {
        if let Some(acc) = self.acc_sym() {
            if e.mentions(acc) {
                return Err(QuantError::NonAffine);
            }
        }
        self.ev.eval(&Env::new(env), e).map_err(data_err)
    }

    fn rational(&self, e: &Expr, env: &[(Sym, Value)]) -> Result<Rational, QuantError> {
        self.value(e, env)?
            .as_rational()
            .ok_or_else(|| QuantError::Type("expected a number".into()))
    }

    /// `e` as `c0 + c1 * acc`.
    fn affine(&self, e: &Expr, env: &[(Sym, Value)], acc: Sym) -> Result<(Rational, Rational), QuantError> {
        if !e.mentions(acc) {
            let v = self
                .ev
                .eval(&Env::new(env), e)
                .map_err(data_err)?
                .as_rational()
                .ok_or(QuantError::NonAffine)?;
            return Ok((v, Rational::zero()));
        }
        let z = Rational::zero();
        Ok(match e {
            Expr::Var(x) if *x == acc => (z, Rational::from_integer(1)),
            Expr::Un(UnOp::Neg, a) => {
                let (a0, a1) = self.affine(a, env, acc)?;
                (-a0, -a1)
            }
            Expr::If(c, a, b) if !c.mentions(acc) => {
                let c = self.ev.bool(&Env::new(env), c).map_err(data_err)?;
                self.affine(if c { a } else { b }, env, acc)?
            }
            Expr::Bin(op, a, b) => {
                let (a0, a1) = self.affine(a, env, acc)?;
                let (b0, b1) = self.affine(b, env, acc)?;
                match op {
                    BinOp::Add => (
                        a0.checked_add(&b0).ok_or_else(overflow)?,
                        a1.checked_add(&b1).ok_or_else(overflow)?,
                    ),
                    BinOp::Sub => (
                        a0.checked_sub(&b0).ok_or_else(overflow)?,
                        a1.checked_sub(&b1).ok_or_else(overflow)?,
                    ),
                    BinOp::Mul if a1.is_zero() || b1.is_zero() => {
                        let c0 = a0.checked_mul(&b0).ok_or_else(overflow)?;
                        let x = a0.checked_mul(&b1).ok_or_else(overflow)?;
                        let y = a1.checked_mul(&b0).ok_or_else(overflow)?;
                        (c0, x.checked_add(&y).ok_or_else(overflow)?)
                    }
                    BinOp::Div if b1.is_zero() => {
                        if b0.is_zero() {
                            return Err(QuantError::UndefinedArithmetic("division by zero".into()));
                        }
                        (
                            a0.checked_div(&b0).ok_or_else(overflow)?,
                            a1.checked_div(&b0).ok_or_else(overflow)?,
                        )
                    }
                    _ => return Err(QuantError::NonAffine),
                }
            }
            _ => return Err(QuantError::NonAffine),
        })
    }

    fn data(&self, expr: &Expr, boolean: bool, env: &[(Sym, Value)]) -> Result<V<S>, QuantError> {
        if let Some(acc) = self.acc_sym() {
            if expr.mentions(acc) {
                if boolean {
                    return Err(QuantError::NonAffine);
                }
                let (c0, c1) = self.affine(expr, env, acc)?;
                return Ok(V::Fin(S::from_ratio(&c0), S::from_ratio(&c1)));
            }
        }
        match self.value(expr, env)? {
            Value::Bool(b) => Ok(V::from_bool(b)),
            v => v
                .as_rational()
                .map(|q| V::num(S::from_ratio(&q)))
                .ok_or_else(|| QuantError::Type("formula term is not a number".into())),
        }
    }

    pub fn eval(&mut self, n: NodeId, env: &mut Bindings, s: StateId) -> Result<V<S>, QuantError> {
        let ir = self.ir;
        let node = ir.node(n);
        match &node.kind {
            Kind::Data { expr, boolean } => self.data(expr, *boolean, env),
            Kind::Add(a, b) | Kind::Sub(a, b) => {
                let x = self.eval(*a, env, s)?;
                let y = self.eval(*b, env, s)?;
                let r = if matches!(node.kind, Kind::Add(..)) {
                    x.add(&y)
                } else {
                    x.sub(&y)
                };
                match r {
                    Err(_) if self.discover => Ok(V::zero()),
                    Err(QuantError::UndefinedArithmetic(m)) => Err(QuantError::UndefinedArithmetic(format!(
                        "{m} at state {}",
                        self.plts.state_string(s)
                    ))),
                    r => r,
                }
            }
            Kind::Scale(e, a) => {
                let c = self.rational(e, env)?;
                if c.is_negative() {
                    return Err(QuantError::UndefinedArithmetic(format!(
                        "negative factor {c} in scaling"
                    )));
                }
                let v = self.eval(*a, env, s)?;
                Ok(v.scale(&S::from_ratio(&c)))
            }
            Kind::And(a, b) | Kind::Or(a, b) => {
                let and = matches!(node.kind, Kind::And(..));
                let x = self.eval(*a, env, s)?;
                let dominated = if and { x == V::NegInf } else { x == V::PosInf };
                if dominated && (!self.discover || ir.node(*a).pure) {
                    return Ok(x);
                }
                let y = self.eval(*b, env, s)?;
                if self.discover {
                    return Ok(if and { x.min(y) } else { x.max(y) }.unwrap_or(V::zero()));
                }
                if and {
                    x.min(y)
                } else {
                    x.max(y)
                }
            }
            Kind::Modal { .. } | Kind::Quant { .. } | Kind::Fix(_) => {
                let key = (n, self.env_id(n, env), s);
                if let Some(v) = self.memo_get(&key, node.pure) {
                    return Ok(v);
                }
                let v = match &node.kind {
                    Kind::Modal { .. } => self.modal(n, env, s)?,
                    Kind::Quant { .. } => self.quant(n, env, s)?,
                    Kind::Fix(f) => self.fix_occurrence(*f, env, s)?,
                    _ => unreachable!(),
                };
                self.memo_put(key, node.pure, &v);
                Ok(v)
            }
            Kind::Call { fix, args } => self.call(*fix, args, env, s),
        }
    }

    /// Probability-weighted value over a distribution.
    pub fn expect(&mut self, n: NodeId, env: &mut Bindings, d: DistId) -> Result<V<S>, QuantError> {
        let pure = self.ir.node(n).pure;
        let key = (n, self.env_id(n, env), d | DIST);
        if let Some(v) = self.memo_get(&key, pure) {
            return Ok(v);
        }
        let plts = self.plts;
        let w = self.weights.clone();
        let w = &w[d as usize];
        let mut acc = V::zero();
        for (k, (t, _)) in plts.dist(d).support.iter().enumerate() {
            let v = self.eval(n, env, *t)?;
            acc = match acc.add(&v.scale(&w[k])) {
                Ok(a) => a,
                Err(_) if self.discover => V::zero(),
                Err(_) => {
                    return Err(QuantError::UndefinedArithmetic(format!(
                        "inf and -inf mixed in distribution {}",
                        plts.dist_string(d)
                    )))
                }
            };
        }
        self.memo_put(key, pure, &acc);
        Ok(acc)
    }

    fn modal(&mut self, n: NodeId, env: &mut Bindings, s: StateId) -> Result<V<S>, QuantError> {
        let ir = self.ir;
        let Kind::Modal {
            diamond,
            act,
            pats,
            body,
        } = &ir.node(n).kind
        else {
            unreachable!()
        };
        let diamond = *diamond;
        let plts = self.plts;
        let succ = plts.successors(s);
        let mark = env.len();
        // One entry per distinct label: (index of first transition, value).
        let mut groups: SmallVec<[(usize, V<S>); 8]> = SmallVec::new();
        for (i, t) in succ.iter().enumerate() {
            if act.is_some_and(|a| a != t.label.act) {
                continue;
            }
            let mut ok = true;
            for (p, v) in pats.iter().zip(t.label.args.iter()) {
                match p {
                    Pat::Bind(x) => env.push((*x, v.clone())),
                    Pat::Eq(e) => match self.value(e, env) {
                        Ok(w) if w == *v => {}
                        Ok(_) => {
                            ok = false;
                            break;
                        }
                        Err(e) => {
                            env.truncate(mark);
                            return Err(e);
                        }
                    },
                }
            }
            if !ok {
                env.truncate(mark);
                continue;
            }
            let val = self.expect(*body, env, t.dist);
            env.truncate(mark);
            let val = val?;
            match groups.last_mut() {
                Some((j, g)) if succ[*j].label == t.label => {
                    let cur = std::mem::replace(g, V::zero());
                    *g = if diamond { cur.max(val)? } else { cur.min(val)? };
                }
                _ => groups.push((i, val)),
            }
        }
        match groups.len() {
            0 => return Ok(if diamond { V::NegInf } else { V::PosInf }),
            1 => return Ok(groups.pop().unwrap().1),
            _ => {}
        }
        if !self.discover {
            if let Some(policy) = &self.follow {
                let key = (n, self.project(n, env), s);
                let label = policy.map.get(&key).ok_or(QuantError::IncompleteTable)?;
                return groups
                    .iter()
                    .find(|(j, _)| succ[*j].label == *label)
                    .map(|(_, v)| v.clone())
                    .ok_or(QuantError::IncompleteTable);
            }
        }
        let mut best = 0;
        for g in 1..groups.len() {
            let ord = groups[g].1.cmp_close(&groups[best].1)?;
            let better = if diamond {
                ord == std::cmp::Ordering::Greater
            } else {
                ord == std::cmp::Ordering::Less
            };
            if better
                || (ord == std::cmp::Ordering::Equal
                    && tie_key(&succ[groups[g].0].label) < tie_key(&succ[groups[best].0].label))
            {
                best = g;
            }
        }
        if let (false, Some(_)) = (self.discover, self.record.as_ref()) {
            let env_key = self.project(n, env);
            let value = groups[best].1.to_ext().to_f64();
            let mut tied = true;
            for (g, (_, v)) in groups.iter().enumerate() {
                if g != best && v.cmp_close(&groups[best].1)? != std::cmp::Ordering::Equal {
                    tied = false;
                    break;
                }
            }
            let rec = self.record.as_mut().unwrap();
            let labels: Box<[u32]> = groups.iter().map(|(j, _)| rec.label(&succ[*j].label)).collect();
            let chosen = labels[best];
            let choices = rec.choices(labels);
            let env_id = rec.env(env_key);
            rec.entries.insert(
                (n, env_id, s),
                Entry {
                    choices,
                    chosen,
                    value,
                    tied,
                },
            );
        }
        Ok(groups.swap_remove(best).1)
    }

    fn quant(&mut self, n: NodeId, env: &mut Bindings, s: StateId) -> Result<V<S>, QuantError> {
        let ir = self.ir;
        let Kind::Quant { q, vars, body } = &ir.node(n).kind else {
            unreachable!()
        };
        let mut acc = match q {
            Quant::Sup => V::NegInf,
            Quant::Inf => V::PosInf,
            Quant::Sum => V::zero(),
        };
        if vars.iter().any(|(_, d)| d.is_empty()) {
            return Ok(acc);
        }
        let mark = env.len();
        let mut idx = vec![0usize; vars.len()];
        loop {
            env.truncate(mark);
            for (k, (x, dom)) in vars.iter().enumerate() {
                env.push((*x, dom[idx[k]].clone()));
            }
            let v = self.eval(*body, env, s);
            env.truncate(mark);
            let v = v?;
            acc = match q {
                Quant::Sup => acc.max(v)?,
                Quant::Inf => acc.min(v)?,
                Quant::Sum => match acc.add(&v) {
                    Ok(a) => a,
                    Err(_) if self.discover => V::zero(),
                    Err(e) => return Err(e),
                },
            };
            // odometer, last variable fastest
            let mut k = vars.len();
            loop {
                if k == 0 {
                    return Ok(acc);
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] < vars[k].1.len() {
                    break;
                }
                idx[k] = 0;
            }
        }
    }

    fn fix_occurrence(&mut self, f: FixId, env: &mut Bindings, s: StateId) -> Result<V<S>, QuantError> {
        let def = &self.ir.fixes[f as usize];
        if let Some(sol) = &self.layered[f as usize] {
            let h = self.value(&def.init[sol.h_pos], env)?;
            if h.as_int() != Some(sol.h0) {
                return Err(QuantError::Data("horizon start changed".into()));
            }
            let v = sol.values[s as usize].clone();
            return Ok(match (sol.acc_pos, v) {
                (Some(p), V::Fin(a, b)) => {
                    let a0 = S::from_ratio(&self.rational(&def.init[p], env)?);
                    V::num(a.add(&b.mul(&a0)))
                }
                (_, v) => v,
            });
        }
        self.var(f, &def.init, env, s)
    }

    fn call(&mut self, f: FixId, args: &[Expr], env: &mut Bindings, s: StateId) -> Result<V<S>, QuantError> {
        if let Some(ctx) = &self.layer {
            if ctx.fix == f {
                let h = self.value(&args[ctx.h_pos], env)?;
                if h.as_int() != Some(ctx.r + 1) {
                    return Err(QuantError::NonAffine);
                }
                let next = ctx.next.as_ref().ok_or(QuantError::NonAffine)?;
                let v = next[s as usize].clone();
                return Ok(match (ctx.acc, v) {
                    (Some((p, acc)), V::Fin(a, b)) => {
                        let (c0, c1) = self.affine(&args[p], env, acc)?;
                        let a = a.add(&b.mul(&S::from_ratio(&c0)));
                        V::Fin(a, b.mul(&S::from_ratio(&c1)))
                    }
                    (_, v) => v,
                });
            }
        }
        self.var(f, args, env, s)
    }

    /// Generic equation variable `f(outer, args)` at `s`.
    fn var(&mut self, f: FixId, args: &[Expr], env: &mut Bindings, s: StateId) -> Result<V<S>, QuantError> {
        let def = &self.ir.fixes[f as usize];
        let mut key = Vec::with_capacity(def.outer.len() + args.len());
        for o in &def.outer {
            let v = env
                .iter()
                .rev()
                .find(|(x, _)| x == o)
                .map(|(_, v)| v.clone())
                .ok_or_else(|| QuantError::UnboundParameter(o.to_string()))?;
            key.push(v);
        }
        for (e, (p, sort)) in args.iter().zip(&def.params) {
            let v = self.value(e, env)?;
            if !v.fits(sort) {
                return Err(QuantError::Data(format!(
                    "argument {p} of {} out of range: {}",
                    def.name,
                    v.display(&self.plts.sorts)
                )));
            }
            key.push(v);
        }
        let k = (f, key.into_boxed_slice(), s);
        if let Some(&id) = self.vars.index.get(&k) {
            if self.discover {
                self.deps.push(id);
            }
            return Ok(self.vars.values[id as usize].clone());
        }
        if !self.discover {
            return Err(QuantError::Data(
                "equation variable reached only after discovery".into(),
            ));
        }
        let id = self.vars.keys.len() as u32;
        let init = match def.kind {
            FixKind::Mu => V::NegInf,
            FixKind::Nu => V::PosInf,
        };
        self.vars.index.insert(k.clone(), id);
        self.vars.keys.push(k);
        self.vars.values.push(init.clone());
        self.deps.push(id);
        Ok(init)
    }

    /// Right-hand side of a generic variable.
    pub fn eval_var_body(&mut self, id: u32) -> Result<V<S>, QuantError> {
        let (f, vals, s) = self.vars.keys[id as usize].clone();
        let def = &self.ir.fixes[f as usize];
        let mut env: Bindings = def
            .outer
            .iter()
            .copied()
            .chain(def.params.iter().map(|(p, _)| *p))
            .zip(vals.iter().cloned())
            .collect();
        self.eval(def.body, &mut env, s)
    }
}
