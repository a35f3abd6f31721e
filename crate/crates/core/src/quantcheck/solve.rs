use std::sync::Arc;
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_rational::BigRational;

use crate::datalang::{BinOp, Env, Evaluator, Expr, Sort, Value};
use crate::speclang::{FixKind, FormulaSpec};
use crate::statespace::{Plts, StateId};
use crate::symbol::Sym;

use super::compile::{compile, FixId, Ir, Kind, NodeId};
use super::engine::{Engine, Hooks, LayerCtx, LayerSolution};
use super::ext::simplest_between;
use super::{lower_regular, Arithmetic, EvalOptions, EvalResult, ExtReal, QuantError, Scalar, V};

/// Largest horizon searched for backward induction.
const MAX_LAYERS: i64 = 10_000_000;
/// Auto arithmetic stays exact up to this many layers ...
const EXACT_LAYERS: i64 = 64;
/// ... and this many layer-weighted distribution entries.
const EXACT_WORK: f64 = 4e6;

#[derive(Clone, Debug)]
pub(crate) enum Target {
    Init,
    AllStates,
    States(Vec<StateId>),
}

/// Backward induction over a horizon parameter `h` that every recursive
/// call increments, from the layer where recursion stops down to `h0`.
#[derive(Clone, Debug)]
pub(crate) struct LayerPlan {
    pub h_pos: usize,
    pub acc_pos: Option<usize>,
    pub h0: i64,
    pub top: i64,
}

pub(crate) struct Run<'a> {
    pub plts: &'a Plts,
    pub ir: Arc<Ir>,
    opts: &'a EvalOptions,
    target: Target,
    pub plans: Vec<Option<LayerPlan>>,
    arithmetic: Arithmetic,
    values: Vec<ExtReal>,
    exact: bool,
    iterations: usize,
    variables: usize,
    layers: usize,
    elapsed: Duration,
    /// Generic system, kept for inspection.
    system: Option<EqSystem>,
    keep_system: bool,
}

/// Equation variables `(fixpoint, parameter values, state)` with their
/// signs, dependencies and solution.
#[derive(Clone, Debug, Default)]
pub struct EqSystem {
    pub variables: Vec<EqVar>,
}

#[derive(Clone, Debug)]
pub struct EqVar {
    pub fixpoint: String,
    /// Values of the enclosing data variables the fixpoint reads, then of
    /// its parameters.
    pub args: Vec<Value>,
    pub state: StateId,
    pub sign: FixKind,
    pub deps: Vec<u32>,
    pub value: ExtReal,
}

impl EqSystem {
    pub fn len(&self) -> usize {
        self.variables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variables.is_empty()
    }

    /// Solution of the variable of `fixpoint` at `state` with the given
    /// parameter values.
    pub fn lookup(&self, fixpoint: &str, args: &[Value], state: StateId) -> Option<&ExtReal> {
        self.variables
            .iter()
            .find(|v| v.fixpoint == fixpoint && v.args == args && v.state == state)
            .map(|v| &v.value)
    }
}

/// Builds and solves the equation system without backward induction, so
/// every fixpoint is represented by explicit variables.
pub fn equation_system(plts: &Plts, f: &FormulaSpec, opts: &EvalOptions) -> Result<EqSystem, QuantError> {
    let mut run = Run::new(plts, f, opts, Target::Init)?;
    run.plans.iter_mut().for_each(|p| *p = None);
    run.keep_system = true;
    run.execute(&mut Hooks::default())?;
    Ok(run.system.take().unwrap_or_default())
}

fn is_increment(e: &Expr, h: Sym) -> bool {
    let one = |x: &Expr| matches!(x, Expr::Lit(Value::Int(1)));
    let var = |x: &Expr| matches!(x, Expr::Var(v) if *v == h);
    match e {
        Expr::Bin(BinOp::Add, a, b) => (var(a) && one(b)) || (one(a) && var(b)),
        _ => false,
    }
}

/// Whether every call below `n` sits under a conjunction whose left side
/// is a guard on `h` alone that is false at `r` (with `r = None`: whether
/// such guards exist at all).
fn calls_cut(ir: &Ir, ev: &Evaluator, n: NodeId, h: Sym, r: Option<i64>) -> bool {
    match &ir.node(n).kind {
        Kind::Call { .. } | Kind::Fix(_) => false,
        Kind::And(a, b) => {
            if let Kind::Data { expr, boolean: true } = &ir.node(*a).kind {
                let fv = expr.free_vars();
                if fv.iter().all(|v| *v == h) {
                    match r {
                        None => return true,
                        Some(r) => {
                            let env = [(h, Value::Int(r))];
                            if ev.bool(&Env::new(&env), expr) == Ok(false) {
                                return true;
                            }
                        }
                    }
                }
            }
            calls_cut(ir, ev, *a, h, r) && calls_cut(ir, ev, *b, h, r)
        }
        _ => ir.children(n).into_iter().all(|c| calls_cut(ir, ev, c, h, r)),
    }
}

fn plan_fix(ir: &Ir, ev: &Evaluator, f: FixId) -> Option<LayerPlan> {
    let def = &ir.fixes[f as usize];
    if !def.outer.is_empty() {
        return None;
    }
    let sub = ir.subtree(def.body);
    let mut calls = vec![];
    for m in &sub {
        match &ir.node(*m).kind {
            Kind::Fix(_) => return None,
            Kind::Call { fix, args } if *fix == f => calls.push(args),
            Kind::Call { .. } => return None,
            _ => {}
        }
    }
    if calls.is_empty() {
        return None;
    }
    let h_pos = def.params.iter().enumerate().position(|(i, (p, sort))| {
        matches!(sort, Sort::Nat | Sort::Int) && calls.iter().all(|args| is_increment(&args[i], *p))
    })?;
    let others: Vec<usize> = (0..def.params.len()).filter(|i| *i != h_pos).collect();
    if others.len() > 1 {
        return None;
    }
    let acc_pos = others.first().copied();
    if let Some(p) = acc_pos {
        if !def.params[p].1.is_numeric() {
            return None;
        }
    }
    let init = &def.init[h_pos];
    if !init.free_vars().is_empty() {
        return None;
    }
    let h0 = ev.eval(&Env::EMPTY, init).ok()?.as_int()?;
    let h = def.params[h_pos].0;
    if !calls_cut(ir, ev, def.body, h, None) {
        return None;
    }
    let mut r = h0;
    while !calls_cut(ir, ev, def.body, h, Some(r)) {
        r += 1;
        if r - h0 > MAX_LAYERS {
            return None;
        }
    }
    Some(LayerPlan {
        h_pos,
        acc_pos,
        h0,
        top: r,
    })
}

impl<'a> Run<'a> {
    pub fn new(plts: &'a Plts, f: &FormulaSpec, opts: &'a EvalOptions, target: Target) -> Result<Self, QuantError> {
        if opts.tolerance.is_nan() || opts.tolerance <= 0.0 {
            return Err(QuantError::Type("tolerance must be positive".into()));
        }
        let lowered = lower_regular(f)?;
        let ir = compile(&lowered.formula, plts, &opts.params)?;
        let ev = Evaluator::new(&plts.funcs, &plts.sorts);
        let plans = (0..ir.fixes.len() as FixId).map(|f| plan_fix(&ir, &ev, f)).collect();
        Ok(Run {
            plts,
            ir: Arc::new(ir),
            opts,
            target,
            plans,
            arithmetic: opts.arithmetic,
            values: vec![],
            exact: true,
            iterations: 0,
            variables: 0,
            layers: 0,
            elapsed: Duration::ZERO,
            system: None,
            keep_system: false,
        })
    }

    fn choose_arithmetic(&self) -> Arithmetic {
        match self.opts.arithmetic {
            Arithmetic::Auto => {
                let support: usize = self.plts.dists().iter().map(|d| d.support.len()).sum();
                let big = self.plans.iter().flatten().any(|p| {
                    let layers = p.top - p.h0 + 1;
                    layers > EXACT_LAYERS || layers as f64 * support as f64 > EXACT_WORK
                });
                if big {
                    Arithmetic::Float
                } else {
                    Arithmetic::Exact
                }
            }
            a => a,
        }
    }

    pub fn execute(&mut self, hooks: &mut Hooks) -> Result<(), QuantError> {
        let start = Instant::now();
        self.arithmetic = self.choose_arithmetic();
        match self.arithmetic {
            Arithmetic::Float => self.go::<f64>(hooks)?,
            _ => self.go::<BigRational>(hooks)?,
        }
        self.elapsed = start.elapsed();
        Ok(())
    }

    pub fn result(&self) -> EvalResult {
        EvalResult {
            value: self.values.first().cloned().unwrap_or(ExtReal::NegInf),
            exact: self.exact,
            iterations: self.iterations,
            variables: self.variables,
            layers: self.layers,
            arithmetic: self.arithmetic,
            elapsed: self.elapsed,
        }
    }

    /// Horizon parameter of the first fixpoint solved by backward
    /// induction, with the value at which its recursion stops.
    pub fn horizon(&self) -> Option<(Sym, i64)> {
        self.plans
            .iter()
            .enumerate()
            .find_map(|(f, p)| p.as_ref().map(|p| (self.ir.fixes[f].params[p.h_pos].0, p.top)))
    }

    pub fn per_state(&mut self) -> Vec<ExtReal> {
        std::mem::take(&mut self.values)
    }

    fn go<S: Scalar>(&mut self, hooks: &mut Hooks) -> Result<(), QuantError> {
        let plts = self.plts;
        let weights: Vec<Box<[S]>> = plts
            .dists()
            .iter()
            .map(|d| d.support.iter().map(|(_, p)| S::from_ratio(p)).collect())
            .collect();
        let ir = self.ir.clone();
        let mut eng = Engine::<S>::new(&ir, plts, Arc::new(weights));
        eng.record = hooks.record.take();
        eng.follow = hooks.follow.take();
        let r = self.solve(&mut eng);
        hooks.record = eng.record.take();
        hooks.follow = eng.follow.take();
        r
    }

    fn solve<S: Scalar>(&mut self, eng: &mut Engine<S>) -> Result<(), QuantError> {
        self.exact = S::EXACT;
        for f in 0..self.ir.fixes.len() {
            let Some(plan) = self.plans[f].clone() else {
                continue;
            };
            match solve_layered(eng, f as FixId, &plan) {
                Ok(sol) => {
                    self.layers += (plan.top - plan.h0 + 1) as usize;
                    eng.layered[f] = Some(sol);
                }
                Err(QuantError::NonAffine) => {
                    // Solve this one with explicit variables instead.
                    eng.clear_memo();
                    eng.clear_pure_memo();
                    if let Some(rec) = eng.record.as_mut() {
                        rec.forget(&self.ir.subtree(self.ir.fixes[f].body));
                    }
                    self.plans[f] = None;
                }
                Err(e) => return Err(e),
            }
        }
        let root = self.ir.root;
        let plts = self.plts;
        let states: Vec<StateId> = match &self.target {
            Target::Init => plts.dist(plts.init()).support.iter().map(|(s, _)| *s).collect(),
            Target::AllStates => (0..plts.num_states() as StateId).collect(),
            Target::States(v) => v.clone(),
        };
        // Discovery of the generic variables.
        eng.discover = true;
        for &s in &states {
            eng.eval(root, &mut vec![], s)?;
        }
        let mut deps: Vec<Vec<u32>> = vec![];
        let mut i = 0;
        while (i as usize) < eng.vars.keys.len() {
            eng.deps.clear();
            eng.eval_var_body(i)?;
            let mut d = std::mem::take(&mut eng.deps);
            d.sort_unstable();
            d.dedup();
            deps.push(d);
            i += 1;
        }
        eng.discover = false;
        self.variables = deps.len();
        for comp in tarjan(&deps) {
            let cyclic = comp.len() > 1 || deps[comp[0] as usize].contains(&comp[0]);
            if !cyclic {
                let v = eng.eval_var_body(comp[0])?;
                eng.vars.values[comp[0] as usize] = v;
                continue;
            }
            let kind = self.ir.fixes[eng.vars.keys[comp[0] as usize].0 as usize].kind;
            if comp
                .iter()
                .any(|&v| self.ir.fixes[eng.vars.keys[v as usize].0 as usize].kind != kind)
            {
                return Err(QuantError::MixedSignCycle);
            }
            self.kleene(eng, &comp, kind)?;
        }
        eng.gen += 1;
        self.values = match &self.target {
            Target::Init => {
                let v = eng.expect(root, &mut vec![], plts.init())?;
                vec![v.to_ext()]
            }
            _ => {
                let mut out = Vec::with_capacity(states.len());
                for &s in &states {
                    out.push(eng.eval(root, &mut vec![], s)?.to_ext());
                }
                out
            }
        };
        if self.keep_system {
            self.system = Some(EqSystem {
                variables: (0..deps.len())
                    .map(|i| {
                        let (f, args, state) = &eng.vars.keys[i];
                        let def = &self.ir.fixes[*f as usize];
                        EqVar {
                            fixpoint: def.name.to_string(),
                            args: args.to_vec(),
                            state: *state,
                            sign: def.kind,
                            deps: deps[i].clone(),
                            value: eng.vars.values[i].to_ext(),
                        }
                    })
                    .collect(),
            });
        }
        Ok(())
    }

    /// Kleene iteration on one component, then an attempt to recover the
    /// exact solution from the approximation.
    fn kleene<S: Scalar>(&mut self, eng: &mut Engine<S>, comp: &[u32], kind: FixKind) -> Result<(), QuantError> {
        let tol = self.opts.tolerance;
        let mut sweeps = 0;
        loop {
            sweeps += 1;
            if sweeps > self.opts.max_iterations {
                return Err(QuantError::NonConvergence(self.opts.max_iterations));
            }
            eng.gen += 1;
            let mut delta: f64 = 0.0;
            for &id in comp {
                let new = eng.eval_var_body(id)?.round();
                let old = &eng.vars.values[id as usize];
                let ord = new.cmp_value(old).unwrap_or(std::cmp::Ordering::Equal);
                let regress = match kind {
                    FixKind::Mu => ord == std::cmp::Ordering::Less,
                    FixKind::Nu => ord == std::cmp::Ordering::Greater,
                };
                debug_assert!(
                    !regress || new.distance(old) < 1e-9 * (1.0 + old.distance(&V::zero())),
                    "non-monotone iteration"
                );
                let scale = 1.0f64.max(new.distance(&V::zero()));
                delta = delta.max(new.distance(old) / scale);
                eng.vars.values[id as usize] = new;
            }
            if delta <= tol {
                break;
            }
        }
        self.iterations += sweeps;
        // Every sweep changed some value, so the result is exact only when
        // iteration stopped on a fixpoint or a simple fraction near the
        // approximation satisfies the equations exactly.
        if !S::EXACT {
            return Ok(());
        }
        let approx: Vec<V<S>> = comp.iter().map(|&id| eng.vars.values[id as usize].clone()).collect();
        eng.gen += 1;
        let mut stable = true;
        for (k, &id) in comp.iter().enumerate() {
            if eng.eval_var_body(id)? != approx[k] {
                stable = false;
                break;
            }
        }
        if stable {
            return Ok(());
        }
        // The error of the approximation can exceed the last change by the
        // contraction factor, so widen the window until a candidate checks.
        let mut ok = false;
        let mut eps = tol;
        while !ok && eps < 1e-2 {
            for (k, &id) in comp.iter().enumerate() {
                eng.vars.values[id as usize] = snap(&approx[k], eps);
            }
            eng.gen += 1;
            ok = true;
            for &id in comp {
                if eng.eval_var_body(id)? != eng.vars.values[id as usize] {
                    ok = false;
                    break;
                }
            }
            eps *= 16.0;
        }
        if !ok {
            for (k, &id) in comp.iter().enumerate() {
                eng.vars.values[id as usize] = approx[k].clone();
            }
            self.exact = false;
        }
        eng.gen += 1;
        Ok(())
    }
}

fn snap<S: Scalar>(v: &V<S>, tol: f64) -> V<S> {
    let near = |x: &S| -> S {
        let q = x.to_ext();
        let eps = tol * 1f64.max(x.to_f64().abs());
        let eps = BigRational::from_float(eps).unwrap_or_else(|| BigRational::from_integer(BigInt::from(0)));
        S::from_big(&simplest_between(&(&q - &eps), &(&q + &eps)))
    };
    match v {
        V::Fin(a, b) => V::Fin(near(a), near(b)),
        other => other.clone(),
    }
}

fn solve_layered<S: Scalar>(eng: &mut Engine<S>, f: FixId, plan: &LayerPlan) -> Result<LayerSolution<S>, QuantError> {
    let ir = eng.ir;
    let def = &ir.fixes[f as usize];
    let h = def.params[plan.h_pos].0;
    let acc = plan.acc_pos.map(|p| (p, def.params[p].0));
    let n = eng.plts.num_states();
    let mut next: Option<Vec<V<S>>> = None;
    for r in (plan.h0..=plan.top).rev() {
        eng.clear_memo();
        eng.layer = Some(LayerCtx {
            fix: f,
            h_pos: plan.h_pos,
            acc,
            r,
            next: next.take(),
        });
        let mut cur = Vec::with_capacity(n);
        let mut env = vec![(h, Value::Int(r))];
        for s in 0..n as StateId {
            match eng.eval(def.body, &mut env, s) {
                Ok(v) => cur.push(if S::EXACT { v } else { v.round() }),
                Err(e) => {
                    eng.layer = None;
                    eng.clear_memo();
                    return Err(e);
                }
            }
        }
        next = Some(cur);
        eng.layer = None;
    }
    eng.clear_memo();
    Ok(LayerSolution {
        h0: plan.h0,
        h_pos: plan.h_pos,
        acc_pos: plan.acc_pos,
        values: next.unwrap(),
    })
}

/// Strongly connected components, each emitted after every component it
/// depends on.
fn tarjan(deps: &[Vec<u32>]) -> Vec<Vec<u32>> {
    let n = deps.len();
    let mut index = vec![u32::MAX; n];
    let mut low = vec![0u32; n];
    let mut on_stack = vec![false; n];
    let mut stack = vec![];
    let mut out = vec![];
    let mut counter = 0u32;
    let mut call: Vec<(u32, usize)> = vec![];
    for root in 0..n as u32 {
        if index[root as usize] != u32::MAX {
            continue;
        }
        call.push((root, 0));
        while let Some(&mut (v, ref mut k)) = call.last_mut() {
            let vi = v as usize;
            if *k == 0 && index[vi] == u32::MAX {
                index[vi] = counter;
                low[vi] = counter;
                counter += 1;
                stack.push(v);
                on_stack[vi] = true;
            }
            if *k < deps[vi].len() {
                let w = deps[vi][*k];
                *k += 1;
                let wi = w as usize;
                if index[wi] == u32::MAX {
                    call.push((w, 0));
                } else if on_stack[wi] {
                    low[vi] = low[vi].min(index[wi]);
                }
                continue;
            }
            call.pop();
            if let Some(&(u, _)) = call.last() {
                low[u as usize] = low[u as usize].min(low[vi]);
            }
            if low[vi] == index[vi] {
                let mut comp = vec![];
                loop {
                    let w = stack.pop().unwrap();
                    on_stack[w as usize] = false;
                    comp.push(w);
                    if w == v {
                        break;
                    }
                }
                comp.sort_unstable();
                out.push(comp);
            }
        }
    }
    out
}
