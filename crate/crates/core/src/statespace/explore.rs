use std::collections::VecDeque;

use num_traits::{CheckedAdd, CheckedMul, One, Zero};
use rustc_hash::FxHashMap;

use crate::datalang::{DataError, Env, Evaluator, Expr, Rational, ReadTracker, Value};
use crate::speclang::{Model, Proc};
use crate::symbol::Sym;

use super::*;

/// Unfolds a model with its globs at their default values.
pub fn explore(model: &Model, limits: ExploreLimits) -> Result<Plts, ExploreError> {
    explore_with_globs(model, &[], limits)
}

/// Unfolds a model; globs not listed in `globs` take their default.
pub fn explore_with_globs(model: &Model, globs: &[(Sym, Value)], limits: ExploreLimits) -> Result<Plts, ExploreError> {
    let owned;
    let model = if model.globs.is_empty() {
        model
    } else {
        owned = model.instantiate_globs(globs);
        &owned
    };
    let mut ex = Explorer::new(model, limits);
    let init = ex.flatten(&model.init, Vec::new(), &Ctx::Init)?;
    let mut trans_index = vec![0u32];
    let mut transitions = Vec::new();
    while let Some(s) = ex.queue.pop_front() {
        debug_assert_eq!(s as usize + 1, trans_index.len());
        let mut ts = ex.transitions(s)?;
        ts.sort_by(|a, b| (&a.label, a.dist).cmp(&(&b.label, b.dist)));
        ts.dedup();
        transitions.extend(ts);
        trans_index.push(transitions.len() as u32);
    }
    Ok(Plts {
        actions: model.actions.clone(),
        sorts: model.sorts.clone(),
        funcs: model.funcs.clone(),
        nodes: ex.nodes.iter().map(|n| n.info.clone()).collect(),
        states: ex.states,
        trans_index,
        transitions,
        dists: ex.dists,
        init,
    })
}

struct Node<'m> {
    term: &'m Proc,
    info: NodeInfo,
    /// Free variables, sorted; the environment a closure of this node needs.
    free: Vec<Sym>,
    /// For an action prefix, the free variables of its continuation.
    then_free: Vec<Sym>,
}

/// Process call being unfolded, for messages.
enum Ctx {
    Init,
    Call(u32, Vec<Value>),
}

type Bindings = Vec<(Sym, Value)>;

/// Cache of flattened distributions for one node: for every set of
/// variables a computation depended on, the values it saw.
type DistCache = Vec<(u64, FxHashMap<Box<[Value]>, DistId>)>;

struct Explorer<'m> {
    model: &'m Model,
    ev: Evaluator<'m>,
    limits: ExploreLimits,
    nodes: Vec<Node<'m>>,
    node_of: FxHashMap<*const Proc, u32>,
    state_ids: FxHashMap<StateInfo, StateId>,
    states: Vec<StateInfo>,
    queue: VecDeque<StateId>,
    dist_ids: FxHashMap<Vec<(StateId, Rational)>, DistId>,
    dists: Vec<Distribution>,
    dist_cache: FxHashMap<u32, DistCache>,
}

fn free_vars(p: &Proc, out: &mut Vec<Sym>) {
    let mut add = |e: &Expr| e.collect_vars(out);
    match p {
        Proc::Delta => {}
        Proc::Action { args, then, .. } => {
            args.iter().for_each(&mut add);
            free_vars(then, out);
        }
        Proc::Call { args, .. } => args.iter().for_each(add),
        Proc::Choice(a, b) => {
            free_vars(a, out);
            free_vars(b, out);
        }
        Proc::Sum { var, body, .. } => {
            let mut inner = Vec::new();
            free_vars(body, &mut inner);
            out.extend(inner.into_iter().filter(|v| v != var));
        }
        Proc::Dist { vars, weight, body } => {
            let mut inner = Vec::new();
            weight.collect_vars(&mut inner);
            free_vars(body, &mut inner);
            out.extend(inner.into_iter().filter(|v| !vars.iter().any(|(x, ..)| x == v)));
        }
        Proc::Cond { cond, then, els } => {
            add(cond);
            free_vars(then, out);
            free_vars(els, out);
        }
    }
}

fn sorted_free(p: &Proc) -> Vec<Sym> {
    let mut v = Vec::new();
    free_vars(p, &mut v);
    v.sort();
    v.dedup();
    v
}

fn children(p: &Proc) -> Vec<&Proc> {
    match p {
        Proc::Delta | Proc::Call { .. } => vec![],
        Proc::Action { then, .. } => vec![then],
        Proc::Choice(a, b) => vec![a, b],
        Proc::Sum { body, .. } | Proc::Dist { body, .. } => vec![body],
        Proc::Cond { then, els, .. } => vec![then, els],
    }
}

fn lookup<'e>(env: &Env<'e>, v: Sym) -> Result<&'e Value, DataError> {
    env.get(v).ok_or_else(|| DataError::UnknownName(v.to_string()))
}

impl<'m> Explorer<'m> {
    fn new(model: &'m Model, limits: ExploreLimits) -> Self {
        let mut ex = Explorer {
            model,
            ev: Evaluator::new(&model.funcs, &model.sorts),
            limits,
            nodes: Vec::new(),
            node_of: FxHashMap::default(),
            state_ids: FxHashMap::default(),
            states: Vec::new(),
            queue: VecDeque::new(),
            dist_ids: FxHashMap::default(),
            dists: Vec::new(),
            dist_cache: FxHashMap::default(),
        };
        for p in &model.procs {
            ex.register(&p.body, &p.name);
        }
        ex.register(&model.init, "init");
        ex
    }

    fn register(&mut self, root: &'m Proc, owner: &str) {
        let mut stack = vec![root];
        let mut k = 0;
        while let Some(p) = stack.pop() {
            let free = sorted_free(p);
            let (vars, then_free) = match p {
                Proc::Action { args, then, .. } => {
                    let tf = sorted_free(then);
                    let mut vars: Vec<Sym> = (0..args.len()).map(|i| Sym::new(&format!("#{i}"))).collect();
                    vars.extend(tf.iter().copied());
                    (vars, tf)
                }
                _ => (free.clone(), vec![]),
            };
            self.node_of.insert(p as *const Proc, self.nodes.len() as u32);
            self.nodes.push(Node {
                term: p,
                info: NodeInfo {
                    name: format!("{owner}.{k}"),
                    vars,
                },
                free,
                then_free,
            });
            k += 1;
            let mut ch = children(p);
            ch.reverse();
            stack.extend(ch);
        }
    }

    fn node(&self, p: &Proc) -> u32 {
        self.node_of[&(p as *const Proc)]
    }

    fn describe(&self, ctx: &Ctx) -> String {
        match ctx {
            Ctx::Init => "init".into(),
            Ctx::Call(p, vals) => {
                let mut s = self.model.procs[*p as usize].name.clone();
                if !vals.is_empty() {
                    let vs: Vec<String> = vals.iter().map(|v| v.display(&self.model.sorts).to_string()).collect();
                    s.push('(');
                    s.push_str(&vs.join(", "));
                    s.push(')');
                }
                s
            }
        }
    }

    fn data_err(&self, ctx: &Ctx) -> impl Fn(DataError) -> ExploreError + '_ {
        let context = self.describe(ctx);
        move |error| ExploreError::Data {
            context: context.clone(),
            error,
        }
    }

    fn intern_state(&mut self, key: StateInfo) -> Result<StateId, ExploreError> {
        if let Some(&id) = self.state_ids.get(&key) {
            return Ok(id);
        }
        if self.states.len() >= self.limits.max_states {
            return Err(ExploreError::StateLimitExceeded(self.limits.max_states));
        }
        let id = self.states.len() as StateId;
        self.states.push(key.clone());
        self.state_ids.insert(key, id);
        self.queue.push_back(id);
        Ok(id)
    }

    fn intern_dist(&mut self, support: Vec<(StateId, Rational)>) -> DistId {
        if let Some(&id) = self.dist_ids.get(&support) {
            return id;
        }
        let id = self.dists.len() as DistId;
        self.dists.push(Distribution::new(support.clone()));
        self.dist_ids.insert(support, id);
        id
    }

    /// Distribution over action states reached from closure `(p, env)`.
    ///
    /// Results are cached per node on the values of exactly those free
    /// variables the unfolding read, which keeps the reel game's sixteen
    /// hold patterns from recomputing identical spins.
    fn flatten(&mut self, p: &'m Proc, env: Bindings, ctx: &Ctx) -> Result<DistId, ExploreError> {
        let n = self.node(p);
        let free = self.nodes[n as usize].free.clone();
        let mut base: Bindings = Vec::with_capacity(free.len());
        for v in &free {
            let val = lookup(&Env::new(&env), *v).map_err(self.data_err(ctx))?;
            base.push((*v, val.clone()));
        }
        let cacheable = free.len() <= 64;
        if cacheable {
            if let Some(entries) = self.dist_cache.get(&n) {
                for (mask, map) in entries {
                    let key = project(&base, *mask);
                    if let Some(&d) = map.get(&key) {
                        return Ok(d);
                    }
                }
            }
        }
        let tracker = ReadTracker::new(base.len());
        let mut leaves = Vec::new();
        let mut frame = base.clone();
        self.expand(p, &mut frame, Some(&tracker), Rational::one(), &mut leaves, ctx)?;
        let mut support: Vec<(StateId, Rational)> = Vec::with_capacity(leaves.len());
        for (w, key) in leaves {
            support.push((self.intern_state(key)?, w));
        }
        support.sort_by_key(|(s, _)| *s);
        let mut merged: Vec<(StateId, Rational)> = Vec::with_capacity(support.len());
        for (s, w) in support {
            match merged.last_mut() {
                Some((t, acc)) if *t == s => {
                    *acc = acc
                        .checked_add(&w)
                        .ok_or_else(|| ExploreError::Overflow(self.describe(ctx)))?;
                }
                _ => merged.push((s, w)),
            }
        }
        if merged.len() > self.limits.max_support {
            return Err(ExploreError::SupportLimitExceeded(self.limits.max_support));
        }
        let d = self.intern_dist(merged);
        if cacheable {
            if let Some(mask) = tracker.mask() {
                let key = project(&base, mask);
                let entries = self.dist_cache.entry(n).or_default();
                match entries.iter_mut().find(|(m, _)| *m == mask) {
                    Some((_, map)) => {
                        map.insert(key, d);
                    }
                    None => {
                        let mut map = FxHashMap::default();
                        map.insert(key, d);
                        entries.push((mask, map));
                    }
                }
            }
        }
        Ok(d)
    }

    /// Collects `(probability, action state)` leaves of `p` under `env`.
    fn expand(
        &self,
        p: &'m Proc,
        env: &mut Bindings,
        tracker: Option<&ReadTracker>,
        weight: Rational,
        out: &mut Vec<(Rational, StateInfo)>,
        ctx: &Ctx,
    ) -> Result<(), ExploreError> {
        match p {
            Proc::Dist { vars, weight: w, body } => {
                let mut total = Rational::zero();
                let mut idx = vec![0usize; vars.len()];
                if vars.iter().any(|(_, _, d)| d.is_empty()) {
                    return Err(ExploreError::DistributionNotNormalized {
                        state: self.describe(ctx),
                        sum: total,
                    });
                }
                let mark = env.len();
                for (x, _, d) in vars {
                    env.push((*x, d.get(0)));
                }
                loop {
                    for (k, (_, _, d)) in vars.iter().enumerate() {
                        env[mark + k].1 = d.get(idx[k]);
                    }
                    let e = Env { vars: env, tracker };
                    let wv = self.ev.rational(&e, w).map_err(self.data_err(ctx))?;
                    if wv < Rational::zero() {
                        return Err(ExploreError::NegativeWeight {
                            state: self.describe(ctx),
                            weight: wv,
                        });
                    }
                    if !wv.is_zero() {
                        let overflow = || ExploreError::Overflow(self.describe(ctx));
                        total = total.checked_add(&wv).ok_or_else(overflow)?;
                        let pw = weight.checked_mul(&wv).ok_or_else(overflow)?;
                        self.expand(body, env, tracker, pw, out, ctx)?;
                        env.truncate(mark + vars.len());
                        if out.len() > self.limits.max_support.saturating_mul(64) {
                            return Err(ExploreError::SupportLimitExceeded(self.limits.max_support));
                        }
                    }
                    // Odometer over the product of the domains.
                    let mut k = vars.len();
                    loop {
                        if k == 0 {
                            env.truncate(mark);
                            if total != Rational::one() {
                                return Err(ExploreError::DistributionNotNormalized {
                                    state: self.describe(ctx),
                                    sum: total,
                                });
                            }
                            return Ok(());
                        }
                        k -= 1;
                        idx[k] += 1;
                        if idx[k] < vars[k].2.len() {
                            break;
                        }
                        idx[k] = 0;
                    }
                }
            }
            Proc::Call { proc, args } => {
                let e = Env { vars: env, tracker };
                let (mut inner, vals) = self.bind_call(*proc, args, &e, ctx)?;
                let model = self.model;
                let def = &model.procs[*proc as usize];
                self.expand(&def.body, &mut inner, None, weight, out, &Ctx::Call(*proc, vals))
            }
            Proc::Cond { cond, then, els } => {
                let e = Env { vars: env, tracker };
                let b = self.ev.bool(&e, cond).map_err(self.data_err(ctx))?;
                self.expand(if b { then } else { els }, env, tracker, weight, out, ctx)
            }
            _ => {
                let e = Env { vars: env, tracker };
                let key = self.state_key(p, &e).map_err(self.data_err(ctx))?;
                out.push((weight, key));
                Ok(())
            }
        }
    }

    fn bind_call(
        &self,
        proc: u32,
        args: &[Expr],
        env: &Env,
        ctx: &Ctx,
    ) -> Result<(Bindings, Vec<Value>), ExploreError> {
        let def = &self.model.procs[proc as usize];
        let mut vals = Vec::with_capacity(args.len());
        for ((name, sort), a) in def.params.iter().zip(args) {
            let v = self.ev.eval(env, a).map_err(self.data_err(ctx))?;
            if !v.fits(sort) {
                return Err(self.data_err(ctx)(DataError::NatUnderflow(format!(
                    "parameter {name} of {}",
                    def.name
                ))));
            }
            vals.push(v);
        }
        let inner = def.params.iter().map(|(n, _)| *n).zip(vals.iter().cloned()).collect();
        Ok((inner, vals))
    }

    fn state_key(&self, p: &Proc, env: &Env) -> Result<StateInfo, DataError> {
        let n = self.node(p);
        let node = &self.nodes[n as usize];
        let vals: Vec<Value> = match p {
            Proc::Action { args, .. } => {
                let mut v = Vec::with_capacity(args.len() + node.then_free.len());
                for a in args {
                    v.push(self.ev.eval(env, a)?);
                }
                for x in &node.then_free {
                    v.push(lookup(env, *x)?.clone());
                }
                v
            }
            _ => node
                .free
                .iter()
                .map(|x| lookup(env, *x).cloned())
                .collect::<Result<_, _>>()?,
        };
        Ok(StateInfo {
            node: n,
            vals: vals.into(),
        })
    }

    fn transitions(&mut self, s: StateId) -> Result<Vec<Transition>, ExploreError> {
        let key = self.states[s as usize].clone();
        let node = &self.nodes[key.node as usize];
        let term = node.term;
        let ctx = Ctx::Init;
        let mut out = Vec::new();
        match term {
            Proc::Action { act, args, then } => {
                let env: Bindings = node
                    .then_free
                    .iter()
                    .copied()
                    .zip(key.vals[args.len()..].iter().cloned())
                    .collect();
                let label = ActionLabel {
                    act: *act,
                    args: key.vals[..args.len()].into(),
                };
                let dist = self.flatten(then, env, &ctx)?;
                out.push(Transition { label, dist });
            }
            _ => {
                let mut env: Bindings = node.free.iter().copied().zip(key.vals.iter().cloned()).collect();
                self.collect(term, &mut env, &mut out, &ctx)?;
            }
        }
        Ok(out)
    }

    fn collect(
        &mut self,
        p: &'m Proc,
        env: &mut Bindings,
        out: &mut Vec<Transition>,
        ctx: &Ctx,
    ) -> Result<(), ExploreError> {
        match p {
            Proc::Delta => Ok(()),
            Proc::Action { act, args, then } => {
                let e = Env::new(env);
                let mut vals = Vec::with_capacity(args.len());
                for a in args {
                    vals.push(self.ev.eval(&e, a).map_err(self.data_err(ctx))?);
                }
                let dist = self.flatten(then, env.clone(), ctx)?;
                out.push(Transition {
                    label: ActionLabel {
                        act: *act,
                        args: vals.into(),
                    },
                    dist,
                });
                Ok(())
            }
            Proc::Choice(a, b) => {
                self.collect(a, env, out, ctx)?;
                self.collect(b, env, out, ctx)
            }
            Proc::Sum { var, sort, body } => {
                let values = self.model.sorts.enumerate(sort).map_err(self.data_err(ctx))?;
                for v in values {
                    env.push((*var, v));
                    self.collect(body, env, out, ctx)?;
                    env.pop();
                }
                Ok(())
            }
            Proc::Cond { cond, then, els } => {
                let b = self.ev.bool(&Env::new(env), cond).map_err(self.data_err(ctx))?;
                self.collect(if b { then } else { els }, env, out, ctx)
            }
            Proc::Call { proc, args } => {
                let (mut inner, vals) = self.bind_call(*proc, args, &Env::new(env), ctx)?;
                let model = self.model;
                let def = &model.procs[*proc as usize];
                self.collect(&def.body, &mut inner, out, &Ctx::Call(*proc, vals))
            }
            Proc::Dist { .. } => Err(ExploreError::MisplacedDist(self.describe(ctx))),
        }
    }
}

fn project(base: &[(Sym, Value)], mask: u64) -> Box<[Value]> {
    base.iter()
        .enumerate()
        .filter(|(i, _)| mask & (1 << i) != 0)
        .map(|(_, (_, v))| v.clone())
        .collect()
}
