//! Explicit probabilistic labelled transition systems.
//!
//! A [`Plts`] alternates two layers: distributions over action states, and
//! action states with labelled transitions into distributions. With several
//! transitions per state it is a Markov decision process in which the
//! player resolves the choice.

mod explore;

use std::fmt::{self, Write as _};

use num_traits::{One, ToPrimitive, Zero};
use thiserror::Error;

use crate::datalang::{DataError, FuncTable, Rational, SortTable, Value};
use crate::speclang::ActionDef;
use crate::symbol::Sym;

pub use explore::{explore, explore_with_globs};

pub type StateId = u32;
pub type DistId = u32;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ActionLabel {
    pub act: u32,
    pub args: Box<[Value]>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Transition {
    pub label: ActionLabel,
    pub dist: DistId,
}

/// Probability distribution over action states, sorted by state id.
#[derive(Clone, Debug, PartialEq)]
pub struct Distribution {
    pub support: Vec<(StateId, Rational)>,
    /// `support` probabilities as floats, same order.
    pub probs: Vec<f64>,
}

impl Distribution {
    pub fn new(support: Vec<(StateId, Rational)>) -> Distribution {
        let probs = support.iter().map(|(_, p)| ratio_f64(p)).collect();
        Distribution { support, probs }
    }

    pub fn point(s: StateId) -> Distribution {
        Distribution::new(vec![(s, Rational::one())])
    }

    pub fn is_point(&self) -> bool {
        self.support.len() == 1
    }

    pub fn sum(&self) -> Rational {
        self.support.iter().map(|(_, p)| *p).sum()
    }
}

pub(crate) fn ratio_f64(r: &Rational) -> f64 {
    r.numer().to_f64().unwrap_or(f64::NAN) / r.denom().to_f64().unwrap_or(f64::NAN)
}

/// An action state: a process node and the values its behaviour depends on.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct StateInfo {
    pub node: u32,
    pub vals: Box<[Value]>,
}

/// Static description of a process node that can be an action state.
#[derive(Clone, Debug, Default)]
pub struct NodeInfo {
    /// `Proc.k` for the k-th node of process `Proc`, `init.k` for the
    /// initial term.
    pub name: String,
    /// Names for `StateInfo::vals`; for an action prefix the first entries
    /// are `#0`, `#1`, ... for the evaluated action arguments.
    pub vars: Vec<Sym>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExploreLimits {
    pub max_states: usize,
    pub max_support: usize,
}

impl Default for ExploreLimits {
    fn default() -> Self {
        ExploreLimits {
            max_states: 2_000_000,
            max_support: 1_000_000,
        }
    }
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum ExploreError {
    #[error("state limit of {0} exceeded")]
    StateLimitExceeded(usize),
    #[error("distribution with more than {0} outcomes")]
    SupportLimitExceeded(usize),
    #[error("distribution in {state} sums to {sum}, not 1")]
    DistributionNotNormalized { state: String, sum: Rational },
    #[error("negative weight {weight} in {state}")]
    NegativeWeight { state: String, weight: Rational },
    #[error("distribution over {0} has no finite support")]
    UnboundedDistribution(String),
    #[error("`dist` reached as an alternative of a choice in {0}")]
    MisplacedDist(String),
    #[error("probability arithmetic overflows in {0}")]
    Overflow(String),
    #[error("in {context}: {error}")]
    Data { context: String, error: DataError },
}

/// Explicit probabilistic labelled transition system.
#[derive(Clone, Debug)]
pub struct Plts {
    pub actions: Vec<ActionDef>,
    pub sorts: SortTable,
    /// Functions of the model, so formulas can use them.
    pub funcs: FuncTable,
    pub nodes: Vec<NodeInfo>,
    states: Vec<StateInfo>,
    /// `transitions[trans_index[s]..trans_index[s + 1]]` leave state `s`.
    trans_index: Vec<u32>,
    transitions: Vec<Transition>,
    dists: Vec<Distribution>,
    init: DistId,
}

impl Plts {
    /// Number of action states.
    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_dists(&self) -> usize {
        self.dists.len()
    }

    pub fn num_transitions(&self) -> usize {
        self.transitions.len()
    }

    pub fn init(&self) -> DistId {
        self.init
    }

    pub fn dist(&self, d: DistId) -> &Distribution {
        &self.dists[d as usize]
    }

    pub fn dists(&self) -> &[Distribution] {
        &self.dists
    }

    pub fn state(&self, s: StateId) -> &StateInfo {
        &self.states[s as usize]
    }

    /// Outgoing transitions, sorted by label then target.
    ///
    /// Panics if `s` is not a state of this system.
    pub fn successors(&self, s: StateId) -> &[Transition] {
        let a = self.trans_index[s as usize] as usize;
        let b = self.trans_index[s as usize + 1] as usize;
        &self.transitions[a..b]
    }

    pub fn action_id(&self, name: &str) -> Option<u32> {
        self.actions.iter().position(|a| a.name == name).map(|i| i as u32)
    }

    /// Named values of a state.
    pub fn state_vars(&self, s: StateId) -> Vec<(Sym, Value)> {
        let st = self.state(s);
        let node = &self.nodes[st.node as usize];
        node.vars.iter().copied().zip(st.vals.iter().cloned()).collect()
    }

    pub fn state_var(&self, s: StateId, name: &str) -> Option<Value> {
        let st = self.state(s);
        let node = &self.nodes[st.node as usize];
        node.vars
            .iter()
            .position(|v| v.with_str(|x| x == name))
            .map(|i| st.vals[i].clone())
    }

    pub fn label_string(&self, l: &ActionLabel) -> String {
        let mut out = self.actions[l.act as usize].name.clone();
        if !l.args.is_empty() {
            out.push('(');
            for (k, v) in l.args.iter().enumerate() {
                if k > 0 {
                    out.push_str(", ");
                }
                let _ = write!(out, "{}", v.display(&self.sorts));
            }
            out.push(')');
        }
        out
    }

    pub fn state_string(&self, s: StateId) -> String {
        let st = self.state(s);
        let node = &self.nodes[st.node as usize];
        let mut out = node.name.clone();
        out.push('{');
        for (k, (n, v)) in node.vars.iter().zip(st.vals.iter()).enumerate() {
            if k > 0 {
                out.push_str(", ");
            }
            let _ = write!(out, "{n}={}", v.display(&self.sorts));
        }
        out.push('}');
        out
    }

    pub fn dist_string(&self, d: DistId) -> String {
        let mut out = String::from("{");
        for (k, (s, p)) in self.dist(d).support.iter().enumerate() {
            if k > 0 {
                out.push_str(", ");
            }
            let _ = write!(out, "{s}:{p}");
        }
        out.push('}');
        out
    }

    /// Line-oriented text form: `init -> {...}`, then per state a `state`
    /// line followed by its `trans` lines.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "init -> {}", self.dist_string(self.init));
        for s in 0..self.num_states() as StateId {
            let _ = writeln!(out, "state {s} {}", self.state_string(s));
            for t in self.successors(s) {
                let _ = writeln!(
                    out,
                    "trans {s} {} -> {}",
                    self.label_string(&t.label),
                    self.dist_string(t.dist)
                );
            }
        }
        out
    }
}

/// Assembles a [`Plts`] by hand, mainly for tests and external tools.
#[derive(Default)]
pub struct PltsBuilder {
    plts_actions: Vec<ActionDef>,
    nodes: Vec<NodeInfo>,
    states: Vec<StateInfo>,
    trans: Vec<Vec<Transition>>,
    dists: Vec<Distribution>,
}

impl PltsBuilder {
    pub fn new(actions: Vec<ActionDef>) -> PltsBuilder {
        PltsBuilder {
            plts_actions: actions,
            ..Default::default()
        }
    }

    pub fn add_state(&mut self, name: &str) -> StateId {
        self.nodes.push(NodeInfo {
            name: name.to_string(),
            vars: vec![],
        });
        self.states.push(StateInfo {
            node: self.nodes.len() as u32 - 1,
            vals: Box::new([]),
        });
        self.trans.push(vec![]);
        self.states.len() as StateId - 1
    }

    pub fn add_dist(&mut self, support: Vec<(StateId, Rational)>) -> DistId {
        self.dists.push(Distribution::new(support));
        self.dists.len() as DistId - 1
    }

    pub fn add_transition(&mut self, s: StateId, act: u32, args: Vec<Value>, dist: DistId) {
        self.trans[s as usize].push(Transition {
            label: ActionLabel { act, args: args.into() },
            dist,
        });
    }

    pub fn build(self, init: DistId) -> Plts {
        let mut trans_index = vec![0u32];
        let mut transitions = Vec::new();
        for mut ts in self.trans {
            ts.sort_by(|a, b| (&a.label, a.dist).cmp(&(&b.label, b.dist)));
            transitions.extend(ts);
            trans_index.push(transitions.len() as u32);
        }
        Plts {
            actions: self.plts_actions,
            sorts: SortTable::default(),
            funcs: FuncTable::default(),
            nodes: self.nodes,
            states: self.states,
            trans_index,
            transitions,
            dists: self.dists,
            init,
        }
    }
}

/// A distribution whose probabilities do not sum to one.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalizationViolation {
    pub dist: DistId,
    /// Where the distribution is used: `init` or `<state> --<label>-->`.
    pub used_at: Vec<String>,
    pub sum: Rational,
}

impl fmt::Display for NormalizationViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "distribution {} sums to {} (used at {})",
            self.dist,
            self.sum,
            self.used_at.join("; ")
        )
    }
}

/// Exact check that every distribution sums to one and has positive weights.
pub fn check_distributions(plts: &Plts) -> Vec<NormalizationViolation> {
    let mut out: Vec<NormalizationViolation> = Vec::new();
    let bad: Vec<DistId> = (0..plts.num_dists() as DistId)
        .filter(|&d| {
            let dist = plts.dist(d);
            dist.sum() != Rational::one() || dist.support.iter().any(|(_, p)| *p <= Rational::zero())
        })
        .collect();
    if bad.is_empty() {
        return out;
    }
    for &d in &bad {
        out.push(NormalizationViolation {
            dist: d,
            used_at: vec![],
            sum: plts.dist(d).sum(),
        });
    }
    let slot = |d: DistId| bad.binary_search(&d).ok();
    if let Some(i) = slot(plts.init) {
        out[i].used_at.push("init".into());
    }
    for s in 0..plts.num_states() as StateId {
        for t in plts.successors(s) {
            if let Some(i) = slot(t.dist) {
                let at = format!("{} --{}-->", plts.state_string(s), plts.label_string(&t.label));
                out[i].used_at.push(at);
            }
        }
    }
    out
}

/// Size summary. `states` counts action states plus distributions with
/// more than one outcome; a probability-one distribution is not drawn as
/// a separate node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub struct Stats {
    pub states: usize,
    pub transitions: usize,
    pub action_states: usize,
    pub distributions: usize,
    pub max_support: usize,
    pub deadlocks: usize,
}

impl fmt::Display for Stats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "states={} transitions={} action_states={} distributions={} max_support={} deadlocks={}",
            self.states, self.transitions, self.action_states, self.distributions, self.max_support, self.deadlocks
        )
    }
}

pub fn stats(plts: &Plts) -> Stats {
    let distributions = plts.dists.iter().filter(|d| !d.is_point()).count();
    Stats {
        states: plts.num_states() + distributions,
        transitions: plts.num_transitions(),
        action_states: plts.num_states(),
        distributions,
        max_support: plts.dists.iter().map(|d| d.support.len()).max().unwrap_or(0),
        deadlocks: (0..plts.num_states() as StateId)
            .filter(|&s| plts.successors(s).is_empty())
            .count(),
    }
}
