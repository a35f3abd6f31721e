//! Optimal player policies: the argmax witnesses of the modal choices made
//! while evaluating a formula, their verification, and compression into a
//! decision tree over the displayed symbols.

mod export;
mod tree;

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::datalang::Value;
use crate::quantcheck::engine::{Hooks, Policy, Recorder};
use crate::quantcheck::solve::{Run, Target};
use crate::quantcheck::{EvalOptions, EvalResult, ExtReal, QuantError};
use crate::speclang::{formula_spec_to_string, FormulaSpec};
use crate::statespace::{ActionLabel, Plts, StateId};
use crate::symbol::Sym;

pub use export::{export_table, export_tree, import_table, table_document, Format, TABLE_DOCUMENT_VERSION};
pub use tree::{fit_tree, DecisionTree, Feature, FeatureSet};

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum StrategyError {
    #[error("the formula resolves no nondeterministic choice")]
    NoChoices,
    #[error("strategy table has no entry for a reachable choice point")]
    IncompleteTable,
    #[error("bad feature declaration: {0}")]
    Features(String),
    #[error("cannot read strategy table: {0}")]
    Import(String),
    #[error(transparent)]
    Quant(QuantError),
}

impl From<QuantError> for StrategyError {
    fn from(e: QuantError) -> Self {
        match e {
            QuantError::IncompleteTable => StrategyError::IncompleteTable,
            e => StrategyError::Quant(e),
        }
    }
}

/// One resolved choice: at `state`, with the horizon values `horizon`
/// (an index into [`StrategyTable::horizons`]), `chosen` out of `choices`
/// (indices into [`StrategyTable::labels`]).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecisionPoint {
    pub state: StateId,
    pub horizon: u32,
    pub choices: u32,
    pub chosen: u32,
    /// Value of the chosen branch. With a symbolic accumulator this is
    /// the value at accumulator 0.
    pub value: f64,
    /// Every alternative is as good as the chosen one, e.g. because the
    /// subformula that made the choice does not apply in this state.
    pub tied: bool,
    /// Modal subformula that made the choice.
    pub site: u32,
}

/// Displayed variables of a decision state.
#[derive(Clone, Debug, Serialize)]
pub struct StateView {
    pub name: String,
    pub vars: Vec<(String, String)>,
}

#[derive(Clone, Debug)]
pub struct StrategyTable {
    pub model: String,
    pub formula: String,
    pub params: BTreeMap<String, String>,
    /// Horizon parameter of the formula, e.g. `rounds`.
    pub horizon_var: Option<String>,
    /// Value of the horizon parameter at which the recursion stops.
    pub horizon_end: Option<i64>,
    pub labels: Vec<ActionLabel>,
    /// Rendered labels, e.g. `hold(true, false, false)`.
    pub label_names: Vec<String>,
    pub choice_sets: Vec<Vec<u32>>,
    /// Values of the data variables visible at the choice.
    pub horizons: Vec<Vec<(String, Value)>>,
    pub states: BTreeMap<StateId, StateView>,
    /// Sorted by horizon value, then state.
    pub points: Vec<DecisionPoint>,
    raw_envs: Vec<Box<[(Sym, Value)]>>,
}

impl StrategyTable {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Value of the horizon parameter at a point, if the formula has one.
    pub fn horizon_value(&self, p: &DecisionPoint) -> Option<i64> {
        let h = self.horizon_var.as_deref()?;
        self.horizons[p.horizon as usize]
            .iter()
            .find(|(n, _)| n == h)
            .and_then(|(_, v)| v.as_int())
    }

    /// Rounds still to be played, counting the one in which the choice is
    /// made: `max_rounds - rounds` for the bundled formulas.
    pub fn remaining(&self, p: &DecisionPoint) -> Option<i64> {
        Some(self.horizon_end? - self.horizon_value(p)?)
    }

    fn filtered(&self, keep: impl Fn(&DecisionPoint) -> bool) -> StrategyTable {
        let mut t = self.clone();
        t.points.retain(|p| keep(p));
        t.states.retain(|s, _| t.points.iter().any(|p| p.state == *s));
        t
    }

    /// Points where the most rounds remain: the long-run policy.
    pub fn stationary(&self) -> StrategyTable {
        let first = self.points.iter().filter_map(|p| self.horizon_value(p)).min();
        match first {
            Some(h) => self.filtered(|p| self.horizon_value(p) == Some(h)),
            None => self.clone(),
        }
    }

    /// Points with exactly `k` rounds remaining.
    pub fn at_remaining(&self, k: i64) -> StrategyTable {
        match self.horizon_end {
            Some(_) => self.filtered(|p| self.remaining(p) == Some(k)),
            None => self.clone(),
        }
    }

    /// One point per (state, horizon values): a point whose choice matters
    /// when there is one, else the first. Several modal subformulas may
    /// choose in the same state, most of them vacuously.
    pub fn effective(&self) -> StrategyTable {
        let mut keep: BTreeMap<(StateId, u32), usize> = BTreeMap::new();
        for (i, p) in self.points.iter().enumerate() {
            match keep.get(&(p.state, p.horizon)) {
                Some(&j) if !(self.points[j].tied && !p.tied) => {}
                _ => {
                    keep.insert((p.state, p.horizon), i);
                }
            }
        }
        let mut idx: Vec<usize> = keep.into_values().collect();
        idx.sort_unstable();
        let mut t = self.clone();
        t.points = idx.into_iter().map(|i| self.points[i]).collect();
        t
    }

    /// Chosen label at a state for the given horizon value, among the
    /// effective points.
    pub fn lookup(&self) -> BTreeMap<(StateId, Option<i64>), &ActionLabel> {
        let mut out = BTreeMap::new();
        for p in &self.effective().points {
            out.insert((p.state, self.horizon_value(p)), &self.labels[p.chosen as usize]);
        }
        out
    }

    pub fn chosen_label(&self, p: &DecisionPoint) -> &ActionLabel {
        &self.labels[p.chosen as usize]
    }

    pub fn choices(&self, p: &DecisionPoint) -> impl Iterator<Item = &ActionLabel> {
        self.choice_sets[p.choices as usize]
            .iter()
            .map(|&l| &self.labels[l as usize])
    }

    /// Chooses `label` at point `i` instead; `None` if it is not available.
    pub fn with_choice(&self, i: usize, label: u32) -> Option<StrategyTable> {
        let p = self.points.get(i)?;
        if !self.choice_sets[p.choices as usize].contains(&label) {
            return None;
        }
        let mut t = self.clone();
        t.points[i].chosen = label;
        Some(t)
    }

    fn policy(&self) -> Policy {
        let mut map = rustc_hash::FxHashMap::default();
        for p in &self.points {
            map.insert(
                (p.site, self.raw_envs[p.horizon as usize].clone(), p.state),
                self.labels[p.chosen as usize].clone(),
            );
        }
        Policy { map }
    }
}

fn meta(plts: &Plts, f: &FormulaSpec, opts: &EvalOptions) -> (String, BTreeMap<String, String>) {
    let params = opts
        .params
        .iter()
        .map(|(k, v)| (k.clone(), v.display(&plts.sorts).to_string()))
        .collect();
    (formula_spec_to_string(f).trim().to_string(), params)
}

/// Records the choice made at every decision point while evaluating `f`
/// over all states.
pub fn extract_strategy(plts: &Plts, f: &FormulaSpec, opts: &EvalOptions) -> Result<StrategyTable, StrategyError> {
    let mut run = Run::new(plts, f, opts, Target::Init)?;
    let mut hooks = Hooks {
        record: Some(Recorder::default()),
        follow: None,
    };
    run.execute(&mut hooks)?;
    let rec = hooks.record.take().unwrap_or_default();
    if rec.entries.is_empty() {
        return Err(StrategyError::NoChoices);
    }
    let (formula, params) = meta(plts, f, opts);
    let horizon = run.horizon();
    let horizon_var = horizon.map(|(s, _)| s.as_str());
    let horizons: Vec<Vec<(String, Value)>> = rec
        .envs
        .iter()
        .map(|e| e.iter().map(|(s, v)| (s.as_str(), v.clone())).collect())
        .collect();
    let mut points: Vec<DecisionPoint> = rec
        .entries
        .iter()
        .map(|(&(site, env, state), e)| DecisionPoint {
            state,
            horizon: env,
            choices: e.choices,
            chosen: e.chosen,
            value: e.value,
            tied: e.tied,
            site,
        })
        .collect();
    let hval = |p: &DecisionPoint| -> Option<i64> {
        let h = horizon_var.as_deref()?;
        horizons[p.horizon as usize]
            .iter()
            .find(|(n, _)| n == h)
            .and_then(|(_, v)| v.as_int())
    };
    points.sort_by(|a, b| {
        (hval(a), &horizons[a.horizon as usize], a.state, a.site).cmp(&(
            hval(b),
            &horizons[b.horizon as usize],
            b.state,
            b.site,
        ))
    });
    let mut states = BTreeMap::new();
    for p in &points {
        states.entry(p.state).or_insert_with(|| StateView {
            name: plts.state_string(p.state),
            vars: plts
                .state_vars(p.state)
                .into_iter()
                .map(|(n, v)| (n.as_str(), v.display(&plts.sorts).to_string()))
                .collect(),
        });
    }
    Ok(StrategyTable {
        model: String::new(),
        formula,
        params,
        horizon_var,
        horizon_end: horizon.map(|(_, t)| t),
        label_names: rec.labels.iter().map(|l| plts.label_string(l)).collect(),
        labels: rec.labels,
        choice_sets: rec.choice_sets.into_iter().map(|c| c.into_vec()).collect(),
        horizons,
        states,
        points,
        raw_envs: rec.envs,
    })
}

/// Value of `f` when every choice is resolved by the table.
pub fn strategy_value(
    plts: &Plts,
    table: &StrategyTable,
    f: &FormulaSpec,
    opts: &EvalOptions,
) -> Result<ExtReal, StrategyError> {
    Ok(strategy_result(plts, table, f, opts)?.value)
}

/// As [`strategy_value`], with the solver's statistics and exactness.
pub fn strategy_result(
    plts: &Plts,
    table: &StrategyTable,
    f: &FormulaSpec,
    opts: &EvalOptions,
) -> Result<EvalResult, StrategyError> {
    let mut run = Run::new(plts, f, opts, Target::Init)?;
    let mut hooks = Hooks {
        record: None,
        follow: Some(table.policy()),
    };
    run.execute(&mut hooks)?;
    Ok(run.result())
}

/// Short name of a label whose arguments are all booleans: `hold13` for
/// `hold(true, false, true)`, `nohold` when none is set.
pub fn mask_name(plts_label: &str, l: &ActionLabel) -> String {
    if l.args.is_empty() || !l.args.iter().all(|v| matches!(v, Value::Bool(_))) {
        return plts_label.to_string();
    }
    let on: String = l
        .args
        .iter()
        .enumerate()
        .filter(|(_, v)| matches!(v, Value::Bool(true)))
        .map(|(i, _)| (i + 1).to_string())
        .collect();
    if on.is_empty() {
        "nohold".into()
    } else {
        format!("hold{on}")
    }
}
