//! Quantitative modal mu-calculus over probabilistic transition systems.
//!
//! Formulas take values in the extended reals. Diamonds maximise and boxes
//! minimise over matching transitions, each transition contributing the
//! probability-weighted value of its target distribution. Fixpoints are
//! turned into an equation system over (fixpoint, parameters, state)
//! variables. Fixpoints whose recursion only counts a horizon parameter up
//! to a bound are solved layer by layer with exact rationals; everything
//! else is solved per strongly connected component by Kleene iteration.

pub(crate) mod compile;
pub(crate) mod engine;
mod ext;
pub(crate) mod solve;

use std::collections::BTreeMap;
use std::time::Duration;

use serde::Serialize;
use thiserror::Error;

use crate::datalang::Value;
use crate::speclang::FormulaSpec;
use crate::statespace::{Plts, StateId};

pub use ext::{decimal, ext_arith, ArithOp, ExtReal};
pub(crate) use ext::{Scalar, V};

pub use solve::{equation_system, EqSystem, EqVar};

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum QuantError {
    #[error("unsupported regular modality: {0}")]
    UnsupportedRegex(String),
    #[error("undefined arithmetic: {0}")]
    UndefinedArithmetic(String),
    #[error("no convergence after {0} iterations")]
    NonConvergence(usize),
    #[error("quantifier over an infinite sort cannot be eliminated: {0}")]
    UnboundedQuantifier(String),
    #[error("least and greatest fixpoints are mutually recursive")]
    MixedSignCycle,
    #[error("formula parameter `{0}` is not bound (use --param {0}=...)")]
    UnboundParameter(String),
    #[error("type error: {0}")]
    Type(String),
    #[error("unknown action `{0}`")]
    UnknownAction(String),
    #[error("data error: {0}")]
    Data(String),
    /// Internal: the accumulator shortcut does not apply.
    #[error("accumulator is not used affinely")]
    NonAffine,
    #[error("strategy table has no entry for a reachable choice point")]
    IncompleteTable,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Arithmetic {
    /// Exact rationals unless the system is very large.
    #[default]
    Auto,
    Exact,
    Float,
}

#[derive(Clone, Debug)]
pub struct EvalOptions {
    /// Values for free names of the formula such as `max_rounds`.
    pub params: BTreeMap<String, Value>,
    /// Stop Kleene iteration when a sweep changes no value by more.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub arithmetic: Arithmetic,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            params: BTreeMap::new(),
            tolerance: 1e-9,
            max_iterations: 1_000_000,
            arithmetic: Arithmetic::Auto,
        }
    }
}

impl EvalOptions {
    pub fn with_param(mut self, name: &str, v: Value) -> Self {
        self.params.insert(name.to_string(), v);
        self
    }
}

#[derive(Clone, Debug)]
pub struct EvalResult {
    pub value: ExtReal,
    /// False when iteration or floating point was involved.
    pub exact: bool,
    /// Kleene sweeps over all components, plus horizon layers.
    pub iterations: usize,
    /// Equation variables of the generic solver.
    pub variables: usize,
    pub layers: usize,
    pub arithmetic: Arithmetic,
    pub elapsed: Duration,
}

/// Serializable summary used by the command line tool.
#[derive(Clone, Debug, Serialize)]
pub struct EvalRecord {
    pub formula: String,
    pub params: BTreeMap<String, String>,
    pub value: String,
    pub decimal: String,
    pub exact: bool,
    pub iterations: usize,
    pub wallclock_ms: f64,
}

impl EvalResult {
    pub fn record(&self, formula: &str, params: &BTreeMap<String, Value>) -> EvalRecord {
        EvalRecord {
            formula: formula.to_string(),
            params: params.iter().map(|(k, v)| (k.clone(), format!("{v:?}"))).collect(),
            value: self.value.to_string(),
            decimal: self.value.to_decimal(4),
            exact: self.exact,
            iterations: self.iterations,
            wallclock_ms: self.elapsed.as_secs_f64() * 1e3,
        }
    }
}

/// Rewrites `true*` modalities into fixpoints.
pub fn lower_regular(f: &FormulaSpec) -> Result<FormulaSpec, QuantError> {
    let mut fresh = 0;
    Ok(FormulaSpec {
        formula: compile::lower_formula(&f.formula, &mut fresh),
        pragmas: f.pragmas.clone(),
    })
}

/// Value of the formula at the initial distribution.
pub fn evaluate(plts: &Plts, f: &FormulaSpec, opts: &EvalOptions) -> Result<ExtReal, QuantError> {
    evaluate_detailed(plts, f, opts).map(|r| r.value)
}

pub fn evaluate_detailed(plts: &Plts, f: &FormulaSpec, opts: &EvalOptions) -> Result<EvalResult, QuantError> {
    let mut run = solve::Run::new(plts, f, opts, solve::Target::Init)?;
    run.execute(&mut engine::Hooks::default())?;
    Ok(run.result())
}

/// Value of the formula at every state.
pub fn evaluate_per_state(plts: &Plts, f: &FormulaSpec, opts: &EvalOptions) -> Result<Vec<ExtReal>, QuantError> {
    let mut run = solve::Run::new(plts, f, opts, solve::Target::AllStates)?;
    run.execute(&mut engine::Hooks::default())?;
    Ok(run.per_state())
}

/// Value at a single state.
pub fn evaluate_at(plts: &Plts, f: &FormulaSpec, opts: &EvalOptions, s: StateId) -> Result<ExtReal, QuantError> {
    let mut run = solve::Run::new(plts, f, opts, solve::Target::States(vec![s]))?;
    run.execute(&mut engine::Hooks::default())?;
    Ok(run.per_state().swap_remove(0))
}
