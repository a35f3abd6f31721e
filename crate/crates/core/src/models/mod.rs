//! Bundled models, formulas and the registry of expected results.
//!
//! Layout under `assets/`: `models/<name>.psm`, `formulas/<name>.qmf`,
//! `golden/golden.json`. Everything is compiled into the library.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use serde::Deserialize;
use thiserror::Error;

use crate::datalang::Value;
use crate::quantcheck::{EvalOptions, ExtReal};
use crate::speclang::{load_model_text, parse_formula, FormulaSpec, Model, SpecError};

#[derive(Clone, Debug, Error, PartialEq)]
pub enum AssetError {
    #[error("unknown asset `{0}`")]
    UnknownAsset(String),
    #[error("asset `{0}`: {1}")]
    Invalid(String, SpecError),
}

macro_rules! assets {
    ($dir:literal, $ext:literal: $($name:literal),* $(,)?) => {
        &[$(($name, include_str!(concat!("../../assets/", $dir, "/", $name, ".", $ext)))),*]
    };
}

const MODELS: &[(&str, &str)] = assets!("models", "psm":
    "one_column",
    "three_column",
    "three_column_hold",
    "zero_one",
    "five_play_lines",
    "ten_play_lines",
    "reel_always_hold",
    "reel_hold_cost",
    "reel_hold_one_round",
);

const FORMULAS: &[(&str, &str)] = assets!("formulas", "qmf":
    "f1",
    "formula1",
    "formula2",
    "formula3",
    "formula4",
    "formula5",
    "formula5_random",
    "formula5_worst",
    "formula6",
    "formula6_cost",
    "gain5",
    "gain5_random",
    "gain5_worst",
    "reach_win",
    "rtp5",
    "rtp10",
    "transfer",
);

const GOLDEN: &str = include_str!("../../assets/golden/golden.json");

pub fn list_models() -> Vec<&'static str> {
    MODELS.iter().map(|(n, _)| *n).collect()
}

pub fn list_formulas() -> Vec<&'static str> {
    FORMULAS.iter().map(|(n, _)| *n).collect()
}

pub fn model_text(name: &str) -> Result<&'static str, AssetError> {
    let name = name.strip_suffix(".psm").unwrap_or(name);
    MODELS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, t)| *t)
        .ok_or_else(|| AssetError::UnknownAsset(name.to_string()))
}

pub fn formula_text(name: &str) -> Result<&'static str, AssetError> {
    let name = name.strip_suffix(".qmf").unwrap_or(name);
    FORMULAS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, t)| *t)
        .ok_or_else(|| AssetError::UnknownAsset(name.to_string()))
}

/// Parsed and validated bundled model.
pub fn load_model(name: &str) -> Result<Model, AssetError> {
    load_model_text(model_text(name)?).map_err(|e| AssetError::Invalid(name.to_string(), e))
}

pub fn load_formula(name: &str) -> Result<FormulaSpec, AssetError> {
    parse_formula(formula_text(name)?).map_err(|e| AssetError::Invalid(name.to_string(), e))
}

/// What a registry entry expects.
#[derive(Clone, Debug, PartialEq)]
pub enum Expected {
    Exact(BigRational),
    Decimal { value: f64, tolerance: f64 },
}

#[derive(Clone, Debug)]
pub struct GoldenEntry {
    pub id: String,
    pub model: String,
    pub formula: String,
    pub params: BTreeMap<String, i64>,
    /// Exact value, when known.
    pub exact: Option<BigRational>,
    /// Published decimal value and tolerance, when given.
    pub decimal: Option<(String, f64)>,
    /// Extra absolute allowance on top of the tolerance.
    pub slack: f64,
    pub source: String,
    /// Reason the computed value is expected to miss the published one.
    pub known_deviation: Option<String>,
    /// Takes minutes.
    pub slow: bool,
}

#[derive(Deserialize)]
struct RawFile {
    version: u32,
    entries: Vec<RawEntry>,
}

#[derive(Deserialize)]
struct RawEntry {
    id: String,
    model: String,
    formula: String,
    params: BTreeMap<String, i64>,
    exact: Option<String>,
    decimal: Option<String>,
    tolerance: Option<f64>,
    #[serde(default)]
    slack: f64,
    source: String,
    known_deviation: Option<String>,
    #[serde(default)]
    slow: bool,
}

fn parse_ratio(s: &str) -> Option<BigRational> {
    match s.split_once('/') {
        Some((n, d)) => {
            let d: BigInt = d.trim().parse().ok()?;
            if d == BigInt::from(0) {
                return None;
            }
            Some(BigRational::new(n.trim().parse().ok()?, d))
        }
        None => Some(BigRational::from_integer(s.trim().parse().ok()?)),
    }
}

impl GoldenEntry {
    pub fn options(&self) -> EvalOptions {
        let mut o = EvalOptions::default();
        for (k, v) in &self.params {
            o = o.with_param(k, Value::Int(*v));
        }
        o
    }

    /// The strongest check available: exact when an exact value is known.
    pub fn expected(&self) -> Expected {
        match (&self.exact, &self.decimal) {
            (Some(q), _) => Expected::Exact(q.clone()),
            (None, Some((d, tol))) => Expected::Decimal {
                value: d.parse().unwrap_or(f64::NAN),
                tolerance: tol + self.slack,
            },
            (None, None) => Expected::Decimal {
                value: f64::NAN,
                tolerance: 0.0,
            },
        }
    }

    /// Whether `v` is within tolerance of the published decimal, if any.
    pub fn decimal_ok(&self, v: &ExtReal) -> Option<bool> {
        let (d, tol) = self.decimal.as_ref()?;
        let want: f64 = d.parse().ok()?;
        Some(v.is_finite() && (v.to_f64() - want).abs() <= tol + self.slack)
    }

    pub fn exact_ok(&self, v: &ExtReal) -> Option<bool> {
        let q = self.exact.as_ref()?;
        Some(v.as_rational() == Some(q))
    }

    pub fn describe(&self) -> String {
        let params: Vec<String> = self.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
        let mut s = format!("{} {}", self.model, self.formula);
        if !params.is_empty() {
            s.push(' ');
            s.push_str(&params.join(" "));
        }
        s
    }
}

/// The registry of expected results for bundled (model, formula) pairs.
pub fn golden_results() -> Vec<GoldenEntry> {
    let raw: RawFile = serde_json::from_str(GOLDEN).expect("bundled golden.json is valid");
    debug_assert_eq!(raw.version, 1);
    raw.entries
        .into_iter()
        .map(|e| GoldenEntry {
            exact: e
                .exact
                .as_deref()
                .map(|s| parse_ratio(s).expect("exact value is a fraction")),
            decimal: e.decimal.map(|d| (d, e.tolerance.unwrap_or(0.0))),
            id: e.id,
            model: e.model,
            formula: e.formula,
            params: e.params,
            slack: e.slack,
            source: e.source,
            known_deviation: e.known_deviation,
            slow: e.slow,
        })
        .collect()
}
