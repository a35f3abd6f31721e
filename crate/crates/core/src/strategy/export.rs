//! Text renderings of tables and trees.
//!
//! Table JSON: an array of `{"state", "horizon", "choice", "value"}` objects,
//! where `horizon` maps the visible data variables to their values.
//! Table CSV: header `state,horizon,choice,value,choices`, one row per
//! decision point. Tree JSON: nested `{"feature", "yes", "no"}` nodes with
//! `{"choice", "points"}` leaves. Tree CSV: one row per leaf with the path
//! as `feature=yes|no` steps.

use std::fmt::Write;

use std::collections::{BTreeMap, HashMap};

use serde_json::json;

use crate::datalang::Value;
use crate::statespace::{Plts, StateId};
use crate::symbol::Sym;

use super::tree::choice_name;
use super::{DecisionPoint, DecisionTree, StateView, StrategyError, StrategyTable};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Dot,
    Json,
    Csv,
}

impl std::str::FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "dot" => Ok(Format::Dot),
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            _ => Err(format!("unknown format `{s}` (dot, json, csv)")),
        }
    }
}

fn horizon_string(h: &[(String, Value)]) -> String {
    h.iter()
        .map(|(k, v)| match v.as_int() {
            Some(i) => format!("{k}={i}"),
            None => format!("{k}={v:?}"),
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

fn json_rows(t: &StrategyTable) -> serde_json::Value {
    let rows: Vec<_> = t
        .points
        .iter()
        .map(|p| {
            let h: serde_json::Map<String, serde_json::Value> = t.horizons[p.horizon as usize]
                .iter()
                .map(|(k, v)| {
                    let v = match v.as_int() {
                        Some(i) => json!(i),
                        None => json!(format!("{v:?}")),
                    };
                    (k.clone(), v)
                })
                .collect();
            json!({
                "state": t.states[&p.state].name,
                "horizon": h,
                "choice": t.label_names[p.chosen as usize],
                "value": p.value,
            })
        })
        .collect();
    serde_json::Value::Array(rows)
}

pub fn export_table(t: &StrategyTable, format: Format) -> String {
    match format {
        Format::Json => serde_json::to_string_pretty(&json_rows(t)).unwrap_or_default(),
        Format::Csv => {
            let mut out = String::from("state,horizon,choice,value,choices\n");
            for p in &t.points {
                let choices: Vec<&str> = t.choice_sets[p.choices as usize]
                    .iter()
                    .map(|&l| t.label_names[l as usize].as_str())
                    .collect();
                let _ = writeln!(
                    out,
                    "{},{},{},{},{}",
                    csv_field(&t.states[&p.state].name),
                    csv_field(&horizon_string(&t.horizons[p.horizon as usize])),
                    csv_field(&t.label_names[p.chosen as usize]),
                    p.value,
                    csv_field(&choices.join(" | "))
                );
            }
            out
        }
        Format::Dot => {
            // States on the left, chosen labels on the right.
            let mut out = String::from("digraph strategy {\n  rankdir=LR;\n");
            for k in 0..t.label_names.len() {
                let _ = writeln!(out, "  l{k} [label=\"{}\", shape=box];", choice_name(t, k as u32));
            }
            for (i, p) in t.points.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "  p{i} [label=\"{} {}\"];\n  p{i} -> l{};",
                    dot_escape(&t.states[&p.state].name),
                    dot_escape(&horizon_string(&t.horizons[p.horizon as usize])),
                    p.chosen
                );
            }
            out.push_str("}\n");
            out
        }
    }
}

pub fn export_tree(tree: &DecisionTree, format: Format) -> String {
    match format {
        Format::Json => serde_json::to_string_pretty(tree).unwrap_or_default(),
        Format::Csv => {
            let mut out = String::from("path,choice\n");
            for (path, leaf) in tree.paths() {
                let steps: Vec<String> = path
                    .iter()
                    .map(|(f, b)| format!("{f}={}", if *b { "yes" } else { "no" }))
                    .collect();
                let _ = writeln!(out, "{},{}", csv_field(&steps.join(" ")), csv_field(&leaf));
            }
            out
        }
        Format::Dot => {
            let mut out = String::from("digraph tree {\n");
            let mut next = 0usize;
            fn go(t: &DecisionTree, out: &mut String, next: &mut usize) -> usize {
                let id = *next;
                *next += 1;
                match t {
                    DecisionTree::Leaf { choice, .. } => {
                        let _ = writeln!(out, "  n{id} [label=\"{}\", shape=box];", dot_escape(choice));
                    }
                    DecisionTree::Node { feature, yes, no } => {
                        let _ = writeln!(out, "  n{id} [label=\"{}\"];", dot_escape(&feature.name));
                        let y = go(yes, out, next);
                        let n = go(no, out, next);
                        let _ = writeln!(out, "  n{id} -> n{y} [label=\"true\"];");
                        let _ = writeln!(out, "  n{id} -> n{n} [label=\"false\", style=dashed];");
                    }
                }
                id
            }
            go(tree, &mut out, &mut next);
            out.push_str("}\n");
            out
        }
    }
}

pub const TABLE_DOCUMENT_VERSION: u32 = 1;

/// The table as a self-contained JSON document: the rows of the JSON
/// export under `points`, plus the formula, parameters and horizon needed
/// to replay it with [`import_table`].
pub fn table_document(t: &StrategyTable) -> String {
    let doc = json!({
        "version": TABLE_DOCUMENT_VERSION,
        "model": t.model,
        "formula": t.formula,
        "params": t.params,
        "horizon_var": t.horizon_var,
        "horizon_end": t.horizon_end,
        "points": json_rows(t),
    });
    serde_json::to_string_pretty(&doc).unwrap_or_default()
}

fn bad(msg: impl Into<String>) -> StrategyError {
    StrategyError::Import(msg.into())
}

/// Reads a table written by [`table_document`], or a bare JSON row array,
/// against the explored model it was extracted from. States and labels
/// are matched by name. The result drives simulation; it does not carry
/// the formula positions needed by [`super::strategy_value`].
///
/// A bare array has no recorded horizon end; it is taken as one past the
/// largest horizon value in the rows.
pub fn import_table(plts: &Plts, text: &str) -> Result<StrategyTable, StrategyError> {
    let doc: serde_json::Value = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
    let (rows, meta) = match &doc {
        serde_json::Value::Array(rows) => (rows, None),
        serde_json::Value::Object(m) => {
            let v = m.get("version").and_then(|v| v.as_u64());
            if v != Some(TABLE_DOCUMENT_VERSION as u64) {
                return Err(bad(format!("unsupported table version {v:?}")));
            }
            let rows = m
                .get("points")
                .and_then(|p| p.as_array())
                .ok_or_else(|| bad("missing `points`"))?;
            (rows, Some(m))
        }
        _ => return Err(bad("expected a JSON object or array")),
    };
    let mut by_name: HashMap<String, StateId> = HashMap::new();
    for s in 0..plts.num_states() as StateId {
        if by_name.insert(plts.state_string(s), s).is_some() {
            return Err(bad("model has states with identical names"));
        }
    }
    let mut t = StrategyTable {
        model: String::new(),
        formula: String::new(),
        params: BTreeMap::new(),
        horizon_var: None,
        horizon_end: None,
        labels: vec![],
        label_names: vec![],
        choice_sets: vec![],
        horizons: vec![],
        states: BTreeMap::new(),
        points: vec![],
        raw_envs: vec![],
    };
    if let Some(m) = meta {
        let text = |k: &str| m.get(k).and_then(|v| v.as_str()).map(str::to_string);
        t.model = text("model").unwrap_or_default();
        t.formula = text("formula").unwrap_or_default();
        t.horizon_var = text("horizon_var");
        t.horizon_end = m.get("horizon_end").and_then(|v| v.as_i64());
        if let Some(p) = m.get("params").and_then(|v| v.as_object()) {
            t.params = p
                .iter()
                .map(|(k, v)| (k.clone(), v.as_str().unwrap_or_default().to_string()))
                .collect();
        }
    }
    let mut env_ids: HashMap<Vec<(String, i64)>, u32> = HashMap::new();
    let mut label_ids: HashMap<String, u32> = HashMap::new();
    let mut set_ids: HashMap<Vec<u32>, u32> = HashMap::new();
    for (i, row) in rows.iter().enumerate() {
        let field = |k: &str| row.get(k).ok_or_else(|| bad(format!("row {i}: missing `{k}`")));
        let name = field("state")?
            .as_str()
            .ok_or_else(|| bad(format!("row {i}: bad state")))?;
        let &state = by_name
            .get(name)
            .ok_or_else(|| bad(format!("row {i}: unknown state `{name}`")))?;
        let mut env = vec![];
        for (k, v) in field("horizon")?
            .as_object()
            .ok_or_else(|| bad(format!("row {i}: bad horizon")))?
        {
            let v = v
                .as_i64()
                .ok_or_else(|| bad(format!("row {i}: horizon `{k}` is not an integer")))?;
            env.push((k.clone(), v));
        }
        env.sort();
        let next = env_ids.len() as u32;
        let horizon = *env_ids.entry(env.clone()).or_insert_with(|| {
            t.horizons
                .push(env.iter().map(|(k, v)| (k.clone(), Value::Int(*v))).collect());
            t.raw_envs
                .push(env.iter().map(|(k, v)| (Sym::new(k), Value::Int(*v))).collect());
            next
        });
        let choice = field("choice")?
            .as_str()
            .ok_or_else(|| bad(format!("row {i}: bad choice")))?;
        // Labels available here, in successor order.
        let mut avail = vec![];
        let mut chosen = None;
        for tr in plts.successors(state) {
            let n = plts.label_string(&tr.label);
            let next = label_ids.len() as u32;
            let id = *label_ids.entry(n.clone()).or_insert_with(|| {
                t.labels.push(tr.label.clone());
                t.label_names.push(n.clone());
                next
            });
            if !avail.contains(&id) {
                avail.push(id);
            }
            if n == choice {
                chosen = Some(id);
            }
        }
        let chosen = chosen.ok_or_else(|| bad(format!("row {i}: `{choice}` is not enabled in `{name}`")))?;
        let next = set_ids.len() as u32;
        let choices = *set_ids.entry(avail.clone()).or_insert_with(|| {
            t.choice_sets.push(avail);
            next
        });
        t.points.push(DecisionPoint {
            state,
            horizon,
            choices,
            chosen,
            value: field("value")?.as_f64().unwrap_or(f64::NEG_INFINITY),
            tied: false,
            site: 0,
        });
        t.states.entry(state).or_insert_with(|| StateView {
            name: name.to_string(),
            vars: plts
                .state_vars(state)
                .into_iter()
                .map(|(n, v)| (n.as_str(), v.display(&plts.sorts).to_string()))
                .collect(),
        });
    }
    if t.horizon_var.is_none() {
        // Bare array: the horizon is the only varying integer, if any.
        if let Some(first) = t.horizons.first() {
            if first.len() == 1 && t.horizons.len() > 1 {
                t.horizon_var = Some(first[0].0.clone());
            }
        }
    }
    if t.horizon_end.is_none() && meta.is_none() {
        let top = t.points.iter().filter_map(|p| t.horizon_value(p)).max();
        t.horizon_end = top.map(|h| h + 1);
    }
    Ok(t)
}
