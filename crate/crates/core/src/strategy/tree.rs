use serde::Serialize;

use crate::datalang::Value;

use super::{mask_name, StateView, StrategyError, StrategyTable};

/// Which state variables show reel symbols, and which symbol is special.
/// Declared in a model by `%@ features s1,s2,s3 special star`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FeatureSet {
    pub reels: Vec<String>,
    pub special: Option<String>,
}

impl FeatureSet {
    pub fn parse(decl: &str) -> Result<FeatureSet, StrategyError> {
        let mut words = decl.split_whitespace();
        let reels: Vec<String> = words
            .next()
            .ok_or_else(|| StrategyError::Features("no reel variables".into()))?
            .split(',')
            .filter(|s| !s.is_empty())
            .map(str::to_string)
            .collect();
        let special = match (words.next(), words.next()) {
            (None, _) => None,
            (Some("special"), Some(sym)) => Some(sym.to_string()),
            _ => return Err(StrategyError::Features(decl.to_string())),
        };
        if words.next().is_some() {
            return Err(StrategyError::Features(decl.to_string()));
        }
        Ok(FeatureSet { reels, special })
    }

    pub fn from_model(m: &crate::speclang::Model) -> Result<FeatureSet, StrategyError> {
        match m.pragma("features") {
            Some(d) => FeatureSet::parse(d),
            None => Ok(FeatureSet::default()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum Test {
    /// Reels show the same non-special symbol.
    Fruit {
        a: String,
        b: String,
        special: Option<String>,
    },
    /// Both reels show the special symbol.
    Both { a: String, b: String, special: String },
    /// A variable has a given value.
    Is { var: String, value: String },
    /// A horizon variable has a given value.
    Horizon { var: String, value: String },
}

/// A binary predicate over a decision state.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Feature {
    pub name: String,
    #[serde(flatten)]
    test: Test,
}

fn var<'a>(v: &'a StateView, name: &str) -> Option<&'a str> {
    v.vars.iter().find(|(n, _)| n == name).map(|(_, x)| x.as_str())
}

impl Feature {
    pub fn holds(&self, state: &StateView, horizon: &[(String, Value)]) -> bool {
        match &self.test {
            Test::Fruit { a, b, special } => match (var(state, a), var(state, b)) {
                (Some(x), Some(y)) => x == y && special.as_deref() != Some(x),
                _ => false,
            },
            Test::Both { a, b, special } => var(state, a) == Some(special) && var(state, b) == Some(special),
            Test::Is { var: n, value } => var(state, n) == Some(value.as_str()),
            Test::Horizon { var: n, value } => horizon
                .iter()
                .any(|(k, v)| k == n && v.as_int().map(|i| i.to_string()).as_deref() == Some(value)),
        }
    }
}

/// Candidate predicates in declaration order: pairwise same fruit, pairwise
/// both special, per-reel special, per-reel symbol identity, then identity
/// of the remaining state variables and of the horizon values.
fn candidates(table: &StrategyTable, fs: &FeatureSet) -> Vec<Feature> {
    let mut out = vec![];
    let n = fs.reels.len();
    for i in 0..n {
        for j in i + 1..n {
            out.push(Feature {
                name: format!("fruit{}{}", i + 1, j + 1),
                test: Test::Fruit {
                    a: fs.reels[i].clone(),
                    b: fs.reels[j].clone(),
                    special: fs.special.clone(),
                },
            });
        }
    }
    if let Some(sp) = &fs.special {
        for i in 0..n {
            for j in i + 1..n {
                out.push(Feature {
                    name: format!("{sp}{}{}", i + 1, j + 1),
                    test: Test::Both {
                        a: fs.reels[i].clone(),
                        b: fs.reels[j].clone(),
                        special: sp.clone(),
                    },
                });
            }
        }
        for i in 0..n {
            out.push(Feature {
                name: format!("{sp}{}", i + 1),
                test: Test::Is {
                    var: fs.reels[i].clone(),
                    value: sp.clone(),
                },
            });
        }
    }
    let mut seen: Vec<(String, String)> = vec![];
    let mut push = |out: &mut Vec<Feature>, var: &str, value: &str| {
        if seen.iter().any(|(a, b)| a == var && b == value) {
            return;
        }
        seen.push((var.to_string(), value.to_string()));
        out.push(Feature {
            name: format!("{var}={value}"),
            test: Test::Is {
                var: var.to_string(),
                value: value.to_string(),
            },
        });
    };
    for r in &fs.reels {
        for v in table.states.values() {
            if let Some(x) = var(v, r) {
                push(&mut out, r, x);
            }
        }
    }
    for v in table.states.values() {
        for (k, x) in &v.vars {
            if !fs.reels.contains(k) {
                push(&mut out, k, x);
            }
        }
    }
    let mut hseen: Vec<(String, String)> = vec![];
    for p in &table.points {
        for (k, x) in &table.horizons[p.horizon as usize] {
            let Some(i) = x.as_int() else { continue };
            let key = (k.clone(), i.to_string());
            if !hseen.contains(&key) {
                out.push(Feature {
                    name: format!("{}={}", key.0, key.1),
                    test: Test::Horizon {
                        var: key.0.clone(),
                        value: key.1.clone(),
                    },
                });
                hseen.push(key);
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum DecisionTree {
    Leaf {
        choice: String,
        points: usize,
    },
    Node {
        feature: Feature,
        yes: Box<DecisionTree>,
        no: Box<DecisionTree>,
    },
}

impl DecisionTree {
    pub fn predict(&self, state: &StateView, horizon: &[(String, Value)]) -> &str {
        match self {
            DecisionTree::Leaf { choice, .. } => choice,
            DecisionTree::Node { feature, yes, no } => {
                if feature.holds(state, horizon) {
                    yes.predict(state, horizon)
                } else {
                    no.predict(state, horizon)
                }
            }
        }
    }

    pub fn size(&self) -> usize {
        match self {
            DecisionTree::Leaf { .. } => 1,
            DecisionTree::Node { yes, no, .. } => 1 + yes.size() + no.size(),
        }
    }

    pub fn internal_nodes(&self) -> usize {
        match self {
            DecisionTree::Leaf { .. } => 0,
            DecisionTree::Node { yes, no, .. } => 1 + yes.internal_nodes() + no.internal_nodes(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            DecisionTree::Leaf { .. } => 0,
            DecisionTree::Node { yes, no, .. } => 1 + yes.depth().max(no.depth()),
        }
    }

    /// Every root-to-leaf path as (feature name, answer) pairs and the leaf.
    pub fn paths(&self) -> Vec<(Vec<(String, bool)>, String)> {
        let mut out = vec![];
        fn go(t: &DecisionTree, path: &mut Vec<(String, bool)>, out: &mut Vec<(Vec<(String, bool)>, String)>) {
            match t {
                DecisionTree::Leaf { choice, .. } => out.push((path.clone(), choice.clone())),
                DecisionTree::Node { feature, yes, no } => {
                    path.push((feature.name.clone(), true));
                    go(yes, path, out);
                    path.pop();
                    path.push((feature.name.clone(), false));
                    go(no, path, out);
                    path.pop();
                }
            }
        }
        go(self, &mut vec![], &mut out);
        out
    }

    /// Fraction of the table's effective points whose choice the tree
    /// reproduces.
    pub fn fidelity(&self, table: &StrategyTable) -> f64 {
        let table = &table.effective();
        if table.points.is_empty() {
            return 1.0;
        }
        let ok = table
            .points
            .iter()
            .filter(|p| {
                let want = choice_name(table, p.chosen);
                self.predict(&table.states[&p.state], &table.horizons[p.horizon as usize]) == want
            })
            .count();
        ok as f64 / table.points.len() as f64
    }
}

pub(super) fn choice_name(table: &StrategyTable, label: u32) -> String {
    mask_name(&table.label_names[label as usize], &table.labels[label as usize])
}

fn entropy(counts: &[usize], total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total as f64;
            -p * p.log2()
        })
        .sum()
}

/// Greedy top-down learner: split on the feature with the largest entropy
/// gain (earliest declared on ties) until every leaf is pure.
/// Fits the effective points of the table (see [`StrategyTable::effective`]).
pub fn fit_tree(table: &StrategyTable, features: &FeatureSet) -> DecisionTree {
    let table = &table.effective();
    let feats = candidates(table, features);
    let classes: Vec<u32> = table.points.iter().map(|p| p.chosen).collect();
    let nclass = table.labels.len();
    let bits: Vec<Vec<bool>> = table
        .points
        .iter()
        .map(|p| {
            let st = &table.states[&p.state];
            let h = &table.horizons[p.horizon as usize];
            feats.iter().map(|f| f.holds(st, h)).collect()
        })
        .collect();
    let idx: Vec<usize> = (0..table.points.len()).collect();
    grow(table, &feats, &bits, &classes, nclass, idx)
}

fn grow(
    table: &StrategyTable,
    feats: &[Feature],
    bits: &[Vec<bool>],
    classes: &[u32],
    nclass: usize,
    idx: Vec<usize>,
) -> DecisionTree {
    let mut counts = vec![0usize; nclass];
    for &i in &idx {
        counts[classes[i] as usize] += 1;
    }
    // Majority with the lowest label index on ties.
    let majority = (0..nclass)
        .max_by_key(|&c| (counts[c], std::cmp::Reverse(c)))
        .unwrap_or(0);
    let leaf = || DecisionTree::Leaf {
        choice: if idx.is_empty() {
            String::new()
        } else {
            choice_name(table, majority as u32)
        },
        points: idx.len(),
    };
    if counts.iter().filter(|&&c| c > 0).count() <= 1 {
        return leaf();
    }
    let h = entropy(&counts, idx.len());
    let mut best: Option<(usize, f64)> = None;
    let mut yes_c = vec![0usize; nclass];
    let mut no_c = vec![0usize; nclass];
    #[allow(clippy::needless_range_loop)] // f indexes the rows of `bits`, not `feats`
    for f in 0..feats.len() {
        yes_c.iter_mut().for_each(|c| *c = 0);
        no_c.iter_mut().for_each(|c| *c = 0);
        let mut ny = 0;
        for &i in &idx {
            if bits[i][f] {
                yes_c[classes[i] as usize] += 1;
                ny += 1;
            } else {
                no_c[classes[i] as usize] += 1;
            }
        }
        let nn = idx.len() - ny;
        if ny == 0 || nn == 0 {
            continue;
        }
        let total = idx.len() as f64;
        let gain = h - (ny as f64 / total) * entropy(&yes_c, ny) - (nn as f64 / total) * entropy(&no_c, nn);
        if best.is_none_or(|(_, g)| gain > g + 1e-12) {
            best = Some((f, gain));
        }
    }
    let Some((f, _)) = best else {
        // Points that no feature separates: keep the majority choice.
        return leaf();
    };
    let (yes, no): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| bits[i][f]);
    DecisionTree::Node {
        feature: feats[f].clone(),
        yes: Box::new(grow(table, feats, bits, classes, nclass, yes)),
        no: Box::new(grow(table, feats, bits, classes, nclass, no)),
    }
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::statespace::ActionLabel;
    use crate::strategy::DecisionPoint;

    fn view(syms: [&str; 3]) -> StateView {
        StateView {
            name: format!("{syms:?}"),
            vars: ["s1", "s2", "s3"]
                .iter()
                .zip(syms)
                .map(|(n, v)| (n.to_string(), v.to_string()))
                .collect(),
        }
    }

    fn mask(b: [bool; 3]) -> ActionLabel {
        ActionLabel {
            act: 0,
            args: b.iter().map(|&x| Value::Bool(x)).collect(),
        }
    }

    #[test]
    fn separable_only_by_one_reel() {
        let labels = vec![mask([true, false, false]), mask([false, false, true])];
        let point = |state, chosen| DecisionPoint {
            state,
            horizon: 0,
            choices: 0,
            chosen,
            value: 0.0,
            tied: false,
            site: 0,
        };
        let t = StrategyTable {
            model: String::new(),
            formula: String::new(),
            params: BTreeMap::new(),
            horizon_var: None,
            horizon_end: None,
            label_names: vec!["hold(true, false, false)".into(), "hold(false, false, true)".into()],
            labels,
            choice_sets: vec![vec![0, 1]],
            horizons: vec![vec![]],
            states: [
                (0, view(["orange", "grapes", "pear"])),
                (1, view(["orange", "melon", "pear"])),
            ]
            .into_iter()
            .collect(),
            points: vec![point(0, 0), point(1, 1)],
            raw_envs: vec![Box::from([])],
        };
        let fs = FeatureSet::parse("s1,s2,s3 special star").unwrap();
        let tree = fit_tree(&t, &fs);
        assert_eq!(tree.internal_nodes(), 1);
        let DecisionTree::Node { feature, .. } = &tree else {
            panic!()
        };
        assert_eq!(feature.name, "s2=grapes");
        assert_eq!(tree.fidelity(&t), 1.0);
        assert_eq!(tree.predict(&t.states[&0], &[]), "hold1");
        assert_eq!(tree.predict(&t.states[&1], &[]), "hold3");
    }
}
