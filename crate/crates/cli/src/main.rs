//! `spinspec`: check, explore, simulate and extract strategies from
//! probabilistic slot-machine models.
//!
//! Exit status: 0 on success, 1 for unreadable input, parse or validation
//! errors and unbound parameters, 2 for errors while exploring, evaluating,
//! extracting or simulating.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use spinspec::datalang::{resolve, Env, Evaluator, Sort, TypeCtx, Value};
use spinspec::models;
use spinspec::montecarlo::{simulate, Estimate, Policy, RewardSpec, SimError, SimOptions};
use spinspec::quantcheck::{decimal, evaluate_detailed, EvalOptions, EvalResult, ExtReal, QuantError};
use spinspec::speclang::{load_model_text, parse_expr, parse_formula, FormulaSpec, Model};
use spinspec::statespace::{check_distributions, explore_with_globs, stats, ExploreLimits, Plts};
use spinspec::strategy::{
    export_table, export_tree, extract_strategy, fit_tree, import_table, strategy_result, table_document, FeatureSet,
    Format, StrategyError, StrategyTable,
};
use spinspec::symbol::Sym;

/// Version of the `--json` output records.
const JSON_VERSION: u32 = 1;

#[derive(Parser)]
#[command(
    name = "spinspec",
    version,
    about = "Quantitative model checking of slot-machine models"
)]
struct Cli {
    /// Print one machine-readable JSON record instead of text.
    #[arg(long, global = true)]
    json: bool,
    /// Worker threads (default: SPINSPEC_THREADS, else all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Evaluate a quantitative formula on a model.
    Check {
        model: String,
        formula: String,
        #[command(flatten)]
        eval: EvalArgs,
    },
    /// Explore the state space of a model.
    Explore {
        model: String,
        /// Print all statistics, not only states and transitions.
        #[arg(long)]
        stats: bool,
        /// Write the explored system as text.
        #[arg(long)]
        dump: Option<PathBuf>,
        #[command(flatten)]
        globs: GlobArgs,
    },
    /// Estimate the expected gain per round by simulation.
    Simulate {
        model: String,
        /// `random` or `table:PATH` with a table written by `strategy --out`.
        #[arg(long, default_value = "random")]
        policy: String,
        /// Gains per action, e.g. `win = 1; lose = -1`. Defaults to the
        /// model's `%@ rewards` line.
        #[arg(long)]
        rewards: Option<String>,
        /// Rounds per episode (default: the table's horizon, else 1).
        #[arg(long, value_parser = parse_count)]
        rounds: Option<u64>,
        #[arg(long, value_parser = parse_count, default_value = "10000")]
        episodes: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        globs: GlobArgs,
    },
    /// Extract an optimal strategy and report its value.
    Strategy {
        model: String,
        formula: String,
        /// Write the table (.json document, .csv or .dot).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Fit a decision tree and write it (.dot, .json or .csv).
        #[arg(long)]
        tree: Option<PathBuf>,
        /// Use the choices made with `k` rounds remaining instead of the
        /// long-run ones.
        #[arg(long)]
        horizon: Option<i64>,
        /// Write the choices for every horizon, not just the selected one.
        #[arg(long)]
        all: bool,
        #[command(flatten)]
        eval: EvalArgs,
    },
    /// Parse and validate models (.psm) and formulas (.qmf); with no
    /// arguments, every bundled asset.
    Validate { files: Vec<String> },
}

#[derive(Args)]
struct EvalArgs {
    /// Formula parameter, e.g. `max_rounds=100`.
    #[arg(long = "param", value_name = "NAME=VALUE")]
    params: Vec<String>,
    /// Convergence tolerance for cyclic fixpoints.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[command(flatten)]
    globs: GlobArgs,
}

#[derive(Args)]
struct GlobArgs {
    /// Value of a `glob` variable, e.g. `dc=star`.
    #[arg(long = "glob", value_name = "NAME=VALUE")]
    globs: Vec<String>,
}

struct Failure {
    code: u8,
    msg: String,
}

fn input(msg: impl Display) -> Failure {
    Failure {
        code: 1,
        msg: msg.to_string(),
    }
}

fn runtime(msg: impl Display) -> Failure {
    Failure {
        code: 2,
        msg: msg.to_string(),
    }
}

fn quant_failure(e: QuantError) -> Failure {
    match e {
        QuantError::UnboundParameter(_) | QuantError::Type(_) | QuantError::UnknownAction(_) => input(e),
        e => runtime(e),
    }
}

fn strategy_failure(e: StrategyError) -> Failure {
    match e {
        StrategyError::Quant(q) => quant_failure(q),
        StrategyError::Features(_) | StrategyError::Import(_) => input(e),
        e => runtime(e),
    }
}

fn sim_failure(e: SimError) -> Failure {
    match e {
        SimError::Reward(_) | SimError::BadArgument(_) => input(e),
        e => runtime(e),
    }
}

/// Accepts `1000`, `1e6` and `1_000`.
fn parse_count(s: &str) -> Result<u64, String> {
    let t = s.replace('_', "");
    if let Ok(n) = t.parse::<u64>() {
        return Ok(n);
    }
    match t.parse::<f64>() {
        Ok(x) if x >= 0.0 && x.fract() == 0.0 && x < 1.8e19 => Ok(x as u64),
        _ => Err(format!("`{s}` is not a non-negative integer")),
    }
}

/// A file path, or the name of a bundled asset.
fn read_asset(
    arg: &str,
    ext: &str,
    bundled: fn(&str) -> Result<&'static str, models::AssetError>,
) -> Result<String, Failure> {
    let path = Path::new(arg);
    if path.is_file() {
        return std::fs::read_to_string(path).map_err(|e| input(format!("{arg}: {e}")));
    }
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or(arg);
    let same_ext = path.extension().is_none_or(|e| e == ext);
    match bundled(stem) {
        Ok(t) if same_ext && path.parent().is_none_or(|p| p.as_os_str().is_empty()) => Ok(t.to_string()),
        _ => Err(input(format!("{arg}: no such file or bundled asset"))),
    }
}

fn load_model(arg: &str) -> Result<Model, Failure> {
    let text = read_asset(arg, "psm", models::model_text)?;
    load_model_text(&text).map_err(|e| input(format!("{arg}: {e}")))
}

fn load_formula(arg: &str) -> Result<FormulaSpec, Failure> {
    let text = read_asset(arg, "qmf", models::formula_text)?;
    parse_formula(&text).map_err(|e| input(format!("{arg}: {e}")))
}

fn split_assignment(s: &str) -> Result<(&str, &str), Failure> {
    s.split_once('=')
        .map(|(k, v)| (k.trim(), v.trim()))
        .filter(|(k, v)| !k.is_empty() && !v.is_empty())
        .ok_or_else(|| input(format!("expected NAME=VALUE, got `{s}`")))
}

/// A closed data expression evaluated in the model, e.g. `100`, `true`,
/// `1/2` or a constructor name.
fn eval_closed(m: &Model, text: &str, want: Option<&Sort>) -> Result<Value, Failure> {
    let bad = |e: &dyn Display| input(format!("`{text}`: {e}"));
    let raw = parse_expr(text).map_err(|e| bad(&e))?;
    let (e, sort) = resolve(&raw, &TypeCtx::new(&m.sorts, &m.funcs)).map_err(|e| bad(&e))?;
    if let Some(w) = want {
        if !spinspec::datalang::assignable(&sort, w) {
            return Err(bad(&format!("expected {}", w.display(&m.sorts))));
        }
    }
    Evaluator::new(&m.funcs, &m.sorts)
        .eval(&Env::new(&[]), &e)
        .map_err(|e| bad(&e))
}

fn explore_model(m: &Model, globs: &GlobArgs) -> Result<Plts, Failure> {
    let mut values = vec![];
    for g in &globs.globs {
        let (k, v) = split_assignment(g)?;
        let sort = m
            .globs
            .iter()
            .find(|(n, _)| n.as_str() == k)
            .map(|(_, s)| s.clone())
            .ok_or_else(|| input(format!("the model has no glob `{k}`")))?;
        values.push((Sym::new(k), eval_closed(m, v, Some(&sort))?));
    }
    explore_with_globs(m, &values, ExploreLimits::default()).map_err(runtime)
}

fn eval_options(m: &Model, a: &EvalArgs) -> Result<EvalOptions, Failure> {
    let mut o = EvalOptions::default();
    for p in &a.params {
        let (k, v) = split_assignment(p)?;
        o = o.with_param(k, eval_closed(m, v, None)?);
    }
    if let Some(t) = a.tol {
        if t.is_nan() || t <= 0.0 {
            return Err(input("--tol must be positive"));
        }
        o.tolerance = t;
    }
    if let Some(n) = a.max_iter {
        o.max_iterations = n;
    }
    Ok(o)
}

fn params_json(o: &EvalOptions, plts: &Plts) -> serde_json::Value {
    let m: BTreeMap<&String, String> = o
        .params
        .iter()
        .map(|(k, v)| (k, v.display(&plts.sorts).to_string()))
        .collect();
    json!(m)
}

/// `1/3 (0.3333)`, `2`, `-inf`; only the decimal when the value was
/// computed in floating point.
fn show_value(r: &EvalResult) -> String {
    match &r.value {
        ExtReal::Finite(q) if !r.exact => decimal(q, 4),
        ExtReal::Finite(q) if !q.is_integer() => format!("{} ({})", r.value, decimal(q, 4)),
        v => v.to_string(),
    }
}

fn value_json(r: &EvalResult) -> serde_json::Value {
    let v = &r.value;
    let dec = match v {
        ExtReal::Finite(q) => json!(decimal(q, 4)),
        _ => json!(v.to_string()),
    };
    let exact = if r.exact {
        json!(v.to_string())
    } else {
        serde_json::Value::Null
    };
    json!({ "exact": exact, "decimal": dec, "float": v.to_f64() })
}

fn emit(json_mode: bool, record: serde_json::Value, text: String) {
    if json_mode {
        let mut record = record;
        record["version"] = json!(JSON_VERSION);
        println!("{}", serde_json::to_string_pretty(&record).unwrap_or_default());
    } else {
        print!("{text}");
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| input(format!("{}: {e}", path.display())))
}

fn format_of(path: &Path, default: Format) -> Result<Format, Failure> {
    match path.extension().and_then(|e| e.to_str()) {
        None => Ok(default),
        Some(e) => e.parse().map_err(input),
    }
}

fn cmd_check(json_mode: bool, model: &str, formula: &str, a: &EvalArgs) -> Result<(), Failure> {
    let m = load_model(model)?;
    let f = load_formula(formula)?;
    let o = eval_options(&m, a)?;
    let p = explore_model(&m, &a.globs)?;
    let v = evaluate_detailed(&p, &f, &o).map_err(quant_failure)?;
    emit(
        json_mode,
        json!({
            "command": "check",
            "model": model,
            "formula": formula,
            "params": params_json(&o, &p),
            "value": value_json(&v),
        }),
        format!("{}\n", show_value(&v)),
    );
    Ok(())
}

fn cmd_explore(json_mode: bool, model: &str, all: bool, dump: Option<&Path>, g: &GlobArgs) -> Result<(), Failure> {
    let m = load_model(model)?;
    let p = explore_model(&m, g)?;
    if let Some(path) = dump {
        write_file(path, &p.dump())?;
    }
    let s = stats(&p);
    let mut text = format!("states={} transitions={}\n", s.states, s.transitions);
    if all {
        text.push_str(&format!(
            "action_states={} distributions={} max_support={} deadlocks={}\n",
            s.action_states, s.distributions, s.max_support, s.deadlocks
        ));
    }
    emit(
        json_mode,
        json!({ "command": "explore", "model": model, "stats": s }),
        text,
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    json_mode: bool,
    threads: Option<usize>,
    model: &str,
    policy: &str,
    rewards: Option<&str>,
    rounds: Option<u64>,
    episodes: u64,
    seed: u64,
    g: &GlobArgs,
) -> Result<(), Failure> {
    let m = load_model(model)?;
    let p = explore_model(&m, g)?;
    let rewards = match rewards {
        Some(r) => r.to_string(),
        None => m
            .pragma("rewards")
            .map(str::to_string)
            .ok_or_else(|| input("the model declares no rewards; pass --rewards"))?,
    };
    let rewards = RewardSpec::parse(&rewards, &p).map_err(sim_failure)?;
    let (pol, default_rounds) = match policy {
        "random" => (Policy::UniformRandom, 1),
        _ => {
            let path = policy
                .strip_prefix("table:")
                .ok_or_else(|| input(format!("unknown policy `{policy}` (random, table:PATH)")))?;
            let text = std::fs::read_to_string(path).map_err(|e| input(format!("{path}: {e}")))?;
            let t = import_table(&p, &text).map_err(strategy_failure)?;
            table_policy(t)
        }
    };
    let opts = SimOptions {
        rounds: rounds.unwrap_or(default_rounds),
        episodes,
        seed,
        threads,
    };
    let e: Estimate = simulate(&p, &pol, &rewards, &opts).map_err(sim_failure)?;
    emit(
        json_mode,
        json!({
            "command": "simulate",
            "model": model,
            "policy": policy,
            "rewards": rewards.text(),
            "rounds": opts.rounds,
            "episodes": episodes,
            "estimate": e,
        }),
        format!(
            "mean {:.4} per round (std error {:.4}, {} episodes of {} rounds, seed {})\n",
            e.mean, e.std_error, e.samples, opts.rounds, e.seed
        ),
    );
    Ok(())
}

/// A table covering several horizons is replayed round by round; a single
/// slice is used as a stationary policy. Either way the default number of
/// rounds is the horizon of the formula the table was extracted from.
fn table_policy(t: StrategyTable) -> (Policy, u64) {
    let hs: std::collections::BTreeSet<i64> = t.points.iter().filter_map(|p| t.horizon_value(p)).collect();
    let rounds = match (hs.first(), t.horizon_end) {
        (Some(&h0), Some(end)) => (end - h0).max(1) as u64,
        _ => 1,
    };
    if hs.len() > 1 {
        (Policy::FromTable(t), rounds)
    } else {
        (Policy::Stationary(t), rounds)
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_strategy(
    json_mode: bool,
    model: &str,
    formula: &str,
    out: Option<&Path>,
    tree: Option<&Path>,
    horizon: Option<i64>,
    all: bool,
    a: &EvalArgs,
) -> Result<(), Failure> {
    let m = load_model(model)?;
    let f = load_formula(formula)?;
    let o = eval_options(&m, a)?;
    let p = explore_model(&m, &a.globs)?;
    let mut full = extract_strategy(&p, &f, &o).map_err(strategy_failure)?;
    full.model = model.to_string();
    let value = strategy_result(&p, &full, &f, &o).map_err(strategy_failure)?;
    let slice = match horizon {
        Some(k) => {
            let t = full.at_remaining(k);
            if t.is_empty() {
                return Err(runtime(format!("no choices are made with {k} rounds remaining")));
            }
            t
        }
        None => full.stationary(),
    }
    .effective();
    let written = if all { full.effective() } else { slice.clone() };
    if let Some(path) = out {
        let text = match format_of(path, Format::Json)? {
            Format::Json => table_document(&written),
            fmt => export_table(&written, fmt),
        };
        write_file(path, &text)?;
    }
    let mut text = format!("value {}\ndecision points {}\n", show_value(&value), slice.len());
    let mut tree_json = serde_json::Value::Null;
    if let Some(path) = tree {
        let features = FeatureSet::from_model(&m).map_err(strategy_failure)?;
        let t = fit_tree(&slice, &features);
        write_file(path, &export_tree(&t, format_of(path, Format::Dot)?))?;
        let fidelity = t.fidelity(&slice);
        text.push_str(&format!(
            "tree nodes {} depth {} fidelity {:.4}\n",
            t.size(),
            t.depth(),
            fidelity
        ));
        tree_json = json!({ "nodes": t.size(), "depth": t.depth(), "fidelity": fidelity });
    }
    emit(
        json_mode,
        json!({
            "command": "strategy",
            "model": model,
            "formula": formula,
            "params": params_json(&o, &p),
            "value": value_json(&value),
            "points": slice.len(),
            "tree": tree_json,
        }),
        text,
    );
    Ok(())
}

/// Problems found in one file, empty when clean.
fn validate_one(name: &str, text: &str) -> Vec<String> {
    if name.ends_with(".qmf") {
        return match parse_formula(text) {
            Ok(_) => vec![],
            Err(e) => vec![e.to_string()],
        };
    }
    let m = match load_model_text(text) {
        Ok(m) => m,
        Err(e) => return vec![e.to_string()],
    };
    let p = match explore_with_globs(&m, &[], ExploreLimits::default()) {
        Ok(p) => p,
        Err(e) => return vec![e.to_string()],
    };
    check_distributions(&p)
        .into_iter()
        .map(|v| format!("distribution sums to {} at {}", v.sum, v.used_at.join(", ")))
        .collect()
}

fn cmd_validate(json_mode: bool, files: &[String]) -> Result<(), Failure> {
    let mut inputs: Vec<(String, String)> = vec![];
    if files.is_empty() {
        for n in models::list_models() {
            inputs.push((
                format!("{n}.psm"),
                models::model_text(n).unwrap_or_default().to_string(),
            ));
        }
        for n in models::list_formulas() {
            inputs.push((
                format!("{n}.qmf"),
                models::formula_text(n).unwrap_or_default().to_string(),
            ));
        }
    } else {
        for f in files {
            let ext = if f.ends_with(".qmf") { "qmf" } else { "psm" };
            let bundled = if ext == "qmf" {
                models::formula_text
            } else {
                models::model_text
            };
            inputs.push((f.clone(), read_asset(f, ext, bundled)?));
        }
    }
    let mut report = vec![];
    let mut text = String::new();
    let mut clean = true;
    for (name, src) in &inputs {
        let problems = validate_one(name, src);
        clean &= problems.is_empty();
        if problems.is_empty() {
            text.push_str(&format!("{name}: ok\n"));
        } else {
            for p in &problems {
                text.push_str(&format!("{name}: {p}\n"));
            }
        }
        report.push(json!({ "file": name, "ok": problems.is_empty(), "problems": problems }));
    }
    emit(json_mode, json!({ "command": "validate", "files": report }), text);
    if clean {
        Ok(())
    } else {
        Err(input("validation failed"))
    }
}

fn threads(flag: Option<usize>) -> Result<Option<usize>, Failure> {
    let n = match flag {
        Some(n) => Some(n),
        None => match std::env::var("SPINSPEC_THREADS") {
            Ok(v) => Some(
                v.trim()
                    .parse()
                    .map_err(|_| input(format!("SPINSPEC_THREADS=`{v}` is not a number")))?,
            ),
            Err(_) => None,
        },
    };
    if let Some(n) = n {
        if n == 0 {
            return Err(input("thread count must be positive"));
        }
        // Only fails when a pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(n)
}

fn run(cli: Cli) -> Result<(), Failure> {
    let t = threads(cli.threads)?;
    let j = cli.json;
    match &cli.cmd {
        Cmd::Check { model, formula, eval } => cmd_check(j, model, formula, eval),
        Cmd::Explore {
            model,
            stats,
            dump,
            globs,
        } => cmd_explore(j, model, *stats, dump.as_deref(), globs),
        Cmd::Simulate {
            model,
            policy,
            rewards,
            rounds,
            episodes,
            seed,
            globs,
        } => cmd_simulate(
            j,
            t,
            model,
            policy,
            rewards.as_deref(),
            *rounds,
            *episodes,
            *seed,
            globs,
        ),
        Cmd::Strategy {
            model,
            formula,
            out,
            tree,
            horizon,
            all,
            eval,
        } => cmd_strategy(j, model, formula, out.as_deref(), tree.as_deref(), *horizon, *all, eval),
        Cmd::Validate { files } => cmd_validate(j, files),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            // Usage errors are input errors; help and version are not errors.
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}
