//! Acceptance run: one PASS/FAIL/SKIP line per criterion, followed by its
//! sub-checks, indented.
//!
//! `SPINSPEC_SLOW=1` enables the 2000-round limits (criterion 7).
//! `SPINSPEC_STRICT=1` makes known deviations fail the run as well.
//! `SPINSPEC_ONLY=3,8` runs a subset.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use num_rational::BigRational;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use spinspec::datalang::{resolve, Env, Evaluator, Sort, TypeCtx, Value};
use spinspec::models::{golden_results, list_models, load_formula, load_model, GoldenEntry};
use spinspec::montecarlo::{enumerate_exact, simulate, Policy, RewardSpec, SimOptions};
use spinspec::quantcheck::{
    decimal, evaluate, evaluate_detailed, evaluate_per_state, EvalOptions, EvalResult, ExtReal,
};
use spinspec::speclang::{parse_expr, parse_formula, FormulaSpec};
use spinspec::statespace::{check_distributions, explore, explore_with_globs, stats, ExploreLimits, Plts};
use spinspec::strategy::{extract_strategy, fit_tree, strategy_value, FeatureSet, StrategyTable};
use spinspec::symbol::Sym;

struct Check {
    name: String,
    ok: bool,
    /// Expected failure with its documented reason.
    known: Option<String>,
    detail: String,
}

#[derive(Default)]
struct Criterion {
    checks: Vec<Check>,
    skipped: Option<String>,
}

impl Criterion {
    fn check(&mut self, name: impl Into<String>, ok: bool, detail: impl Into<String>) {
        self.checks.push(Check {
            name: name.into(),
            ok,
            known: None,
            detail: detail.into(),
        });
    }

    fn within(&mut self, name: &str, took: Duration, limit: Duration) {
        self.check(
            format!("{name} runtime"),
            took <= limit,
            format!("{:.2}s (target {:.0}s)", took.as_secs_f64(), limit.as_secs_f64()),
        );
    }
}

fn plts(name: &str) -> Plts {
    explore(&load_model(name).unwrap(), ExploreLimits::default()).unwrap()
}

fn formula(name: &str) -> FormulaSpec {
    load_formula(name).unwrap()
}

fn text(f: &str) -> FormulaSpec {
    parse_formula(f).unwrap_or_else(|e| panic!("{f}: {e}"))
}

fn rounds(n: i64) -> EvalOptions {
    EvalOptions::default().with_param("max_rounds", Value::Int(n))
}

fn show(v: &ExtReal) -> String {
    match v.as_rational() {
        Some(q) if q.is_integer() || q.denom().bits() < 40 => format!("{v} ({})", decimal(q, 4)),
        Some(q) => decimal(q, 6),
        None => v.to_string(),
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let v = f();
    (v, t.elapsed())
}

/// Evaluates a registry entry and records the outcome.
fn golden(c: &mut Criterion, cache: &mut BTreeMap<String, Plts>, e: &GoldenEntry) -> Option<(EvalResult, Duration)> {
    let p = cache.entry(e.model.clone()).or_insert_with(|| plts(&e.model));
    let (r, took) = timed(|| evaluate_detailed(p, &formula(&e.formula), &e.options()));
    let r = match r {
        Ok(r) => r,
        Err(err) => {
            c.check(&e.id, false, format!("{}: {err}", e.describe()));
            return None;
        }
    };
    let exact = e.exact_ok(&r.value);
    let dec = e.decimal_ok(&r.value);
    let ok = exact != Some(false) && dec != Some(false) && (e.exact.is_none() || r.exact);
    let mut want = vec![];
    if let Some(q) = &e.exact {
        want.push(ExtReal::Finite(q.clone()).to_string());
    }
    if let Some((d, tol)) = &e.decimal {
        want.push(format!("{d} +/- {tol:e}"));
    }
    let detail = format!(
        "{}: computed {} expected {} [{:.2}s]",
        e.describe(),
        show(&r.value),
        want.join(", "),
        took.as_secs_f64()
    );
    c.checks.push(Check {
        name: e.id.clone(),
        ok,
        known: if ok { None } else { e.known_deviation.clone() },
        detail,
    });
    Some((r, took))
}

fn golden_group(c: &mut Criterion, prefixes: &[&str], limit: Duration) -> BTreeMap<String, ExtReal> {
    let mut cache = BTreeMap::new();
    let mut out = BTreeMap::new();
    for e in golden_results() {
        if e.slow || !prefixes.iter().any(|p| e.id.starts_with(p)) {
            continue;
        }
        if let Some((r, took)) = golden(c, &mut cache, &e) {
            c.within(&e.id, took, limit);
            out.insert(e.id.clone(), r.value);
        }
    }
    out
}

fn criterion1() -> Criterion {
    let mut c = Criterion::default();
    golden_group(&mut c, &["one_column."], Duration::from_secs(1));
    c
}

fn criterion2() -> Criterion {
    let mut c = Criterion::default();
    golden_group(&mut c, &["three_column."], Duration::from_secs(5));
    c
}

fn criterion3() -> Criterion {
    let mut c = Criterion::default();
    golden_group(&mut c, &["hold."], Duration::from_secs(60));
    c
}

fn criterion4() -> Criterion {
    let mut c = Criterion::default();
    let v = golden_group(&mut c, &["five_lines."], Duration::from_secs(10));
    if let Some(ExtReal::Finite(net)) = v.get("five_lines.net") {
        let rtp = (BigRational::from_integer(5.into()) + net) / BigRational::from_integer(5.into());
        c.check("rtp", decimal(&rtp, 2) == "0.94", format!("RTP {}", decimal(&rtp, 4)));
        let p = plts("five_play_lines");
        let r = RewardSpec::parse("display(n) = n - 5", &p).unwrap();
        let en = enumerate_exact(&p, &r, 1).unwrap();
        c.check(
            "enumeration",
            &en == net,
            format!("enumeration over all outcomes gives {en}"),
        );
        let (brute, n) = index_triples();
        c.check(
            "index triples",
            &brute == net && n == 13824,
            format!("direct sum over {n} reel index triples gives {brute}"),
        );
    }
    c
}

/// Net gain of the five-line game summed directly over all reel index
/// triples with the model's own `distribution` and `reward` functions.
fn index_triples() -> (BigRational, usize) {
    let m = load_model("five_play_lines").unwrap();
    let names = [Sym::new("i1"), Sym::new("i2"), Sym::new("i3")];
    let mut ctx = TypeCtx::new(&m.sorts, &m.funcs);
    ctx.vars = names.iter().map(|&n| (n, Sort::Nat)).collect();
    let expr = |t: &str| resolve(&parse_expr(t).unwrap(), &ctx).unwrap().0;
    let weight = expr("distribution(i1) * distribution(i2) * distribution(i3)");
    let gain = expr("reward(i1, i2, i3) - 5");
    let ev = Evaluator::new(&m.funcs, &m.sorts);
    let mut total = BigRational::from_integer(0.into());
    let mut n = 0;
    for a in 0..24 {
        for b in 0..24 {
            for c in 0..24 {
                let env: Vec<(Sym, Value)> = names.iter().copied().zip([a, b, c].map(Value::Int)).collect();
                let w = ev.rational(&Env::new(&env), &weight).unwrap();
                let g = ev.rational(&Env::new(&env), &gain).unwrap();
                let big = |q: spinspec::datalang::Rational| BigRational::new((*q.numer()).into(), (*q.denom()).into());
                total += big(w) * big(g);
                n += 1;
            }
        }
    }
    (total, n)
}

fn criterion5() -> Criterion {
    let mut c = Criterion::default();
    let v = golden_group(&mut c, &["ten_lines.", "five_lines."], Duration::from_secs(60));
    if let (Some(ten), Some(five)) = (v.get("ten_lines.net"), v.get("five_lines.net")) {
        let twice = five.as_rational().map(|q| q * BigRational::from_integer(2.into()));
        c.check(
            "twice five lines",
            ten.as_rational() == twice.as_ref(),
            format!("{ten} = 2 * {five}"),
        );
    }
    c.checks.retain(|k| !k.name.starts_with("five_lines"));
    c
}

fn criterion6() -> Criterion {
    let mut c = Criterion::default();
    golden_group(&mut c, &["reel."], Duration::from_secs(600));
    c
}

fn criterion7() -> Criterion {
    let mut c = Criterion::default();
    if std::env::var_os("SPINSPEC_SLOW").is_none() {
        c.skipped = Some("set SPINSPEC_SLOW=1 (about 15 minutes)".into());
        return c;
    }
    let mut cache = BTreeMap::new();
    for e in golden_results().into_iter().filter(|e| e.slow) {
        golden(&mut c, &mut cache, &e);
    }
    c
}

fn var<'a>(t: &'a StrategyTable, state: u32, name: &str) -> &'a str {
    t.states[&state]
        .vars
        .iter()
        .find(|(n, _)| n == name)
        .map(|(_, v)| v.as_str())
        .unwrap_or("")
}

fn criterion8() -> Criterion {
    let mut c = Criterion::default();
    let m = load_model("reel_hold_one_round").unwrap();
    let p = explore(&m, ExploreLimits::default()).unwrap();
    let f = formula("formula6");
    let o = rounds(200);
    let (t, took) = timed(|| extract_strategy(&p, &f, &o).unwrap());
    c.check(
        "extract",
        !t.is_empty(),
        format!("{} decision points in {:.1}s", t.len(), took.as_secs_f64()),
    );
    let opt = evaluate(&p, &f, &o).unwrap();
    let replay = strategy_value(&p, &t, &f, &o).unwrap();
    c.check(
        "strategy value equals optimum",
        replay == opt,
        format!("replayed {} optimum {}", show(&replay), show(&opt)),
    );
    c.check(
        "published value",
        (opt.to_f64() + 0.169).abs() <= 1e-3,
        format!("{} vs -0.169", show(&opt)),
    );

    let st = t.stationary().effective();
    let tree = fit_tree(&st, &FeatureSet::from_model(&m).unwrap());
    let fid = tree.fidelity(&st);
    c.check(
        "tree fidelity",
        fid == 1.0,
        format!("fidelity {fid} with {} nodes, depth {}", tree.size(), tree.depth()),
    );
    // Stars on reels 2,3 with a fruit pair on 1,4; stars on 1,3 with a
    // fruit pair on 2,4.
    let (mut cases, mut table_ok, mut tree_ok) = (0, 0, 0);
    for pt in &st.points {
        let s: Vec<&str> = ["s1", "s2", "s3", "s4"].iter().map(|n| var(&st, pt.state, n)).collect();
        for (x, y, u, v) in [(0, 3, 1, 2), (1, 3, 0, 2)] {
            if s[x] == s[y] && s[x] != "star" && s[u] == "star" && s[v] == "star" {
                cases += 1;
                let want = format!("hold{}{}", u + 1, v + 1);
                let l = st.chosen_label(pt);
                let on: String = l
                    .args
                    .iter()
                    .enumerate()
                    .filter(|(_, a)| matches!(a, Value::Bool(true)))
                    .map(|(i, _)| (i + 1).to_string())
                    .collect();
                table_ok += usize::from(format!("hold{on}") == want);
                tree_ok += usize::from(tree.predict(&st.states[&pt.state], &st.horizons[pt.horizon as usize]) == want);
            }
        }
    }
    c.check(
        "stars over fruits",
        cases > 0 && table_ok == cases && tree_ok == cases,
        format!("{cases} states: table holds the stars in {table_ok}, tree in {tree_ok}"),
    );

    // Single-point perturbations never help.
    let o = rounds(2);
    let t = extract_strategy(&p, &f, &o).unwrap();
    let opt = evaluate(&p, &f, &o).unwrap();
    let live: Vec<usize> = (0..t.points.len()).filter(|&i| !t.points[i].tied).collect();
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(2024);
    let (mut worse, mut better) = (0, 0);
    for _ in 0..100 {
        let i = *live.choose(&mut rng).unwrap();
        let pt = t.points[i];
        let alts: Vec<u32> = t.choice_sets[pt.choices as usize]
            .iter()
            .copied()
            .filter(|&l| l != pt.chosen)
            .collect();
        let alt = alts[rng.random_range(0..alts.len())];
        let v = strategy_value(&p, &t.with_choice(i, alt).unwrap(), &f, &o).unwrap();
        if v > opt {
            better += 1;
        } else if v < opt {
            worse += 1;
        }
    }
    c.check(
        "perturbations",
        better == 0,
        format!("100 perturbations at 2 rounds: {better} better, {worse} strictly worse"),
    );
    c
}

/// Random closed formulas over the given modalities.
fn random_formula(rng: &mut Xoshiro256PlusPlus, mods: &[String], depth: u32) -> String {
    const LEAVES: [&str; 7] = ["0", "1", "1/2", "-2", "5/3", "true", "false"];
    if depth == 0 || rng.random_range(0..4) == 0 {
        return LEAVES[rng.random_range(0..LEAVES.len())].to_string();
    }
    let m = &mods[rng.random_range(0..mods.len())];
    let a = random_formula(rng, mods, depth - 1);
    match rng.random_range(0..7) {
        0 | 1 => format!("<{m}>({a})"),
        2 | 3 => format!("[{m}]({a})"),
        4 => format!("({a} || {})", random_formula(rng, mods, depth - 1)),
        5 => format!("({a} && {})", random_formula(rng, mods, depth - 1)),
        _ => format!("({a} + 1)"),
    }
}

fn criterion9() -> Criterion {
    let mut c = Criterion::default();

    // Normalization.
    let mut bad = vec![];
    for name in list_models() {
        let p = plts(name);
        if !check_distributions(&p).is_empty() {
            bad.push(name);
        }
    }
    c.check(
        "normalization",
        bad.is_empty(),
        format!("{} models, unnormalized: {bad:?}", list_models().len()),
    );

    // Kleene approximants, computed independently by unfolding k times,
    // increase (mu) or decrease (nu) towards the fixpoint.
    let cases = [
        (
            "one_column",
            "mu",
            "sup s: Symbol. <display(s)>((s == star && 1) || ((s != star && <true>(@ + 1)) || 0))",
            "formula2",
            60,
        ),
        ("one_column", "nu", "<true>(<win>0 || <lose>(1 && @))", "", 60),
        (
            "three_column",
            "mu",
            "sup s1, s2, s3: Symbol. <display(s1, s2, s3)>((s1 == s2 && s2 == s3 && 1) || \
             (((s1 != s2 || s2 != s3) && <true>(@ + 1)) || 0))",
            "formula4",
            // Contracts by 8/9 per unfolding.
            200,
        ),
        // Contracts by 999/1000 per unfolding.
        (
            "zero_one",
            "nu",
            "<transfer(transferred)>(1 && @) || <transfer(lost)>0",
            "",
            20_000,
        ),
    ];
    for (model, sign, body, named, far) in cases {
        let p = plts(model);
        let fix = if named.is_empty() {
            text(&format!("{sign} X. {}", body.replace('@', "X")))
        } else {
            formula(named)
        };
        let limit = evaluate(&p, &fix, &EvalOptions::default()).unwrap();
        let base = if sign == "mu" { "false" } else { "true" };
        let unfolded = format!(
            "mu Y(k: Nat = 0). (k == K && {base}) || (k < K && {})",
            body.replace('@', "Y(k + 1)")
        );
        let f = text(&unfolded);
        let mut prev: Option<ExtReal> = None;
        let mut monotone = true;
        let mut bounded = true;
        let approximant = |k: i64| evaluate(&p, &f, &EvalOptions::default().with_param("K", Value::Int(k))).unwrap();
        for k in 0..=60 {
            let v = approximant(k);
            if let Some(pv) = &prev {
                monotone &= if sign == "mu" { &v >= pv } else { &v <= pv };
            }
            bounded &= if sign == "mu" { v <= limit } else { v >= limit };
            prev = Some(v);
        }
        let last = approximant(far);
        bounded &= if sign == "mu" { last <= limit } else { last >= limit };
        let gap = (limit.to_f64() - last.to_f64()).abs();
        c.check(
            format!("{sign} iteration on {model}"),
            monotone && bounded && gap < 1e-6,
            format!("limit {limit}, approximant {far} within {gap:.1e}, monotone {monotone}, bounded {bounded}"),
        );
    }

    // Modal laws on random formulas.
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(9);
    for model in ["one_column", "three_column_hold"] {
        let p = plts(model);
        let mut labels: Vec<String> = (0..p.num_states() as u32)
            .flat_map(|s| {
                p.successors(s)
                    .iter()
                    .map(|t| p.label_string(&t.label))
                    .collect::<Vec<_>>()
            })
            .collect();
        labels.sort();
        labels.dedup();
        let mut mods = labels.clone();
        mods.push("true".into());
        let (mut empty, mut single, mut evaluated, mut violations) = (0usize, 0usize, 0usize, vec![]);
        for _ in 0..25 {
            let phi = random_formula(&mut rng, &mods, 3);
            for m in &mods {
                let d = evaluate_per_state(&p, &text(&format!("<{m}>({phi})")), &EvalOptions::default());
                let b = evaluate_per_state(&p, &text(&format!("[{m}]({phi})")), &EvalOptions::default());
                let (Ok(d), Ok(b)) = (d, b) else { continue };
                evaluated += 1;
                for s in 0..p.num_states() as u32 {
                    let n = p
                        .successors(s)
                        .iter()
                        .filter(|t| m == "true" || p.label_string(&t.label) == *m)
                        .count();
                    let i = s as usize;
                    if n == 0 {
                        empty += 1;
                        if d[i] != ExtReal::NegInf || b[i] != ExtReal::PosInf {
                            violations.push(format!("empty <{m}>({phi}) at {}", p.state_string(s)));
                        }
                    } else if n == 1 {
                        single += 1;
                        if d[i] != b[i] {
                            violations.push(format!("single <{m}>({phi}) at {}", p.state_string(s)));
                        }
                    }
                }
            }
        }
        c.check(
            format!("empty modalities on {model}"),
            evaluated > 0 && empty > 0 && violations.iter().all(|v| !v.starts_with("empty")),
            format!("{empty} state checks over {evaluated} formula pairs"),
        );
        c.check(
            format!("diamond = box on {model}"),
            single > 0 && violations.iter().all(|v| !v.starts_with("single")),
            format!(
                "{single} state checks; first violation: {}",
                violations.first().map_or("none", |v| v.as_str())
            ),
        );
    }

    // Glob values do not change results.
    for model in ["reel_always_hold", "reel_hold_one_round"] {
        let m = load_model(model).unwrap();
        let a = explore(&m, ExploreLimits::default()).unwrap();
        let star = m
            .default_globs()
            .into_iter()
            .map(|(n, _)| (n, star_value(&m)))
            .collect::<Vec<_>>();
        let b = explore_with_globs(&m, &star, ExploreLimits::default()).unwrap();
        let f = formula("formula6");
        let va = evaluate(&a, &f, &rounds(2)).unwrap();
        let vb = evaluate(&b, &f, &rounds(2)).unwrap();
        c.check(
            format!("glob-insensitivity on {model}"),
            stats(&a) == stats(&b) && va == vb,
            format!(
                "{} states; value at 2 rounds {} and {}",
                stats(&a).states,
                show(&va),
                show(&vb)
            ),
        );
    }

    // Monte Carlo against exact values of criteria 1 to 4.
    let sim = |model: &str, policy: Policy, rewards: &str, rounds: u64, episodes: u64, seed: u64| {
        let p = plts(model);
        let r = RewardSpec::parse(rewards, &p).unwrap();
        let o = SimOptions {
            rounds,
            episodes,
            seed,
            threads: None,
        };
        simulate(&p, &policy, &r, &o).unwrap()
    };
    let hold = plts("three_column_hold");
    let o = rounds(1000);
    let best = extract_strategy(&hold, &formula("formula5"), &o).unwrap();
    let worst = extract_strategy(&hold, &formula("formula5_worst"), &o).unwrap();
    let exact = |m: &str, f: &str, o: &EvalOptions| evaluate(&plts(m), &formula(f), o).unwrap().to_f64();
    let win = "win = 1; @round = win, hold";
    let gain = "win = 1; lose = -1; @round = win, hold";
    let targets = [
        (
            "one_column win",
            sim(
                "one_column",
                Policy::UniformRandom,
                "win = 1; @round = win, lose",
                1,
                200_000,
                1,
            ),
            1.0 / 3.0,
        ),
        (
            "one_column gain",
            sim("one_column", Policy::UniformRandom, "win = 1; lose = -1", 10, 50_000, 2),
            exact("one_column", "formula3", &rounds(10)),
        ),
        (
            "three_column win",
            sim(
                "three_column",
                Policy::UniformRandom,
                "win = 1; @round = win, lose",
                1,
                200_000,
                3,
            ),
            1.0 / 9.0,
        ),
        (
            "three_column gain",
            sim(
                "three_column",
                Policy::UniformRandom,
                "win = 1; lose = -1",
                10,
                50_000,
                4,
            ),
            exact("three_column", "formula3", &rounds(10)),
        ),
        (
            "hold best win",
            sim("three_column_hold", Policy::FromTable(best.clone()), win, 1000, 1000, 5),
            exact("three_column_hold", "formula5", &o),
        ),
        (
            "hold best gain",
            sim("three_column_hold", Policy::FromTable(best), gain, 1000, 1000, 6),
            exact("three_column_hold", "gain5", &o),
        ),
        (
            "hold worst win",
            sim("three_column_hold", Policy::Minimize(worst), win, 1000, 1000, 7),
            exact("three_column_hold", "formula5_worst", &o),
        ),
        (
            "hold random win",
            sim("three_column_hold", Policy::UniformRandom, win, 1000, 1000, 8),
            exact("three_column_hold", "formula5_random", &o),
        ),
        (
            "hold random gain",
            sim("three_column_hold", Policy::UniformRandom, gain, 1000, 1000, 9),
            exact("three_column_hold", "gain5_random", &o),
        ),
        (
            "five lines net",
            sim(
                "five_play_lines",
                Policy::UniformRandom,
                "display(n) = n - 5",
                1,
                1_000_000,
                10,
            ),
            -515.0 / 1728.0,
        ),
    ];
    for (name, e, target) in targets {
        // A zero standard error only happens for a deterministic outcome.
        let ok = (e.mean - target).abs() <= 4.0 * e.std_error || (e.std_error == 0.0 && e.mean == target);
        c.check(
            format!("monte carlo {name}"),
            ok,
            format!("{:.5} +/- {:.5} vs {target:.5}", e.mean, e.std_error),
        );
    }
    c
}

fn star_value(m: &spinspec::speclang::Model) -> Value {
    Value::Enum(m.sorts.ctor("star").expect("reel models have a star"))
}

const TITLES: [&str; 9] = [
    "exact single-column values",
    "exact three-column values",
    "hold-button strategy comparison",
    "five play lines",
    "ten play lines",
    "reel game curve",
    "reel game long-run limits",
    "strategy pipeline",
    "property suites",
];

fn main() -> ExitCode {
    // Under `cargo test -- <filter>` the harness passes arguments; run
    // only when unfiltered or when the filter names this target.
    let args: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    if !args.is_empty() && !args.iter().any(|a| "acceptance".contains(a.as_str())) {
        return ExitCode::SUCCESS;
    }
    if std::env::args().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let only: Option<Vec<usize>> = std::env::var("SPINSPEC_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let strict = std::env::var_os("SPINSPEC_STRICT").is_some();
    let runs: [fn() -> Criterion; 9] = [
        criterion1, criterion2, criterion3, criterion4, criterion5, criterion6, criterion7, criterion8, criterion9,
    ];
    let (mut failed, mut known) = (0, 0);
    for (i, run) in runs.iter().enumerate() {
        let n = i + 1;
        if only.as_ref().is_some_and(|o| !o.contains(&n)) {
            continue;
        }
        let (c, took) = timed(run);
        let secs = took.as_secs_f64();
        if let Some(why) = &c.skipped {
            println!("criterion {n}: SKIP  {} ({why})", TITLES[i]);
            continue;
        }
        let bad: Vec<&Check> = c.checks.iter().filter(|k| !k.ok).collect();
        let passed = c.checks.len() - bad.len();
        if bad.is_empty() {
            println!("criterion {n}: PASS  {} ({passed} checks, {secs:.1}s)", TITLES[i]);
        } else {
            let all_known = bad.iter().all(|k| k.known.is_some());
            let tag = if all_known { " (known deviation)" } else { "" };
            println!(
                "criterion {n}: FAIL{tag}  {} ({passed}/{} checks, {secs:.1}s)",
                TITLES[i],
                c.checks.len()
            );
            if all_known && !strict {
                known += 1;
            } else {
                failed += 1;
            }
        }
        for k in &c.checks {
            let mark = if k.ok { "ok  " } else { "FAIL" };
            println!("    {mark} {}: {}", k.name, k.detail);
            if let Some(why) = &k.known {
                println!("         known deviation: {why}");
            }
        }
    }
    println!("acceptance: {failed} failed, {known} failed with a documented deviation");
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
