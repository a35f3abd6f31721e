use std::fs;
use std::path::PathBuf;

use num_bigint::BigInt;
use num_rational::BigRational;
use spinspec::datalang::Value;
use spinspec::montecarlo::*;
use spinspec::quantcheck::{evaluate, EvalOptions, ExtReal};
use spinspec::speclang::{load_model_text, parse_formula, FormulaSpec};
use spinspec::statespace::{explore, ExploreLimits, Plts, PltsBuilder};
use spinspec::strategy::extract_strategy;

fn asset(kind: &str, name: &str, ext: &str) -> String {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("assets")
        .join(kind)
        .join(format!("{name}.{ext}"));
    fs::read_to_string(p).unwrap()
}

fn plts(name: &str) -> Plts {
    let m = load_model_text(&asset("models", name, "psm")).unwrap();
    explore(&m, ExploreLimits::default()).unwrap()
}

fn formula(name: &str) -> FormulaSpec {
    parse_formula(&asset("formulas", name, "qmf")).unwrap()
}

fn rounds(n: i64) -> EvalOptions {
    EvalOptions::default().with_param("max_rounds", Value::Int(n))
}

fn opts(rounds: u64, episodes: u64, seed: u64) -> SimOptions {
    SimOptions {
        rounds,
        episodes,
        seed,
        threads: None,
    }
}

fn ratio(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn within(e: &Estimate, target: f64) {
    eprintln!("mean {} se {} target {}", e.mean, e.std_error, target);
    assert!(e.std_error > 0.0);
    assert!((e.mean - target).abs() <= 4.0 * e.std_error, "{e:?} vs {target}");
}

#[test]
fn one_column_gain_per_round() {
    let p = plts("one_column");
    let r = RewardSpec::parse("win = 1; lose = -1", &p).unwrap();
    let e = simulate(&p, &Policy::UniformRandom, &r, &opts(1000, 1000, 7)).unwrap();
    within(&e, -1.0 / 3.0);
    assert_eq!(enumerate_exact(&p, &r, 1).unwrap(), ratio(-1, 3));
}

#[test]
fn five_play_lines_single_shot() {
    let p = plts("five_play_lines");
    let r = RewardSpec::parse("display(n) = n", &p).unwrap();
    let e = simulate(&p, &Policy::UniformRandom, &r, &opts(1, 1_000_000, 11)).unwrap();
    let exact = evaluate(&p, &formula("rtp5"), &EvalOptions::default()).unwrap();
    // The checker's value is net of the five-credit stake.
    within(&e, exact.to_f64() + 5.0);
}

#[test]
fn enumeration_matches_checker_on_single_shot_games() {
    for (model, f, want) in [
        ("five_play_lines", "rtp5", ratio(-515, 1728)),
        ("ten_play_lines", "rtp10", ratio(-515, 864)),
    ] {
        let p = plts(model);
        let stake = if model == "five_play_lines" { 5 } else { 10 };
        let r = RewardSpec::parse(&format!("display(n) = n - {stake}"), &p).unwrap();
        let v = enumerate_exact(&p, &r, 1).unwrap();
        assert_eq!(v, want);
        assert_eq!(
            evaluate(&p, &formula(f), &EvalOptions::default()).unwrap(),
            ExtReal::Finite(v)
        );
    }
}

#[test]
fn deadlock_enumerates_to_zero() {
    let mut b = PltsBuilder::new(vec![]);
    let s = b.add_state("stop");
    let d = b.add_dist(vec![(s, 1.into())]);
    let p = b.build(d);
    let r = RewardSpec::parse("", &p).unwrap();
    assert_eq!(enumerate_exact(&p, &r, 1).unwrap(), ratio(0, 1));
}

#[test]
fn cycles_inside_the_horizon_are_rejected() {
    let p = plts("one_column");
    // Losses do not end a round, so the game can loop without progress.
    let r = RewardSpec::parse("win = 1; @round = win", &p).unwrap();
    assert_eq!(enumerate_exact(&p, &r, 1), Err(SimError::CyclicModel));
}

#[test]
fn hold_model_policies() {
    let p = plts("three_column_hold");
    let r = RewardSpec::parse("win = 1; @round = win, hold", &p).unwrap();
    let o = rounds(100);
    let best = extract_strategy(&p, &formula("formula5"), &o).unwrap();
    let e = simulate(&p, &Policy::FromTable(best), &r, &opts(100, 10_000, 3)).unwrap();
    within(&e, evaluate(&p, &formula("formula5"), &o).unwrap().to_f64());
    let worst = extract_strategy(&p, &formula("formula5_worst"), &o).unwrap();
    let e = simulate(&p, &Policy::Minimize(worst), &r, &opts(100, 10_000, 4)).unwrap();
    within(&e, evaluate(&p, &formula("formula5_worst"), &o).unwrap().to_f64());
    let e = simulate(&p, &Policy::UniformRandom, &r, &opts(100, 10_000, 5)).unwrap();
    within(&e, evaluate(&p, &formula("formula5_random"), &o).unwrap().to_f64());
}

#[test]
fn reel_game_table_policy() {
    let p = plts("reel_hold_one_round");
    let f = formula("formula6");
    let o = rounds(3);
    let t = extract_strategy(&p, &f, &o).unwrap();
    let r = RewardSpec::parse("points(n) = n - 1", &p).unwrap();
    let e = simulate(&p, &Policy::FromTable(t), &r, &opts(3, 200_000, 9)).unwrap();
    within(&e, evaluate(&p, &f, &o).unwrap().to_f64());
}

#[test]
fn seed_and_thread_determinism() {
    let p = plts("three_column_hold");
    let r = RewardSpec::parse("win = 1; lose = -1; @round = win, hold", &p).unwrap();
    let mut o = opts(20, 5000, 42);
    o.threads = Some(1);
    let a = simulate(&p, &Policy::UniformRandom, &r, &o).unwrap();
    o.threads = Some(3);
    let b = simulate(&p, &Policy::UniformRandom, &r, &o).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.mean.to_bits(), b.mean.to_bits());
    o.seed = 43;
    let c = simulate(&p, &Policy::UniformRandom, &r, &o).unwrap();
    assert_ne!(a.mean, c.mean);
    assert_eq!(a.samples, 5000);
}

#[test]
fn table_horizon_is_enforced() {
    let p = plts("three_column_hold");
    let r = RewardSpec::parse("win = 1; @round = win, hold", &p).unwrap();
    let t = extract_strategy(&p, &formula("formula5"), &rounds(10)).unwrap();
    let e = simulate(&p, &Policy::FromTable(t.clone()), &r, &opts(20, 100, 1)).unwrap_err();
    assert!(matches!(e, SimError::HorizonExceeded { horizon: 10, .. }), "{e}");
    let part = t.at_remaining(10);
    let e = simulate(&p, &Policy::FromTable(part), &r, &opts(10, 100, 1)).unwrap_err();
    assert!(matches!(e, SimError::IncompletePolicy(_)), "{e}");
}

#[test]
fn reward_spec_errors() {
    let p = plts("reel_always_hold");
    assert!(RewardSpec::parse("spin = 1", &p).is_err());
    assert!(RewardSpec::parse("points(n, m) = n", &p).is_err());
    assert!(RewardSpec::parse("points(n) = n == 1", &p).is_err());
    assert!(RewardSpec::parse("points(n) n", &p).is_err());
    let r = RewardSpec::parse(
        "points(n) = n - 1; play(a, b, c, d) = if(a || b || c || d, -1, 0); @round = points",
        &p,
    )
    .unwrap();
    let hold = spinspec::statespace::ActionLabel {
        act: p.action_id("play").unwrap(),
        args: vec![
            Value::Bool(true),
            Value::Bool(false),
            Value::Bool(false),
            Value::Bool(false),
        ]
        .into(),
    };
    assert_eq!(r.gain_f64(&p, &hold).unwrap(), -1.0);
    assert!(!r.ends_round(&hold));
}

#[test]
fn stationary_slice_plays_any_number_of_rounds() {
    let p = plts("three_column_hold");
    let r = RewardSpec::parse("win = 1; @round = win, hold", &p).unwrap();
    let t = extract_strategy(&p, &formula("formula5"), &rounds(50))
        .unwrap()
        .stationary();
    let e = simulate(&p, &Policy::Stationary(t), &r, &opts(500, 2000, 8)).unwrap();
    within(&e, evaluate(&p, &formula("formula5"), &rounds(1000)).unwrap().to_f64());
}
