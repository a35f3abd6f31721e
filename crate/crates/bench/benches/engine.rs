use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use spinspec::datalang::Value;
use spinspec::models::{load_formula, load_model};
use spinspec::montecarlo::{simulate, Policy, RewardSpec, SimOptions};
use spinspec::quantcheck::{evaluate, EvalOptions};
use spinspec::statespace::{explore, ExploreLimits, Plts};
use spinspec::strategy::extract_strategy;

fn plts(name: &str) -> Plts {
    explore(&load_model(name).unwrap(), ExploreLimits::default()).unwrap()
}

fn rounds(n: i64) -> EvalOptions {
    EvalOptions::default().with_param("max_rounds", Value::Int(n))
}

fn exploration(c: &mut Criterion) {
    let mut g = c.benchmark_group("explore");
    g.sample_size(10);
    for name in ["three_column_hold", "five_play_lines", "reel_always_hold"] {
        let m = load_model(name).unwrap();
        g.bench_function(name, |b| {
            b.iter(|| explore(black_box(&m), ExploreLimits::default()).unwrap())
        });
    }
    g.finish();
}

fn checking(c: &mut Criterion) {
    let mut g = c.benchmark_group("check");
    g.sample_size(10);
    let one = plts("one_column");
    let f1 = load_formula("formula1").unwrap();
    g.bench_function("one_column/formula1", |b| {
        b.iter(|| evaluate(&one, &f1, &EvalOptions::default()).unwrap())
    });
    let hold = plts("three_column_hold");
    let f5 = load_formula("formula5").unwrap();
    g.bench_function("three_column_hold/formula5/1000", |b| {
        b.iter(|| evaluate(&hold, &f5, &rounds(1000)).unwrap())
    });
    let five = plts("five_play_lines");
    let rtp = load_formula("rtp5").unwrap();
    g.bench_function("five_play_lines/rtp5", |b| {
        b.iter(|| evaluate(&five, &rtp, &EvalOptions::default()).unwrap())
    });
    let reel = plts("reel_always_hold");
    let f6 = load_formula("formula6").unwrap();
    g.bench_function("reel_always_hold/formula6/4", |b| {
        b.iter(|| evaluate(&reel, &f6, &rounds(4)).unwrap())
    });
    g.finish();
}

fn strategies(c: &mut Criterion) {
    let mut g = c.benchmark_group("strategy");
    g.sample_size(10);
    let hold = plts("three_column_hold");
    let f5 = load_formula("formula5").unwrap();
    g.bench_function("extract/three_column_hold/100", |b| {
        b.iter(|| extract_strategy(&hold, &f5, &rounds(100)).unwrap())
    });
    g.finish();
}

fn simulation(c: &mut Criterion) {
    let mut g = c.benchmark_group("simulate");
    g.sample_size(10);
    let hold = plts("three_column_hold");
    let r = RewardSpec::parse("win = 1; @round = win, hold", &hold).unwrap();
    let opts = SimOptions {
        rounds: 100,
        episodes: 1000,
        seed: 1,
        threads: Some(1),
    };
    g.bench_function("three_column_hold/random/100x1000", |b| {
        b.iter(|| simulate(&hold, &Policy::UniformRandom, &r, &opts).unwrap())
    });
    g.finish();
}

criterion_group!(benches, exploration, checking, strategies, simulation);
criterion_main!(benches);
