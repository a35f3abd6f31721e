//! Simulation of a transition system under a policy, as a statistical
//! cross-check of the exact checker, and exact enumeration of acyclic
//! single-shot games.
//!
//! Sampling is exact: each distribution's rational probabilities are put
//! on a common denominator and an integer is drawn uniformly below it.
//! Episodes are split into chunks of [`CHUNK`] episodes; chunk `c` draws
//! from Xoshiro256++ seeded through SplitMix64 with
//! `seed + c * 0x9E3779B97F4A7C15`, and chunk statistics are merged in
//! chunk order, so results do not depend on the number of threads.

mod rewards;

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use rayon::prelude::*;
use rustc_hash::FxHashMap;
use serde::Serialize;
use thiserror::Error;

use crate::statespace::{ActionLabel, DistId, Plts, StateId};
use crate::strategy::StrategyTable;

pub use rewards::RewardSpec;

/// Episodes per independently seeded chunk.
pub const CHUNK: u64 = 1024;

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum SimError {
    #[error("no table entry for the choice in state {0}")]
    IncompletePolicy(String),
    #[error("the table covers {horizon} rounds but the episode reached round {round}")]
    HorizonExceeded { round: i64, horizon: i64 },
    #[error("the model has a cycle within the horizon")]
    CyclicModel,
    #[error("state {0} has a nondeterministic choice")]
    Nondeterministic(String),
    #[error("reward specification: {0}")]
    Reward(String),
    #[error("an episode took {0} steps without finishing its rounds")]
    NoProgress(u64),
    #[error("{0}")]
    BadArgument(String),
    #[error("probabilities of a distribution have no common denominator below 2^127")]
    SamplingOverflow,
}

/// How nondeterministic choices are resolved.
#[derive(Clone, Debug)]
pub enum Policy {
    /// Each distinct label with equal probability.
    UniformRandom,
    /// As recorded in a table extracted from a maximising formula.
    FromTable(StrategyTable),
    /// As recorded in a table extracted from a minimising formula.
    Minimize(StrategyTable),
    /// The choices of the table's first horizon slice, in every round and
    /// for any number of rounds.
    Stationary(StrategyTable),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Estimate {
    /// Mean gain per round over episodes.
    pub mean: f64,
    /// Sample standard deviation over the square root of the count.
    pub std_error: f64,
    pub samples: u64,
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub struct SimOptions {
    pub rounds: u64,
    pub episodes: u64,
    pub seed: u64,
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
}

struct Sampler {
    cum: Vec<Box<[u128]>>,
}

impl Sampler {
    fn new(plts: &Plts) -> Result<Sampler, SimError> {
        let mut cum = Vec::with_capacity(plts.num_dists());
        for d in plts.dists() {
            let mut den: u128 = 1;
            for (_, p) in &d.support {
                let q = *p.denom() as u128;
                den = den.checked_mul(q / den.gcd(&q)).ok_or(SimError::SamplingOverflow)?;
            }
            let mut acc: u128 = 0;
            let mut row = Vec::with_capacity(d.support.len());
            for (_, p) in &d.support {
                let w = (*p.numer() as u128)
                    .checked_mul(den / *p.denom() as u128)
                    .ok_or(SimError::SamplingOverflow)?;
                acc = acc.checked_add(w).ok_or(SimError::SamplingOverflow)?;
                row.push(acc);
            }
            cum.push(row.into_boxed_slice());
        }
        Ok(Sampler { cum })
    }

    fn draw(&self, plts: &Plts, d: DistId, rng: &mut Xoshiro256PlusPlus) -> Option<StateId> {
        let row = &self.cum[d as usize];
        let total = *row.last()?;
        let x = rng.random_range(0..total);
        let k = row.partition_point(|&c| c <= x);
        Some(plts.dist(d).support[k].0)
    }
}

/// Per state: first transition index of each distinct label, with its gain
/// and whether it ends a round.
struct Moves {
    groups: Vec<Vec<(usize, f64, bool)>>,
}

impl Moves {
    fn new(plts: &Plts, rewards: &RewardSpec) -> Result<Moves, SimError> {
        let mut cache: FxHashMap<ActionLabel, f64> = FxHashMap::default();
        let mut groups = Vec::with_capacity(plts.num_states());
        for s in 0..plts.num_states() as StateId {
            let succ = plts.successors(s);
            let mut g: Vec<(usize, f64, bool)> = vec![];
            for (i, t) in succ.iter().enumerate() {
                if g.iter().any(|&(j, _, _)| succ[j].label == t.label) {
                    continue;
                }
                let gain = match cache.get(&t.label) {
                    Some(&x) => x,
                    None => {
                        let x = rewards.gain_f64(plts, &t.label)?;
                        cache.insert(t.label.clone(), x);
                        x
                    }
                };
                g.push((i, gain, rewards.ends_round(&t.label)));
            }
            groups.push(g);
        }
        Ok(Moves { groups })
    }
}

struct Chooser<'t> {
    map: Option<BTreeMap<(StateId, Option<i64>), &'t ActionLabel>>,
    h0: i64,
    end: Option<i64>,
    /// Horizon value used in every round.
    fixed: Option<Option<i64>>,
}

impl<'t> Chooser<'t> {
    fn new(policy: &'t Policy) -> Chooser<'t> {
        match policy {
            Policy::UniformRandom => Chooser {
                map: None,
                h0: 0,
                end: None,
                fixed: None,
            },
            Policy::FromTable(t) | Policy::Minimize(t) => Chooser {
                map: Some(t.lookup()),
                h0: t.points.iter().filter_map(|p| t.horizon_value(p)).min().unwrap_or(0),
                end: t.horizon_end,
                fixed: None,
            },
            Policy::Stationary(t) => {
                let first = t.points.iter().filter_map(|p| t.horizon_value(p)).min();
                Chooser {
                    map: Some(t.lookup()),
                    h0: first.unwrap_or(0),
                    end: None,
                    fixed: Some(first),
                }
            }
        }
    }

    fn choose(
        &self,
        plts: &Plts,
        s: StateId,
        round: u64,
        options: &[(usize, f64, bool)],
        rng: &mut Xoshiro256PlusPlus,
    ) -> Result<usize, SimError> {
        let Some(map) = &self.map else {
            return Ok(rng.random_range(0..options.len()));
        };
        let h = match self.fixed {
            Some(h) => h,
            None => self.end.map(|_| self.h0 + round as i64),
        };
        if let (Some(h), Some(end)) = (h, self.end) {
            if h >= end {
                return Err(SimError::HorizonExceeded {
                    round: round as i64 + 1,
                    horizon: end - self.h0,
                });
            }
        }
        let label = map
            .get(&(s, h))
            .ok_or_else(|| SimError::IncompletePolicy(plts.state_string(s)))?;
        let succ = plts.successors(s);
        options
            .iter()
            .position(|&(i, _, _)| succ[i].label == **label)
            .ok_or_else(|| SimError::IncompletePolicy(plts.state_string(s)))
    }
}

/// Running count, mean and sum of squared deviations.
#[derive(Clone, Copy, Debug, Default)]
struct Stats {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Stats {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    fn merge(self, o: Stats) -> Stats {
        if self.n == 0 {
            return o;
        }
        if o.n == 0 {
            return self;
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        Stats {
            n,
            mean: self.mean + d * o.n as f64 / n as f64,
            m2: self.m2 + o.m2 + d * d * (self.n as f64 * o.n as f64) / n as f64,
        }
    }
}

fn chunk_rng(seed: u64, chunk: u64) -> Xoshiro256PlusPlus {
    Xoshiro256PlusPlus::seed_from_u64(seed.wrapping_add(chunk.wrapping_mul(0x9E37_79B9_7F4A_7C15)))
}

/// Mean gain per round over `episodes` runs of `rounds` rounds each.
pub fn simulate(plts: &Plts, policy: &Policy, rewards: &RewardSpec, opts: &SimOptions) -> Result<Estimate, SimError> {
    if opts.rounds == 0 || opts.episodes == 0 {
        return Err(SimError::BadArgument("rounds and episodes must be positive".into()));
    }
    let sampler = Sampler::new(plts)?;
    let moves = Moves::new(plts, rewards)?;
    let chooser = Chooser::new(policy);
    let max_steps = 1_000_000 + 1_000 * opts.rounds;
    let episode = |rng: &mut Xoshiro256PlusPlus| -> Result<f64, SimError> {
        let mut gain = 0.0;
        let mut round = 0u64;
        let Some(mut s) = sampler.draw(plts, plts.init(), rng) else {
            return Ok(0.0);
        };
        let mut steps = 0u64;
        while round < opts.rounds {
            let options = &moves.groups[s as usize];
            if options.is_empty() {
                break;
            }
            steps += 1;
            if steps > max_steps {
                return Err(SimError::NoProgress(max_steps));
            }
            let k = if options.len() == 1 {
                0
            } else {
                chooser.choose(plts, s, round, options, rng)?
            };
            let (i, g, ends) = options[k];
            gain += g;
            if ends {
                round += 1;
            }
            let t = &plts.successors(s)[i];
            match sampler.draw(plts, t.dist, rng) {
                Some(next) => s = next,
                None => break,
            }
        }
        Ok(gain / opts.rounds as f64)
    };
    let chunks = opts.episodes.div_ceil(CHUNK);
    let run_chunk = |c: u64| -> Result<Stats, SimError> {
        let mut rng = chunk_rng(opts.seed, c);
        let n = CHUNK.min(opts.episodes - c * CHUNK);
        let mut st = Stats::default();
        for _ in 0..n {
            st.push(episode(&mut rng)?);
        }
        Ok(st)
    };
    let parts: Vec<Result<Stats, SimError>> = match opts.threads {
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t.max(1))
                .build()
                .map_err(|e| SimError::BadArgument(e.to_string()))?;
            pool.install(|| (0..chunks).into_par_iter().map(run_chunk).collect())
        }
        None => (0..chunks).into_par_iter().map(run_chunk).collect(),
    };
    let mut total = Stats::default();
    for p in parts {
        total = total.merge(p?);
    }
    let std_error = if total.n > 1 {
        (total.m2 / (total.n - 1) as f64).sqrt() / (total.n as f64).sqrt()
    } else {
        0.0
    };
    Ok(Estimate {
        mean: total.mean,
        std_error,
        samples: total.n,
        seed: opts.seed,
    })
}

/// Exact expected total gain over the first `horizon` rounds, by summing
/// over all paths. Requires a deterministic model without cycles inside
/// the horizon.
pub fn enumerate_exact(plts: &Plts, rewards: &RewardSpec, horizon: u64) -> Result<BigRational, SimError> {
    struct Walk<'a> {
        plts: &'a Plts,
        rewards: &'a RewardSpec,
        memo: FxHashMap<(StateId, u64), BigRational>,
        active: FxHashMap<(StateId, u64), ()>,
    }
    fn big(r: &crate::datalang::Rational) -> BigRational {
        BigRational::new(BigInt::from(*r.numer()), BigInt::from(*r.denom()))
    }
    impl Walk<'_> {
        fn dist(&mut self, d: DistId, left: u64) -> Result<BigRational, SimError> {
            let mut acc = BigRational::zero();
            let support = self.plts.dist(d).support.clone();
            for (s, p) in support {
                acc += big(&p) * self.state(s, left)?;
            }
            Ok(acc)
        }

        fn state(&mut self, s: StateId, left: u64) -> Result<BigRational, SimError> {
            if left == 0 {
                return Ok(BigRational::zero());
            }
            if let Some(v) = self.memo.get(&(s, left)) {
                return Ok(v.clone());
            }
            if self.active.insert((s, left), ()).is_some() {
                return Err(SimError::CyclicModel);
            }
            let succ = self.plts.successors(s);
            let v = match succ.first() {
                None => BigRational::zero(),
                Some(t) => {
                    if succ.iter().any(|u| u.label != t.label) {
                        return Err(SimError::Nondeterministic(self.plts.state_string(s)));
                    }
                    let g = big(&self.rewards.gain(self.plts, &t.label)?);
                    let next = if self.rewards.ends_round(&t.label) {
                        left - 1
                    } else {
                        left
                    };
                    g + self.dist(t.dist, next)?
                }
            };
            self.active.remove(&(s, left));
            self.memo.insert((s, left), v.clone());
            Ok(v)
        }
    }
    let mut w = Walk {
        plts,
        rewards,
        memo: FxHashMap::default(),
        active: FxHashMap::default(),
    };
    w.dist(plts.init(), horizon)
}
