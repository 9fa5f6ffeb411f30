//! Exhaustive and population-based search over a [`SearchSpace`].

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::eval::{Evaluation, EvaluationCache, GraphObjective, Latency, Objective};
use super::space::{Point, SearchSpace};
use super::DseError;
use crate::hw::HardwareSpec;
use crate::model::Dag;

/// Probabilities of the mutation moves; they sum to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MutationBias {
    pub pn: f64,
    pub tm: f64,
    pub tn: f64,
    pub restart: f64,
}

impl Default for MutationBias {
    fn default() -> Self {
        Self { pn: 0.35, tm: 0.35, tn: 0.15, restart: 0.15 }
    }
}

impl MutationBias {
    fn weights(&self) -> [f64; 4] {
        [self.pn, self.tm, self.tn, self.restart]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    pub set_size: usize,
    pub iterations: usize,
    pub preservation_size: usize,
    pub seed: u64,
    pub mutation_bias: MutationBias,
    /// Largest mutation step as a fraction of a parameter's range; decays
    /// linearly to a single step over the run.
    pub initial_radius: f64,
    pub use_cache: bool,
    /// Hard cap on distinct cost-function calls.
    pub max_evaluations: Option<usize>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            set_size: 100,
            iterations: 50,
            preservation_size: 10,
            seed: 0,
            mutation_bias: MutationBias::default(),
            initial_radius: 0.25,
            use_cache: true,
            max_evaluations: None,
        }
    }
}

impl SearchConfig {
    /// Reads a JSON document; missing fields take their defaults.
    pub fn from_json(doc: &str) -> Result<Self, DseError> {
        let cfg: Self = serde_json::from_str(doc).map_err(|e| DseError::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), DseError> {
        let bad = |m: &str| Err(DseError::InvalidConfig(m.into()));
        if self.set_size == 0 {
            return bad("set_size must be positive");
        }
        // With no iterations nothing is preserved, so a single-member set is allowed.
        if self.preservation_size == 0 || (self.iterations > 0 && self.preservation_size >= self.set_size) {
            return bad("preservation_size must be in [1, set_size)");
        }
        let w = self.mutation_bias.weights();
        if w.iter().any(|x| !x.is_finite() || *x < 0.0) || (w.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return bad("mutation probabilities must be non-negative and sum to 1");
        }
        if self.max_evaluations == Some(0) {
            return bad("max_evaluations must be positive");
        }
        if !(self.initial_radius.is_finite() && self.initial_radius >= 0.0) {
            return bad("initial_radius must be non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub best: Evaluation,
    /// Distinct objective invocations (cache misses).
    pub evaluations_used: usize,
    /// Best latency after the initial evaluation and after each iteration.
    pub history: Vec<f64>,
    pub all_evaluated: Vec<Evaluation>,
    pub space_size: u64,
    pub space_fingerprint: String,
}

pub fn exhaustive_search(dag: &Dag, hw: &HardwareSpec, space: &SearchSpace) -> Result<SearchResult, DseError> {
    exhaustive_search_with(&GraphObjective::new(dag, hw), space)
}

/// Evaluates every feasible point, `T_m` outermost, `P_n`, then `T_n`.
/// Only strictly lower latencies replace the incumbent.
pub fn exhaustive_search_with(objective: &dyn Objective, space: &SearchSpace) -> Result<SearchResult, DseError> {
    let points: Vec<_> = space.points().collect();
    if points.is_empty() {
        return Err(DseError::EmptySpace);
    }
    let all_evaluated: Vec<Evaluation> = points
        .par_iter()
        .map(|t| Evaluation { tiles: *t, latency: objective.latency(t), from_cache: false })
        .collect();

    let mut best: Option<Evaluation> = None;
    for e in &all_evaluated {
        let Latency::Feasible(lat) = e.latency else { continue };
        if best.and_then(|b| b.latency.seconds()).is_none_or(|min| lat < min) {
            best = Some(*e);
        }
    }
    let best = best.ok_or(DseError::NoFeasible)?;
    Ok(SearchResult {
        best,
        evaluations_used: all_evaluated.len(),
        history: vec![best.latency.seconds().expect("best is feasible")],
        all_evaluated,
        space_size: space.size(),
        space_fingerprint: space.fingerprint(),
    })
}

pub fn heuristic_search(
    dag: &Dag,
    hw: &HardwareSpec,
    space: &SearchSpace,
    cfg: &SearchConfig,
) -> Result<SearchResult, DseError> {
    heuristic_search_with(&GraphObjective::new(dag, hw), space, cfg)
}

#[derive(Clone, Copy)]
enum Move {
    Pn,
    Tm,
    Tn,
    Restart,
}

const MOVES: [Move; 4] = [Move::Pn, Move::Tm, Move::Tn, Move::Restart];
const REDRAWS: usize = 10;

struct Mutator<'a> {
    space: &'a SearchSpace,
    weights: [f64; 4],
}

impl Mutator<'_> {
    fn pick_move(&self, rng: &mut ChaCha8Rng) -> Move {
        let total: f64 = self.weights.iter().sum();
        let mut x = rng.gen::<f64>() * total;
        for (m, w) in MOVES.iter().zip(self.weights) {
            if x < w {
                return *m;
            }
            x -= w;
        }
        Move::Restart
    }

    fn step(len: usize, radius: f64, rng: &mut ChaCha8Rng) -> isize {
        let max = ((len as f64 * radius).ceil() as usize).max(1);
        let magnitude = rng.gen_range(1..=max) as isize;
        if rng.gen::<bool>() {
            magnitude
        } else {
            -magnitude
        }
    }

    fn shift(index: usize, delta: isize, len: usize) -> usize {
        (index as isize + delta).clamp(0, len as isize - 1) as usize
    }

    /// Perturbs one parameter of `parent`, pulling the others back inside the
    /// feasible region if needed; after [`REDRAWS`] failed attempts the child
    /// is a uniform random feasible point.
    fn mutate(&self, parent: Point, radius: f64, rng: &mut ChaCha8Rng) -> Point {
        let s = self.space;
        let mv = self.pick_move(rng);
        if let Move::Restart = mv {
            return s.random_point(rng);
        }
        for _ in 0..REDRAWS {
            let mut child = parent;
            match mv {
                Move::Pn => {
                    let len = s.pn_range.len();
                    child.pn = Self::shift(parent.pn, Self::step(len, radius, rng), len);
                }
                Move::Tm => {
                    let len = s.tm_range.len();
                    child = s.with_tm(parent, Self::shift(parent.tm, Self::step(len, radius, rng), len));
                }
                Move::Tn => {
                    let len = s.tn_range.len();
                    child.tn = Self::shift(parent.tn, Self::step(len, radius, rng), len);
                }
                Move::Restart => unreachable!(),
            }
            let child = s.project(child);
            if child != parent && s.feasible(child) {
                return child;
            }
        }
        s.random_point(rng)
    }
}

struct Evaluator<'a> {
    objective: &'a dyn Objective,
    space: &'a SearchSpace,
    cache: Option<EvaluationCache>,
    budget: Option<usize>,
    calls: usize,
    log: Vec<Evaluation>,
}

impl Evaluator<'_> {
    fn remaining(&self) -> usize {
        self.budget.map_or(usize::MAX, |b| b.saturating_sub(self.calls))
    }

    /// Evaluates a generation. Distinct uncached configurations are computed
    /// in parallel; which ones miss is decided before the fan-out, so results
    /// do not depend on thread timing. Members that would exceed the
    /// evaluation budget are dropped.
    fn evaluate(&mut self, members: &[Point]) -> Vec<(Point, Evaluation)> {
        let mut remaining = self.remaining();
        let Some(cache) = &self.cache else {
            let kept = &members[..members.len().min(remaining)];
            let out: Vec<(Point, Evaluation)> = kept
                .par_iter()
                .map(|&p| {
                    let t = self.space.tiles(p);
                    (p, Evaluation { tiles: t, latency: self.objective.latency(&t), from_cache: false })
                })
                .collect();
            self.calls += out.len();
            self.log.extend(out.iter().map(|(_, e)| *e));
            return out;
        };

        let mut scheduled = HashSet::new();
        let mut kept = Vec::with_capacity(members.len());
        let mut fresh = Vec::new();
        for &p in members {
            let t = self.space.tiles(p);
            if cache.get(&t).is_some() || scheduled.contains(&t) {
                kept.push((p, t, false));
            } else if remaining > 0 {
                remaining -= 1;
                scheduled.insert(t);
                fresh.push(t);
                kept.push((p, t, true));
            }
        }
        let before = cache.misses();
        fresh.par_iter().for_each(|t| {
            cache.get_or_evaluate(*t, || self.objective.latency(t));
        });
        self.calls += cache.misses() - before;

        let out: Vec<(Point, Evaluation)> = kept
            .into_iter()
            .map(|(p, t, first)| {
                let latency = cache.get(&t).expect("evaluated above");
                (p, Evaluation { tiles: t, latency, from_cache: !first })
            })
            .collect();
        self.log.extend(out.iter().map(|(_, e)| *e));
        out
    }
}

fn best_of(evals: &[(Point, Evaluation)]) -> Option<Evaluation> {
    evals.iter().map(|(_, e)| *e).min_by(|a, b| a.better(b))
}

/// Population search: random feasible start, elitist preservation, and
/// mutation biased toward `P_n` and `T_m` with a shrinking step radius.
/// Stops early once `max_evaluations` distinct configurations were costed.
/// Deterministic for a given seed.
pub fn heuristic_search_with(
    objective: &dyn Objective,
    space: &SearchSpace,
    cfg: &SearchConfig,
) -> Result<SearchResult, DseError> {
    cfg.validate()?;
    if space.size() == 0 {
        return Err(DseError::EmptySpace);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mutator = Mutator { space, weights: cfg.mutation_bias.weights() };
    let mut evaluator = Evaluator {
        objective,
        space,
        cache: cfg.use_cache.then(EvaluationCache::new),
        budget: cfg.max_evaluations,
        calls: 0,
        log: Vec::new(),
    };

    let population: Vec<Point> = (0..cfg.set_size).map(|_| space.random_point(&mut rng)).collect();
    let mut ranked = evaluator.evaluate(&population);
    let mut history = Vec::with_capacity(cfg.iterations + 1);
    let mut best = best_of(&ranked).ok_or(DseError::NoFeasible)?;
    history.push(best.latency.seconds().unwrap_or(f64::INFINITY));

    for iteration in 0..cfg.iterations {
        if evaluator.remaining() == 0 {
            break;
        }
        ranked.sort_by(|a, b| a.1.better(&b.1));

        let mut elites: Vec<Point> = Vec::with_capacity(cfg.preservation_size);
        for (p, e) in &ranked {
            if elites.len() == cfg.preservation_size {
                break;
            }
            if e.latency.is_feasible() && !elites.contains(p) {
                elites.push(*p);
            }
        }
        if elites.is_empty() {
            elites.push(space.random_point(&mut rng));
        }

        let radius = cfg.initial_radius * (1.0 - iteration as f64 / cfg.iterations as f64);
        let mut next = elites.clone();
        while next.len() < cfg.set_size {
            let parent = *elites.choose(&mut rng).expect("elites non-empty");
            next.push(mutator.mutate(parent, radius, &mut rng));
        }
        ranked = evaluator.evaluate(&next);
        if let Some(gen_best) = best_of(&ranked) {
            if gen_best.better(&best).is_lt() {
                best = gen_best;
            }
        }
        history.push(best.latency.seconds().unwrap_or(f64::INFINITY));
    }

    if !best.latency.is_feasible() {
        return Err(DseError::NoFeasible);
    }
    Ok(SearchResult {
        best,
        evaluations_used: evaluator.calls,
        history,
        all_evaluated: evaluator.log,
        space_size: space.size(),
        space_fingerprint: space.fingerprint(),
    })
}
