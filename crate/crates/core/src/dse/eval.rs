use std::cmp::Ordering;
use std::sync::atomic::{AtomicUsize, Ordering as AtomicOrdering};

use dashmap::mapref::entry::Entry;
use dashmap::DashMap;
use serde::{Deserialize, Serialize};

use crate::hw::{CostModel, HardwareSpec, TileParams};
use crate::model::Dag;

/// Modelled latency of one configuration, or an explicit infeasible marker.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", content = "seconds", rename_all = "snake_case")]
pub enum Latency {
    Feasible(f64),
    Infeasible,
}

impl Latency {
    pub fn seconds(&self) -> Option<f64> {
        match self {
            Latency::Feasible(s) => Some(*s),
            Latency::Infeasible => None,
        }
    }

    pub fn is_feasible(&self) -> bool {
        matches!(self, Latency::Feasible(_))
    }

    /// Total order with every feasible value ahead of the infeasible marker.
    pub fn rank(&self, other: &Latency) -> Ordering {
        match (self, other) {
            (Latency::Feasible(a), Latency::Feasible(b)) => a.total_cmp(b),
            (Latency::Feasible(_), Latency::Infeasible) => Ordering::Less,
            (Latency::Infeasible, Latency::Feasible(_)) => Ordering::Greater,
            (Latency::Infeasible, Latency::Infeasible) => Ordering::Equal,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub tiles: TileParams,
    pub latency: Latency,
    pub from_cache: bool,
}

impl Evaluation {
    /// Lower latency first, then the smaller tile tuple.
    pub(crate) fn better(&self, other: &Evaluation) -> Ordering {
        self.latency.rank(&other.latency).then_with(|| self.tiles.cmp(&other.tiles))
    }
}

/// The function being minimised. Implementations must be pure.
pub trait Objective: Sync {
    fn latency(&self, tiles: &TileParams) -> Latency;
}

/// Whole-graph latency under the analytical model.
#[derive(Debug, Clone)]
pub struct GraphObjective {
    model: CostModel,
    hw: HardwareSpec,
}

impl GraphObjective {
    pub fn new(dag: &Dag, hw: &HardwareSpec) -> Self {
        Self { model: CostModel::new(dag), hw: hw.clone() }
    }
}

impl Objective for GraphObjective {
    fn latency(&self, tiles: &TileParams) -> Latency {
        self.model.latency_s(tiles, &self.hw).map_or(Latency::Infeasible, Latency::Feasible)
    }
}

impl<F> Objective for F
where
    F: Fn(&TileParams) -> Latency + Sync,
{
    fn latency(&self, tiles: &TileParams) -> Latency {
        self(tiles)
    }
}

/// Memo of objective results keyed by configuration.
///
/// Concurrent readers are allowed; insertion is insert-if-absent under the
/// shard lock, so each key is computed at most once.
#[derive(Debug, Default)]
pub struct EvaluationCache {
    map: DashMap<TileParams, Latency>,
    misses: AtomicUsize,
}

impl EvaluationCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, tiles: &TileParams) -> Option<Latency> {
        self.map.get(tiles).map(|v| *v)
    }

    /// Returns the cached value, or computes and stores it. The flag is true on a hit.
    pub fn get_or_evaluate(&self, tiles: TileParams, f: impl FnOnce() -> Latency) -> (Latency, bool) {
        match self.map.entry(tiles) {
            Entry::Occupied(e) => (*e.get(), true),
            Entry::Vacant(v) => {
                let latency = f();
                v.insert(latency);
                self.misses.fetch_add(1, AtomicOrdering::Relaxed);
                (latency, false)
            }
        }
    }

    pub fn misses(&self) -> usize {
        self.misses.load(AtomicOrdering::Relaxed)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rayon::prelude::*;

    #[test]
    fn concurrent_inserts_compute_once() {
        let cache = EvaluationCache::new();
        let calls = AtomicUsize::new(0);
        (0..64).into_par_iter().for_each(|i| {
            let t = TileParams::new(1 + i % 4, 1, 1, 8);
            cache.get_or_evaluate(t, || {
                calls.fetch_add(1, AtomicOrdering::SeqCst);
                Latency::Feasible(t.pn as f64)
            });
        });
        assert_eq!(calls.load(AtomicOrdering::SeqCst), 4);
        assert_eq!(cache.misses(), 4);
        assert_eq!(cache.get(&TileParams::new(2, 1, 1, 8)), Some(Latency::Feasible(2.0)));
    }

    #[test]
    fn infeasible_ranks_last() {
        assert_eq!(Latency::Feasible(1e9).rank(&Latency::Infeasible), Ordering::Less);
        assert_eq!(Latency::Infeasible.rank(&Latency::Infeasible), Ordering::Equal);
    }
}
