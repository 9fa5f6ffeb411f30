use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::pareto::{pareto_front, ParetoPoint};
use super::search::SearchResult;
use super::DseError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub space_size: u64,
    pub heuristic_latency_s: f64,
    pub exhaustive_latency_s: f64,
    /// Heuristic best over exhaustive best; 1.0 means the optimum was found.
    pub latency_ratio: f64,
    /// `latency_ratio - 1`.
    pub optimality_gap: f64,
    pub heuristic_evaluations: usize,
    pub exhaustive_evaluations: usize,
    /// Heuristic evaluations as a fraction of the feasible space.
    pub evaluation_fraction: f64,
    pub exhaustive_front: Vec<ParetoPoint>,
    pub heuristic_front: Vec<ParetoPoint>,
    /// Share of exhaustive Pareto points the heuristic evaluated.
    pub pareto_coverage: f64,
    pub wall_clock_ratio: Option<f64>,
}

/// Compares a heuristic result against the exhaustive optimum on the same space.
///
/// A Pareto point counts as covered when the heuristic evaluated any of the
/// configurations attaining it.
pub fn compare_searches(
    heuristic: &SearchResult,
    exhaustive: &SearchResult,
    wall_clock_s: Option<(f64, f64)>,
) -> Result<ComparisonReport, DseError> {
    if heuristic.space_fingerprint != exhaustive.space_fingerprint {
        return Err(DseError::MismatchedSpaces {
            left: heuristic.space_fingerprint.clone(),
            right: exhaustive.space_fingerprint.clone(),
        });
    }
    let h = heuristic.best.latency.seconds().ok_or(DseError::NoFeasible)?;
    let x = exhaustive.best.latency.seconds().ok_or(DseError::NoFeasible)?;
    let exhaustive_front = pareto_front(&exhaustive.all_evaluated);
    let heuristic_front = pareto_front(&heuristic.all_evaluated);
    let seen: HashSet<_> = heuristic.all_evaluated.iter().map(|e| e.tiles).collect();
    let covered = exhaustive_front
        .iter()
        .filter(|p| p.tiles.iter().any(|t| seen.contains(t)))
        .count();
    let pareto_coverage = if exhaustive_front.is_empty() { 1.0 } else { covered as f64 / exhaustive_front.len() as f64 };
    let ratio = h / x;
    Ok(ComparisonReport {
        space_size: exhaustive.space_size,
        heuristic_latency_s: h,
        exhaustive_latency_s: x,
        latency_ratio: ratio,
        optimality_gap: ratio - 1.0,
        heuristic_evaluations: heuristic.evaluations_used,
        exhaustive_evaluations: exhaustive.evaluations_used,
        evaluation_fraction: heuristic.evaluations_used as f64 / exhaustive.space_size as f64,
        exhaustive_front,
        heuristic_front,
        pareto_coverage,
        wall_clock_ratio: wall_clock_s.and_then(|(hs, xs)| (xs > 0.0).then(|| hs / xs)),
    })
}
