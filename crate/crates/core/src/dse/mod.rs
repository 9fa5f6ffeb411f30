//! Design-space exploration over tile and parallelism parameters.

mod compare;
mod eval;
mod export;
mod pareto;
mod search;
mod space;

pub use compare::{compare_searches, ComparisonReport};
pub use eval::{Evaluation, EvaluationCache, GraphObjective, Latency, Objective};
pub use export::{evaluations_to_csv, pareto_to_csv};
pub use pareto::{domination_violations, pareto_front, ParetoPoint};
pub use search::{
    exhaustive_search, exhaustive_search_with, heuristic_search, heuristic_search_with, MutationBias, SearchConfig,
    SearchResult,
};
pub use space::{enumerate_space, SearchSpace, SpaceCaps};

use thiserror::Error;

/// Default ceiling on exhaustive enumeration.
pub const EXHAUSTIVE_CAP: u64 = 1_000_000;

#[derive(Debug, Error)]
pub enum DseError {
    #[error("search space has no feasible configuration")]
    EmptySpace,
    #[error("no evaluated configuration was feasible")]
    NoFeasible,
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid search config: {0}")]
    InvalidConfig(String),
    #[error("results come from different spaces ({left} vs {right})")]
    MismatchedSpaces { left: String, right: String },
    #[error("nothing to compare")]
    EmptyInput,
    #[error("space of {size} points exceeds the exhaustive cap of {cap}")]
    OverCap { size: u64, cap: u64 },
    #[error("export failed: {0}")]
    Csv(#[from] csv::Error),
    #[error("export failed: {0}")]
    Io(#[from] std::io::Error),
}

/// Refuses exhaustive enumeration of spaces larger than `cap` unless forced.
pub fn check_exhaustive_cap(space: &SearchSpace, cap: u64, force: bool) -> Result<(), DseError> {
    let size = space.size();
    if size > cap && !force {
        return Err(DseError::OverCap { size, cap });
    }
    Ok(())
}
