//! Hardware envelope and the analytical latency model.

mod cost;
mod spec;

pub use cost::{
    compute_pm, graph_latency, kernel_factor, matmul_cost, matmul_cost_unchecked, nonlinear_cycles, validate_tiles,
    validate_tiles_with, CostBreakdown, CostModel, Cycles, Feasibility, GraphCost, GraphLatency, MatMulDims,
    NodeCost, ResourcePredicate, TileParams, TileViolation, Unchecked,
};
pub use spec::{parse_hardware, HardwareSpec, HW_SCHEMA_VERSION};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HwError {
    #[error("malformed hardware document: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported schema_version {found} (expected {expected})")]
    SchemaVersion { found: u32, expected: u32 },
    #[error("invalid `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },
    #[error("AXI width {axi} is narrower than two data words of {dw} bits")]
    AxiTooNarrow { axi: u32, dw: u32 },
    #[error("infeasible tile configuration: {0:?}")]
    Infeasible(Vec<TileViolation>),
}
