//! Model description, operation DAG and graph rewrites.

mod analysis;
mod build;
mod dag;
mod rewrite;
mod spec;

pub use analysis::{analyze, AnalysisReport, MatMulSummary};
pub use build::build_dag;
pub use dag::{topo_schedule, BOperand, Dag, MatMulOp, NodeId, OpKind, OpNode, OpTag, Operand, Shape};
pub use rewrite::{batch_expand, fuse_qkv, split_heads, FuseOutcome};
pub use spec::{parse_model, ModelSpec, MODEL_SCHEMA_VERSION};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("malformed model document: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported schema_version {found} (expected {expected})")]
    SchemaVersion { found: u32, expected: u32 },
    #[error("invalid `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },
    #[error("embed_dim {embed_dim} is not divisible by num_heads {num_heads}")]
    HeadDivisibility { embed_dim: u64, num_heads: u64 },
    #[error("node `{node}`: {reason}")]
    Node { node: String, reason: String },
    #[error("shape mismatch on edge {producer} -> {consumer}: produces {produced}, expects {expected}")]
    Shape { producer: String, consumer: String, produced: Shape, expected: Shape },
    #[error("dependency cycle through `{node}`")]
    Cycle { node: String },
}

impl ModelError {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        ModelError::Invalid { field, reason: reason.into() }
    }
}
