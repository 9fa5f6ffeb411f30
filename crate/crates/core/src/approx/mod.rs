//! Fixed-point approximations of the encoder's non-linear functions, with
//! double-precision oracles and an error harness.

mod config;
mod encoder;
mod fixed;
mod kernels;
mod oracle;
mod report;

pub use config::{gelu_knots, isqrt_table, recip_table, ApproxConfig, EXP_FRAC_BITS, PROB_FRAC_BITS};
pub use encoder::{cosine_similarity, EncoderBlock};
pub use fixed::FixedFormat;
pub use kernels::{
    gelu_pieces, gelu_pwl, isqrt_approx, layernorm_approx, pade_exp, softmax_approx, ExpOutput, GeluPiece,
    SoftmaxOutput,
};
pub use oracle::{exp_exact, gelu_exact, isqrt_exact, layernorm_exact, softmax_exact};
pub use report::{error_report, reports_to_csv, ApproxFn, ErrorReport};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ApproxError {
    #[error("fixed-point format: {0}")]
    Format(String),
    #[error("approximation config: {0}")]
    Config(String),
    #[error("input must be positive, got {0}")]
    NonPositive(f64),
    #[error("empty row")]
    EmptyRow,
    #[error("row of length {0} is too short (need at least 2)")]
    RowTooShort(usize),
    #[error("length mismatch: row {row}, gamma {gamma}, beta {beta}")]
    LengthMismatch { row: usize, gamma: usize, beta: usize },
    #[error("bad sweep domain: {0}")]
    Domain(String),
    #[error("export failed: {0}")]
    Export(String),
}
