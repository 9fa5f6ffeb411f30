//! Multi-bank data layout and static per-operation schedules.

mod bank;
mod plan;
mod schedule;
mod validate;

pub use bank::{pack_row, partition_banks, BankLayout};
pub use plan::{plan_layouts, schedule_node, LayoutChoice, LayoutConfig, NodePlan};
pub use schedule::{
    schedule_gelu, schedule_layernorm, schedule_row_parallel, schedule_softmax, Assignment, Schedule, ScheduleKind,
    ScheduleStep,
};
pub use validate::{validate_schedule, Verdict, Violation, Warning};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LayoutError {
    #[error("`{0}` must be positive")]
    Zero(&'static str),
    #[error("{cols} columns cannot be split over {banks} banks")]
    TooFewColumns { cols: u64, banks: u32 },
    #[error("{kernels} kernels exceed {banks} banks")]
    KernelsExceedBanks { kernels: u32, banks: u32 },
    #[error("strict rotation needs one kernel per bank ({kernels} kernels, {banks} banks)")]
    KernelsNotBanks { kernels: u32, banks: u32 },
    #[error("expected {expected} elements, found {found}")]
    DataLength { expected: usize, found: usize },
    #[error("hardware: {0}")]
    Hardware(String),
    #[error("schedule for `{node}` failed validation: {violations:?}")]
    InvalidSchedule { node: String, violations: Vec<Violation> },
}
