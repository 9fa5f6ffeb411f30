use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::LayoutError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ScheduleKind {
    MatMulRowParallel,
    Gelu,
    Softmax,
    LayerNorm,
}

impl ScheduleKind {
    pub fn name(self) -> &'static str {
        match self {
            ScheduleKind::MatMulRowParallel => "matmul_row_parallel",
            ScheduleKind::Gelu => "gelu",
            ScheduleKind::Softmax => "softmax",
            ScheduleKind::LayerNorm => "layernorm",
        }
    }
}

/// One kernel's work item: `unit` is a column segment, or a head for softmax.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Assignment {
    pub kernel: u32,
    pub bank: u32,
    pub row: u64,
    pub unit: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleStep {
    pub index: u64,
    pub assignments: Vec<Assignment>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    pub kind: ScheduleKind,
    pub kernels: u32,
    pub banks: u32,
    pub rows: u64,
    /// Work units per row: `banks` segments, or the head count for softmax.
    pub units_per_row: u32,
    pub steps: Vec<ScheduleStep>,
}

impl Schedule {
    pub fn assignments(&self) -> impl Iterator<Item = (u64, &Assignment)> {
        self.steps.iter().flat_map(|s| s.assignments.iter().map(move |a| (s.index, a)))
    }

    /// Kernel-to-bank map of step `t`, indexed by kernel.
    pub fn bank_map(&self, t: usize) -> Vec<Option<u32>> {
        let mut map = vec![None; self.kernels as usize];
        for a in &self.steps[t].assignments {
            map[a.kernel as usize] = Some(a.bank);
        }
        map
    }

    /// Line-oriented dump: a header, then `step kernel bank row unit` per assignment.
    pub fn to_trace(&self) -> String {
        let mut out = format!(
            "# kind={} kernels={} banks={} rows={} units_per_row={}\n",
            self.kind.name(),
            self.kernels,
            self.banks,
            self.rows,
            self.units_per_row
        );
        for (step, a) in self.assignments() {
            writeln!(out, "{step} {} {} {} {}", a.kernel, a.bank, a.row, a.unit).expect("string write");
        }
        out
    }

    /// Fewest steps any valid schedule of this shape can take.
    pub fn step_lower_bound(&self) -> u64 {
        let k = u64::from(self.kernels.max(1));
        let bn = u64::from(self.banks.max(1));
        match self.kind {
            ScheduleKind::MatMulRowParallel | ScheduleKind::Gelu => (self.rows * bn).div_ceil(k),
            ScheduleKind::Softmax => self.rows * softmax_steps_per_row(u64::from(self.units_per_row), bn, k),
            ScheduleKind::LayerNorm => self.rows.div_ceil(k) * bn,
        }
    }
}

fn softmax_steps_per_row(heads: u64, bn: u64, k: u64) -> u64 {
    let lanes = k.min(bn);
    (0..heads.div_ceil(bn)).map(|r| (heads - r * bn).min(bn).div_ceil(lanes)).sum()
}

fn check_nonzero(rows: u64, bn: u32, kernels: u32) -> Result<(), LayoutError> {
    if rows == 0 {
        return Err(LayoutError::Zero("rows"));
    }
    if bn == 0 {
        return Err(LayoutError::Zero("banks"));
    }
    if kernels == 0 {
        return Err(LayoutError::Zero("kernels"));
    }
    Ok(())
}

fn steps_from(chunks: Vec<Vec<Assignment>>) -> Vec<ScheduleStep> {
    chunks.into_iter().enumerate().map(|(i, assignments)| ScheduleStep { index: i as u64, assignments }).collect()
}

fn row_parallel(kind: ScheduleKind, rows: u64, bn: u32, kernels: u32) -> Result<Schedule, LayoutError> {
    check_nonzero(rows, bn, kernels)?;
    if kernels > bn {
        return Err(LayoutError::KernelsExceedBanks { kernels, banks: bn });
    }
    let units: Vec<(u64, u32)> = (0..rows).flat_map(|r| (0..bn).map(move |s| (r, s))).collect();
    let chunks = units
        .chunks(kernels as usize)
        .map(|c| {
            c.iter()
                .enumerate()
                .map(|(i, &(row, seg))| Assignment { kernel: i as u32, bank: seg, row, unit: seg })
                .collect()
        })
        .collect();
    Ok(Schedule { kind, kernels, banks: bn, rows, units_per_row: bn, steps: steps_from(chunks) })
}

/// Row-parallel order: consecutive kernels take consecutive segments of the
/// current row, each from its own bank. With `kernels == bn` kernel `i`
/// always reads bank `i`.
pub fn schedule_row_parallel(rows: u64, bn: u32, kernels: u32) -> Result<Schedule, LayoutError> {
    row_parallel(ScheduleKind::MatMulRowParallel, rows, bn, kernels)
}

/// GELU uses the row-parallel pattern.
pub fn schedule_gelu(rows: u64, bn: u32, kernels: u32) -> Result<Schedule, LayoutError> {
    row_parallel(ScheduleKind::Gelu, rows, bn, kernels)
}

/// Head `h` lives in bank `h mod bn`. Each row is visited `ceil(heads/bn)`
/// rounds; in round `r` the heads `r*bn ..` are spread over distinct banks.
/// Fewer kernels than banks split a round over several steps.
pub fn schedule_softmax(num_heads: u32, bn: u32, rows: u64, kernels: u32) -> Result<Schedule, LayoutError> {
    check_nonzero(rows, bn, kernels)?;
    if num_heads == 0 {
        return Err(LayoutError::Zero("num_heads"));
    }
    let lanes = kernels.min(bn) as usize;
    let mut chunks = Vec::new();
    for row in 0..rows {
        for round_start in (0..num_heads).step_by(bn as usize) {
            let heads: Vec<u32> = (round_start..num_heads.min(round_start + bn)).collect();
            for group in heads.chunks(lanes) {
                chunks.push(
                    group
                        .iter()
                        .enumerate()
                        .map(|(i, &h)| Assignment { kernel: i as u32, bank: h % bn, row, unit: h })
                        .collect(),
                );
            }
        }
    }
    Ok(Schedule { kind: ScheduleKind::Softmax, kernels, banks: bn, rows, units_per_row: num_heads, steps: steps_from(chunks) })
}

/// Rotating order: in a block of `kernels` rows, kernel `i` owns row
/// `base + i` and at rotation step `t` reads segment `(i + t) mod bn`.
/// `strict` demands one kernel per bank.
pub fn schedule_layernorm(rows: u64, bn: u32, kernels: u32, strict: bool) -> Result<Schedule, LayoutError> {
    check_nonzero(rows, bn, kernels)?;
    if kernels > bn {
        return Err(LayoutError::KernelsExceedBanks { kernels, banks: bn });
    }
    if strict && kernels != bn {
        return Err(LayoutError::KernelsNotBanks { kernels, banks: bn });
    }
    let mut chunks = Vec::new();
    for base in (0..rows).step_by(kernels as usize) {
        let active = (rows - base).min(u64::from(kernels)) as u32;
        for t in 0..bn {
            chunks.push(
                (0..active)
                    .map(|i| {
                        let seg = (i + t) % bn;
                        Assignment { kernel: i, bank: seg, row: base + u64::from(i), unit: seg }
                    })
                    .collect(),
            );
        }
    }
    Ok(Schedule { kind: ScheduleKind::LayerNorm, kernels, banks: bn, rows, units_per_row: bn, steps: steps_from(chunks) })
}
