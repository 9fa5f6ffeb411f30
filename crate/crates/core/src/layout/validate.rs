use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::schedule::{Schedule, ScheduleKind};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "violation", rename_all = "snake_case")]
pub enum Violation {
    StepIndex { position: usize, found: u64 },
    KernelOutOfRange { step: u64, kernel: u32 },
    BankOutOfRange { step: u64, bank: u32 },
    DuplicateKernel { step: u64, kernel: u32 },
    BankConflict { step: u64, bank: u32 },
    /// The unit was read from a bank that does not hold it.
    Misplaced { step: u64, row: u64, unit: u32, bank: u32 },
    UnknownUnit { step: u64, row: u64, unit: u32 },
    Missing { row: u64, unit: u32 },
    Repeated { row: u64, unit: u32 },
    /// More steps than the shape requires.
    ExcessSteps { steps: u64, bound: u64 },
    /// A LayerNorm row was handled by more than one kernel.
    RowSplit { row: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "warning", rename_all = "snake_case")]
pub enum Warning {
    PartialStep { step: u64, used: u32, capacity: u32 },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub violations: Vec<Violation>,
    pub warnings: Vec<Warning>,
}

impl Verdict {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

fn home_bank(kind: ScheduleKind, unit: u32, banks: u32) -> u32 {
    match kind {
        ScheduleKind::Softmax => unit % banks,
        _ => unit,
    }
}

/// Checks bank conflicts, kernel uniqueness, placement, exact coverage,
/// step count against the shape's lower bound, and LayerNorm row affinity.
/// Partially occupied steps are reported as warnings.
pub fn validate_schedule(s: &Schedule) -> Verdict {
    let mut v = Verdict::default();
    let capacity = s.kernels.min(s.banks);
    let mut seen: HashMap<(u64, u32), u32> = HashMap::new();
    let mut row_kernels: BTreeMap<u64, HashSet<u32>> = BTreeMap::new();

    for (pos, step) in s.steps.iter().enumerate() {
        if step.index != pos as u64 {
            v.violations.push(Violation::StepIndex { position: pos, found: step.index });
        }
        let mut kernels = HashSet::new();
        let mut banks = HashSet::new();
        for a in &step.assignments {
            let t = step.index;
            if a.kernel >= s.kernels {
                v.violations.push(Violation::KernelOutOfRange { step: t, kernel: a.kernel });
            }
            if a.bank >= s.banks {
                v.violations.push(Violation::BankOutOfRange { step: t, bank: a.bank });
            }
            if !kernels.insert(a.kernel) {
                v.violations.push(Violation::DuplicateKernel { step: t, kernel: a.kernel });
            }
            if !banks.insert(a.bank) {
                v.violations.push(Violation::BankConflict { step: t, bank: a.bank });
            }
            if a.row >= s.rows || a.unit >= s.units_per_row {
                v.violations.push(Violation::UnknownUnit { step: t, row: a.row, unit: a.unit });
                continue;
            }
            if s.banks > 0 && home_bank(s.kind, a.unit, s.banks) != a.bank {
                v.violations.push(Violation::Misplaced { step: t, row: a.row, unit: a.unit, bank: a.bank });
            }
            *seen.entry((a.row, a.unit)).or_default() += 1;
            row_kernels.entry(a.row).or_default().insert(a.kernel);
        }
        let used = step.assignments.len() as u32;
        if used < capacity {
            v.warnings.push(Warning::PartialStep { step: step.index, used, capacity });
        }
    }

    for row in 0..s.rows {
        for unit in 0..s.units_per_row {
            match seen.get(&(row, unit)).copied().unwrap_or(0) {
                0 => v.violations.push(Violation::Missing { row, unit }),
                1 => {}
                _ => v.violations.push(Violation::Repeated { row, unit }),
            }
        }
    }

    let bound = s.step_lower_bound();
    if s.steps.len() as u64 > bound {
        v.violations.push(Violation::ExcessSteps { steps: s.steps.len() as u64, bound });
    }

    if s.kind == ScheduleKind::LayerNorm {
        for (row, ks) in row_kernels {
            if ks.len() > 1 {
                v.violations.push(Violation::RowSplit { row });
            }
        }
    }
    v
}
