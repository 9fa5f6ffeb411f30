use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::bank::{partition_banks, BankLayout};
use super::schedule::{schedule_gelu, schedule_layernorm, schedule_row_parallel, schedule_softmax, Schedule};
use super::validate::validate_schedule;
use super::LayoutError;
use crate::hw::HardwareSpec;
use crate::model::{Dag, OpKind, OpNode, OpTag};

/// How an operation's output is laid out across banks, which fixes its schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayoutChoice {
    /// Column split; kernels sweep segments of a row in parallel.
    ColumnBanked,
    /// Heads interleaved over banks; softmax rounds.
    HeadBanked,
    /// Column split with the rotating LayerNorm order.
    Rotating,
    /// Not scheduled on the bank fabric (pure data movement).
    Passthrough,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct LayoutConfig {
    pub choices: BTreeMap<OpTag, LayoutChoice>,
    /// Kernels sharing the banks; defaults to `min(num_kernels, ddr_banks)`.
    pub kernels: Option<u32>,
    pub strict_layernorm: bool,
}

impl Default for LayoutConfig {
    fn default() -> Self {
        let choices = BTreeMap::from([
            (OpTag::MatMul, LayoutChoice::ColumnBanked),
            (OpTag::Gelu, LayoutChoice::ColumnBanked),
            (OpTag::Add, LayoutChoice::ColumnBanked),
            (OpTag::Softmax, LayoutChoice::HeadBanked),
            (OpTag::LayerNorm, LayoutChoice::Rotating),
            (OpTag::Split, LayoutChoice::Passthrough),
            (OpTag::Concat, LayoutChoice::Passthrough),
        ]);
        Self { choices, kernels: None, strict_layernorm: false }
    }
}

impl LayoutConfig {
    pub fn choice(&self, tag: OpTag) -> LayoutChoice {
        self.choices.get(&tag).copied().unwrap_or(LayoutChoice::ColumnBanked)
    }

    fn kernels(&self, hw: &HardwareSpec) -> u32 {
        self.kernels.unwrap_or(hw.num_kernels.min(hw.ddr_banks))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodePlan {
    pub node: String,
    pub kind: OpTag,
    pub choice: LayoutChoice,
    pub layout: Option<BankLayout>,
    pub steps: u64,
    pub step_lower_bound: u64,
    pub partial_steps: usize,
}

/// Builds the schedule for one node under `choice`, or `None` for pass-through.
pub fn schedule_node(
    node: &OpNode,
    choice: LayoutChoice,
    hw: &HardwareSpec,
    cfg: &LayoutConfig,
) -> Result<Option<Schedule>, LayoutError> {
    let rows = node.shape.rows;
    let (bn, k) = (hw.ddr_banks, cfg.kernels(hw));
    let s = match choice {
        LayoutChoice::Passthrough => return Ok(None),
        LayoutChoice::ColumnBanked if matches!(node.kind, OpKind::Gelu) => schedule_gelu(rows, bn, k)?,
        LayoutChoice::ColumnBanked => schedule_row_parallel(rows, bn, k)?,
        LayoutChoice::HeadBanked => {
            let heads = u32::try_from(node.heads).map_err(|_| LayoutError::Zero("num_heads"))?;
            schedule_softmax(heads, bn, rows, k)?
        }
        LayoutChoice::Rotating => schedule_layernorm(rows, bn, k, cfg.strict_layernorm)?,
    };
    Ok(Some(s))
}

/// Layout and schedule summary for every node, validated as it goes.
pub fn plan_layouts(dag: &Dag, hw: &HardwareSpec, cfg: &LayoutConfig) -> Result<Vec<NodePlan>, LayoutError> {
    let pack = hw.pm();
    dag.nodes()
        .iter()
        .map(|node| {
            let tag = node.kind.tag();
            let choice = cfg.choice(tag);
            let layout = match choice {
                LayoutChoice::Passthrough => None,
                _ if node.shape.cols < u64::from(hw.ddr_banks) => None,
                _ => Some(partition_banks(node.shape.rows, node.shape.cols, hw.ddr_banks, pack)?),
            };
            let (steps, step_lower_bound, partial_steps) = match schedule_node(node, choice, hw, cfg)? {
                None => (0, 0, 0),
                Some(s) => {
                    let verdict = validate_schedule(&s);
                    if !verdict.is_clean() {
                        return Err(LayoutError::InvalidSchedule { node: node.name.clone(), violations: verdict.violations });
                    }
                    (s.steps.len() as u64, s.step_lower_bound(), verdict.warnings.len())
                }
            };
            Ok(NodePlan { node: node.name.clone(), kind: tag, choice, layout, steps, step_lower_bound, partial_steps })
        })
        .collect()
}
