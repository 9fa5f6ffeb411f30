//! Analytical latency of MatMuls and whole graphs under one tile configuration.
//!
//! A MatMul `A (n x k) * B (k x m)` is cut into `ceil(n/T_n) x ceil(m/T_m)`
//! tiles; each tile costs `T_n * T_m * k` multiply-accumulates regardless of
//! padding. Work is spread over `P_n` PEs of `P_m` compute units each and
//! scaled by a kernel factor: `ceil(heads/kernels)` for head-scoped products,
//! `1/kernels` otherwise. Cycle counts stay exact rationals; seconds are only
//! produced at the boundary.

use std::fmt;

use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use super::{HardwareSpec, HwError};
use crate::model::{Dag, OpKind, OpTag};

pub type Cycles = Ratio<u128>;

/// The searched point: PE count, compute units per PE, and tile sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TileParams {
    pub pn: u64,
    pub pm: u64,
    pub tn: u64,
    pub tm: u64,
}

impl TileParams {
    pub fn new(pn: u64, pm: u64, tn: u64, tm: u64) -> Self {
        Self { pn, pm, tn, tm }
    }

    /// `P_n * P_m`, the number of MAC units in one kernel.
    pub fn parallelism(&self) -> u64 {
        self.pn * self.pm
    }
}

impl fmt::Display for TileParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(pn={}, pm={}, tn={}, tm={})", self.pn, self.pm, self.tn, self.tm)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MatMulDims {
    pub n: u64,
    pub k: u64,
    pub m: u64,
}

impl MatMulDims {
    pub fn new(n: u64, k: u64, m: u64) -> Self {
        Self { n, k, m }
    }
}

/// `floor(AXI_WIDTH / (2 * DW))`.
pub fn compute_pm(axi_width_bits: u32, data_width_bits: u32) -> Result<u64, HwError> {
    if data_width_bits == 0 || u64::from(axi_width_bits) < 2 * u64::from(data_width_bits) {
        return Err(HwError::AxiTooNarrow { axi: axi_width_bits, dw: data_width_bits });
    }
    Ok(u64::from(axi_width_bits) / (2 * u64::from(data_width_bits)))
}

pub fn kernel_factor(num_heads: u64, num_kernels: u64, head_flag: bool) -> Ratio<u64> {
    let kernels = num_kernels.max(1);
    if head_flag {
        Ratio::from_integer(num_heads.div_ceil(kernels))
    } else {
        Ratio::new(1, kernels)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "violation", rename_all = "snake_case")]
pub enum TileViolation {
    ZeroParameter,
    PmMismatch { expected: u64, found: u64 },
    /// `P_n < T_m / P_m` does not hold.
    PnTooLarge { pn: u64, pm: u64, tm: u64 },
    TmNotMultipleOfPm { tm: u64, pm: u64 },
    /// `T_n * T_m` exceeds on-chip capacity.
    CapacityExceeded { working_set: u128, capacity: u64 },
    Resource { name: String, detail: String },
}

impl fmt::Display for TileViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TileViolation::ZeroParameter => write!(f, "all tile parameters must be positive"),
            TileViolation::PmMismatch { expected, found } => {
                write!(f, "pm={found} but the AXI word fixes pm={expected}")
            }
            TileViolation::PnTooLarge { pn, pm, tm } => write!(f, "pn={pn} is not below tm/pm={tm}/{pm}"),
            TileViolation::TmNotMultipleOfPm { tm, pm } => write!(f, "tm={tm} is not a multiple of pm={pm}"),
            TileViolation::CapacityExceeded { working_set, capacity } => {
                write!(f, "tn*tm={working_set} exceeds on-chip capacity {capacity}")
            }
            TileViolation::Resource { name, detail } => write!(f, "resource `{name}`: {detail}"),
        }
    }
}

/// Outcome of [`validate_tiles`]; feasible iff no violations were found.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct Feasibility {
    pub violations: Vec<TileViolation>,
}

impl Feasibility {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Extra resource checks (DSP/BRAM budgets) layered on the tiling constraints.
pub trait ResourcePredicate: Send + Sync {
    fn check(&self, tiles: &TileParams, hw: &HardwareSpec) -> Vec<TileViolation>;
}

/// Accepts every configuration.
#[derive(Debug, Clone, Copy, Default)]
pub struct Unchecked;

impl ResourcePredicate for Unchecked {
    fn check(&self, _: &TileParams, _: &HardwareSpec) -> Vec<TileViolation> {
        Vec::new()
    }
}

pub fn validate_tiles(tiles: &TileParams, hw: &HardwareSpec) -> Feasibility {
    validate_tiles_with(tiles, hw, &Unchecked)
}

pub fn validate_tiles_with(tiles: &TileParams, hw: &HardwareSpec, resources: &dyn ResourcePredicate) -> Feasibility {
    let TileParams { pn, pm, tn, tm } = *tiles;
    if pn == 0 || pm == 0 || tn == 0 || tm == 0 {
        return Feasibility { violations: vec![TileViolation::ZeroParameter] };
    }
    let mut violations = Vec::new();
    if let Ok(expected) = compute_pm(hw.axi_width_bits, hw.data_width_bits) {
        if expected != pm {
            violations.push(TileViolation::PmMismatch { expected, found: pm });
        }
    }
    // pn < tm / pm over the rationals
    if u128::from(pn) * u128::from(pm) >= u128::from(tm) {
        violations.push(TileViolation::PnTooLarge { pn, pm, tm });
    }
    if tm % pm != 0 {
        violations.push(TileViolation::TmNotMultipleOfPm { tm, pm });
    }
    let working_set = u128::from(tn) * u128::from(tm);
    if working_set > u128::from(hw.onchip_capacity_elems) {
        violations.push(TileViolation::CapacityExceeded { working_set, capacity: hw.onchip_capacity_elems });
    }
    violations.extend(resources.check(tiles, hw));
    Feasibility { violations }
}

/// Per-MatMul terms of the latency model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub ops_per_tile: u128,
    pub num_tiles_row: u64,
    pub num_tiles_col: u64,
    pub total_ops: u128,
    pub kernel_factor: Ratio<u64>,
    pub adjusted_cycles: Cycles,
    pub latency_s: f64,
}

pub(crate) fn cycles_to_seconds(cycles: &Cycles, frequency_hz: f64) -> f64 {
    cycles.to_f64().expect("cycle counts are finite") / frequency_hz
}

fn widen(r: Ratio<u64>) -> Cycles {
    Ratio::new_raw(u128::from(*r.numer()), u128::from(*r.denom()))
}

/// Latency of one MatMul; infeasible tiles are rejected so callers can prune.
pub fn matmul_cost(
    dims: MatMulDims,
    tiles: &TileParams,
    hw: &HardwareSpec,
    head_flag: bool,
    num_heads: u64,
) -> Result<CostBreakdown, HwError> {
    let feasibility = validate_tiles(tiles, hw);
    if !feasibility.is_feasible() {
        return Err(HwError::Infeasible(feasibility.violations));
    }
    if dims.n == 0 || dims.k == 0 || dims.m == 0 {
        return Err(HwError::Invalid { field: "dims", reason: "MatMul dimensions must be positive".into() });
    }
    Ok(matmul_cost_unchecked(dims, tiles, u64::from(hw.num_kernels), hw.frequency_hz, head_flag, num_heads))
}

/// The latency formula alone, without feasibility checks. Tile parameters must be positive.
pub fn matmul_cost_unchecked(
    dims: MatMulDims,
    tiles: &TileParams,
    num_kernels: u64,
    frequency_hz: f64,
    head_flag: bool,
    num_heads: u64,
) -> CostBreakdown {
    let ops_per_tile = u128::from(tiles.tn) * u128::from(tiles.tm) * u128::from(dims.k);
    let num_tiles_row = dims.n.div_ceil(tiles.tn);
    let num_tiles_col = dims.m.div_ceil(tiles.tm);
    let total_ops = ops_per_tile * u128::from(num_tiles_row) * u128::from(num_tiles_col);
    let kf = kernel_factor(num_heads, num_kernels, head_flag);
    let adjusted_cycles = Ratio::new(total_ops, u128::from(tiles.pn) * u128::from(tiles.pm)) * widen(kf);
    let latency_s = cycles_to_seconds(&adjusted_cycles, frequency_hz);
    CostBreakdown {
        ops_per_tile,
        num_tiles_row,
        num_tiles_col,
        total_ops,
        kernel_factor: kf,
        adjusted_cycles,
        latency_s,
    }
}

/// Cycles of an element-wise/row-wise unit: `ceil(elements / (LoP * kernels))`.
pub fn nonlinear_cycles(elements: u64, hw: &HardwareSpec) -> u64 {
    let lanes = u64::from(hw.lop) * u64::from(hw.num_kernels);
    elements.div_ceil(lanes.max(1))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeCost {
    pub id: usize,
    pub name: String,
    pub kind: OpTag,
    pub cycles: Cycles,
    pub latency_s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matmul: Option<CostBreakdown>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphLatency {
    pub total_cycles: Cycles,
    pub latency_s: f64,
    pub matmul_cycles: Cycles,
    pub nodes: Vec<NodeCost>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum GraphCost {
    Feasible(GraphLatency),
    Infeasible { violations: Vec<TileViolation> },
}

impl GraphCost {
    pub fn latency_s(&self) -> Option<f64> {
        match self {
            GraphCost::Feasible(g) => Some(g.latency_s),
            GraphCost::Infeasible { .. } => None,
        }
    }
}

#[derive(Debug, Clone)]
enum Work {
    MatMul { dims: MatMulDims, heads: u64, head_flag: bool },
    Elementwise { elements: u64 },
    Free,
}

#[derive(Debug, Clone)]
struct WorkItem {
    id: usize,
    name: String,
    kind: OpTag,
    work: Work,
}

/// A DAG flattened to the quantities the latency model needs, so a search can
/// evaluate many configurations without re-walking the graph.
#[derive(Debug, Clone)]
pub struct CostModel {
    items: Vec<WorkItem>,
}

impl CostModel {
    pub fn new(dag: &Dag) -> Self {
        let items = dag
            .nodes()
            .iter()
            .map(|node| {
                let work = match &node.kind {
                    OpKind::MatMul(mm) => Work::MatMul {
                        dims: MatMulDims::new(mm.n, mm.k, mm.m),
                        heads: node.heads,
                        head_flag: node.head_scoped,
                    },
                    OpKind::LayerNorm | OpKind::Softmax | OpKind::Gelu | OpKind::Add => {
                        Work::Elementwise { elements: node.shape.elements() }
                    }
                    OpKind::Split { .. } | OpKind::Concat => Work::Free,
                };
                WorkItem { id: node.id.0, name: node.name.clone(), kind: node.kind.tag(), work }
            })
            .collect();
        Self { items }
    }

    /// Largest `n` and `m` over all MatMuls.
    pub fn max_matmul_dims(&self) -> (u64, u64) {
        self.items.iter().fold((0, 0), |(n, m), item| match item.work {
            Work::MatMul { dims, .. } => (n.max(dims.n), m.max(dims.m)),
            _ => (n, m),
        })
    }

    pub fn evaluate(&self, tiles: &TileParams, hw: &HardwareSpec) -> GraphCost {
        let feasibility = validate_tiles(tiles, hw);
        if !feasibility.is_feasible() {
            return GraphCost::Infeasible { violations: feasibility.violations };
        }
        let mut nodes = Vec::with_capacity(self.items.len());
        let mut total = Cycles::zero();
        let mut matmul_total = Cycles::zero();
        for item in &self.items {
            let (cycles, matmul) = match item.work {
                Work::MatMul { dims, heads, head_flag } => {
                    let b = match matmul_cost(dims, tiles, hw, head_flag, heads) {
                        Ok(b) => b,
                        Err(HwError::Infeasible(violations)) => return GraphCost::Infeasible { violations },
                        Err(_) => unreachable!("dims come from a validated Dag"),
                    };
                    matmul_total += b.adjusted_cycles;
                    (b.adjusted_cycles, Some(b))
                }
                Work::Elementwise { elements } => {
                    (Cycles::from_integer(u128::from(nonlinear_cycles(elements, hw))), None)
                }
                Work::Free => (Cycles::zero(), None),
            };
            total += cycles;
            nodes.push(NodeCost {
                id: item.id,
                name: item.name.clone(),
                kind: item.kind,
                latency_s: cycles_to_seconds(&cycles, hw.frequency_hz),
                cycles,
                matmul,
            });
        }
        GraphCost::Feasible(GraphLatency {
            latency_s: cycles_to_seconds(&total, hw.frequency_hz),
            total_cycles: total,
            matmul_cycles: matmul_total,
            nodes,
        })
    }

    /// Total cycles without the per-node breakdown; `None` when infeasible.
    ///
    /// Every MatMul term shares the denominator `kernels * P_n * P_m`, so the
    /// sum is accumulated as one integer numerator.
    pub fn total_cycles(&self, tiles: &TileParams, hw: &HardwareSpec) -> Option<Cycles> {
        if !validate_tiles(tiles, hw).is_feasible() {
            return None;
        }
        let kernels = u128::from(hw.num_kernels);
        let mut numer: u128 = 0;
        let mut elementwise: u128 = 0;
        for item in &self.items {
            match item.work {
                Work::MatMul { dims, heads, head_flag } => {
                    let ops = u128::from(tiles.tn)
                        * u128::from(tiles.tm)
                        * u128::from(dims.k)
                        * u128::from(dims.n.div_ceil(tiles.tn))
                        * u128::from(dims.m.div_ceil(tiles.tm));
                    let scale = if head_flag { u128::from(heads).div_ceil(kernels) * kernels } else { 1 };
                    numer += ops * scale;
                }
                Work::Elementwise { elements } => elementwise += u128::from(nonlinear_cycles(elements, hw)),
                Work::Free => {}
            }
        }
        let denom = kernels * u128::from(tiles.pn) * u128::from(tiles.pm);
        Some(Ratio::new(numer, denom) + Cycles::from_integer(elementwise))
    }

    pub fn latency_s(&self, tiles: &TileParams, hw: &HardwareSpec) -> Option<f64> {
        self.total_cycles(tiles, hw).map(|c| cycles_to_seconds(&c, hw.frequency_hz))
    }
}

/// Sum of per-node latencies of `dag` under `tiles`.
pub fn graph_latency(dag: &Dag, tiles: &TileParams, hw: &HardwareSpec) -> GraphCost {
    CostModel::new(dag).evaluate(tiles, hw)
}
