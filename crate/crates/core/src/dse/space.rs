use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::DseError;
use crate::hw::{CostModel, HardwareSpec, TileParams};
use crate::model::Dag;

/// Optional narrowing of the enumerated ranges.
///
/// Steps coarsen the grids: `T_n` takes multiples of `tn_step`, `T_m` takes
/// multiples of `tm_step` (rounded up to a multiple of `P_m`).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpaceCaps {
    pub tn_step: Option<u64>,
    pub tm_step: Option<u64>,
    pub tn_min: Option<u64>,
    pub tn_max: Option<u64>,
    pub tm_min: Option<u64>,
    pub tm_max: Option<u64>,
    pub pn_min: Option<u64>,
    pub pn_max: Option<u64>,
}

/// Candidate values for each searched parameter; `P_m` is fixed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub tn_range: Vec<u64>,
    pub tm_range: Vec<u64>,
    pub pn_range: Vec<u64>,
    pub pm: u64,
    /// On-chip capacity `S` the ranges were filtered against.
    pub capacity: u64,
}

/// Index triple into the ranges of a [`SearchSpace`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub(crate) struct Point {
    pub tm: usize,
    pub pn: usize,
    pub tn: usize,
}

fn stepped(lo: u64, hi: u64, step: u64) -> Vec<u64> {
    let step = step.max(1);
    let first = lo.max(1).div_ceil(step) * step;
    (first..=hi).step_by(step as usize).collect()
}

/// Builds the candidate ranges for `dag` on `hw`.
///
/// `T_n` runs up to `min(max n, S / P_m)`, `T_m` over multiples of `P_m` up to
/// `min(max m, S)`, and `P_n` up to `max T_m / P_m - 1`.
pub fn enumerate_space(dag: &Dag, hw: &HardwareSpec, caps: &SpaceCaps) -> Result<SearchSpace, DseError> {
    hw.validate().map_err(|e| DseError::InvalidInput(e.to_string()))?;
    let pm = hw.pm();
    let s = hw.onchip_capacity_elems;
    let (max_n, max_m) = CostModel::new(dag).max_matmul_dims();
    if max_n == 0 {
        return Err(DseError::EmptySpace);
    }

    let tn_hi = caps.tn_max.map_or(u64::MAX, |c| c).min(max_n).min(s / pm);
    let tn_range = stepped(caps.tn_min.unwrap_or(1), tn_hi, caps.tn_step.unwrap_or(1));

    let tm_step = caps.tm_step.unwrap_or(pm).max(1).div_ceil(pm) * pm;
    let tm_hi = caps.tm_max.map_or(u64::MAX, |c| c).min(max_m).min(s);
    let tm_range = stepped(caps.tm_min.unwrap_or(pm), tm_hi, tm_step);

    let pn_hi = tm_range.last().map_or(0, |&tm| (tm / pm).saturating_sub(1));
    let pn_hi = caps.pn_max.map_or(pn_hi, |c| c.min(pn_hi));
    let pn_range = stepped(caps.pn_min.unwrap_or(1), pn_hi, 1);

    let space = SearchSpace { tn_range, tm_range, pn_range, pm, capacity: s };
    if space.size() == 0 {
        return Err(DseError::EmptySpace);
    }
    Ok(space)
}

impl SearchSpace {
    pub(crate) fn tiles(&self, p: Point) -> TileParams {
        TileParams::new(self.pn_range[p.pn], self.pm, self.tn_range[p.tn], self.tm_range[p.tm])
    }

    /// Count of feasible `P_n` values for `T_m` (a prefix of the sorted range).
    fn pn_prefix(&self, tm: u64) -> usize {
        self.pn_range.partition_point(|&pn| pn * self.pm < tm)
    }

    /// Count of feasible `T_n` values for `T_m` (a prefix of the sorted range).
    fn tn_prefix(&self, tm: u64) -> usize {
        self.tn_range.partition_point(|&tn| u128::from(tn) * u128::from(tm) <= u128::from(self.capacity))
    }

    pub(crate) fn feasible(&self, p: Point) -> bool {
        let tm = self.tm_range[p.tm];
        p.pn < self.pn_prefix(tm) && p.tn < self.tn_prefix(tm)
    }

    /// Clamps `P_n` and `T_n` to the largest values feasible for the point's `T_m`.
    pub(crate) fn project(&self, mut p: Point) -> Point {
        let tm = self.tm_range[p.tm];
        let (pns, tns) = (self.pn_prefix(tm), self.tn_prefix(tm));
        if pns > 0 && tns > 0 {
            p.pn = p.pn.min(pns - 1);
            p.tn = p.tn.min(tns - 1);
        }
        p
    }

    /// Moves to another `T_m`, keeping `P_n` at the same relative position
    /// below its bound.
    pub(crate) fn with_tm(&self, p: Point, tm: usize) -> Point {
        let old = self.pn_prefix(self.tm_range[p.tm]).max(1);
        let new = self.pn_prefix(self.tm_range[tm]);
        let pn = ((p.pn + 1) * new).div_ceil(old).max(1) - 1;
        self.project(Point { tm, pn, ..p })
    }

    /// Number of feasible points.
    pub fn size(&self) -> u64 {
        self.tm_range
            .iter()
            .map(|&tm| self.pn_prefix(tm) as u64 * self.tn_prefix(tm) as u64)
            .sum()
    }

    /// Feasible points with `T_m` outermost, then `P_n`, then `T_n`.
    pub fn points(&self) -> impl Iterator<Item = TileParams> + '_ {
        self.tm_range.iter().flat_map(move |&tm| {
            let pns = &self.pn_range[..self.pn_prefix(tm)];
            let tns = &self.tn_range[..self.tn_prefix(tm)];
            pns.iter().flat_map(move |&pn| tns.iter().map(move |&tn| TileParams::new(pn, self.pm, tn, tm)))
        })
    }

    /// Uniform draw over feasible points.
    pub(crate) fn random_point<R: Rng>(&self, rng: &mut R) -> Point {
        let total = self.size();
        debug_assert!(total > 0);
        let mut pick = rng.gen_range(0..total);
        for (i, &tm) in self.tm_range.iter().enumerate() {
            let (pns, tns) = (self.pn_prefix(tm) as u64, self.tn_prefix(tm) as u64);
            let block = pns * tns;
            if pick < block {
                return Point { tm: i, pn: (pick / tns) as usize, tn: (pick % tns) as usize };
            }
            pick -= block;
        }
        unreachable!("pick is below the feasible count")
    }

    /// Stable identifier of the ranges, used to check two results share a space.
    pub fn fingerprint(&self) -> String {
        let doc = serde_json::to_vec(self).expect("space serializes");
        hex::encode(&Sha256::digest(&doc)[..8])
    }
}
