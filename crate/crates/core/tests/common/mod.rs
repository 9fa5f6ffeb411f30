#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vitdse::dse::{enumerate_space, SearchSpace, SpaceCaps};
use vitdse::hw::HardwareSpec;
use vitdse::layout::{
    schedule_gelu, schedule_layernorm, schedule_row_parallel, schedule_softmax, Schedule, ScheduleStep,
};
use vitdse::model::{build_dag, Dag, ModelSpec};

pub struct ToySpace {
    pub dag: Dag,
    pub hw: HardwareSpec,
    pub space: SearchSpace,
}

/// Random small encoder on random hardware, with caps adjusted until the
/// feasible space lands in `[lo, hi]` points.
pub fn random_space(seed: u64, lo: u64, hi: u64) -> ToySpace {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let heads = [1u64, 2, 4][rng.gen_range(0..3)];
        let d = heads * [8u64, 16, 24, 32][rng.gen_range(0..4)];
        let mut model = ModelSpec::new("toy", d, heads, rng.gen_range(1..=2), rng.gen_range(8..=96));
        model.patch_pixels = [48u64, 192][rng.gen_range(0..2)];
        model.num_classes = rng.gen_range(10..=200);
        let dag = build_dag(&model).expect("toy model is valid");
        let hw = HardwareSpec {
            axi_width_bits: [64, 128, 256][rng.gen_range(0..3)],
            onchip_capacity_elems: rng.gen_range(256..=8192),
            num_kernels: [1, 2, 4, 8][rng.gen_range(0..4)],
            ..HardwareSpec::vu9p()
        };
        let caps = SpaceCaps {
            tn_step: Some(rng.gen_range(1..=4)),
            tm_step: Some(hw.pm() * rng.gen_range(1..=3)),
            ..SpaceCaps::default()
        };
        let Ok(space) = enumerate_space(&dag, &hw, &caps) else { continue };
        if (lo..=hi).contains(&space.size()) {
            return ToySpace { dag, hw, space };
        }
    }
}

/// One of the four generators with random shape parameters.
pub fn random_schedule(rng: &mut ChaCha8Rng) -> Schedule {
    let bn = rng.gen_range(1..=8u32);
    let rows = rng.gen_range(1..=40u64);
    let kernels = rng.gen_range(1..=bn);
    match rng.gen_range(0..4) {
        0 => schedule_row_parallel(rows, bn, kernels).unwrap(),
        1 => schedule_gelu(rows, bn, kernels).unwrap(),
        2 => schedule_softmax(rng.gen_range(1..=16), bn, rows, rng.gen_range(1..=8)).unwrap(),
        _ => schedule_layernorm(rows, bn, kernels, false).unwrap(),
    }
}

/// Corrupted copies of `s`, each breaking one rule. Faults that need more
/// than one kernel or bank are skipped when the shape cannot express them.
pub fn planted_faults(s: &Schedule) -> Vec<(&'static str, Schedule)> {
    let mut out = Vec::new();
    let multi = s.steps.iter().position(|st| st.assignments.len() >= 2);

    let mut dropped = s.clone();
    dropped.steps.last_mut().unwrap().assignments.pop();
    out.push(("missing unit", dropped));

    let mut repeated = s.clone();
    let first = repeated.steps[0].assignments[0];
    repeated.steps.push(ScheduleStep { index: repeated.steps.len() as u64, assignments: vec![first] });
    out.push(("repeated unit", repeated));

    let mut renumbered = s.clone();
    renumbered.steps[0].index = 7;
    out.push(("step index", renumbered));

    let mut stray = s.clone();
    stray.steps[0].assignments[0].kernel = s.kernels;
    out.push(("kernel out of range", stray));

    if s.banks > 1 {
        let mut misplaced = s.clone();
        let a = &mut misplaced.steps[0].assignments[0];
        a.bank = (a.bank + 1) % s.banks;
        out.push(("misplaced read", misplaced));
    }
    if let Some(t) = multi {
        let mut conflict = s.clone();
        let b0 = conflict.steps[t].assignments[0].bank;
        conflict.steps[t].assignments[1].bank = b0;
        out.push(("bank conflict", conflict));

        let mut dup = s.clone();
        let k0 = dup.steps[t].assignments[0].kernel;
        dup.steps[t].assignments[1].kernel = k0;
        out.push(("duplicate kernel", dup));

        let mut spread = s.clone();
        let moved = spread.steps[t].assignments.pop().unwrap();
        let at = spread.steps.len() as u64;
        spread.steps.push(ScheduleStep { index: at, assignments: vec![moved] });
        out.push(("excess steps", spread));
    }
    out
}
