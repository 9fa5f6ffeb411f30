mod common;

use proptest::prelude::*;
use vitdse::dse::{
    check_exhaustive_cap, compare_searches, domination_violations, enumerate_space, evaluations_to_csv,
    exhaustive_search, exhaustive_search_with, heuristic_search, heuristic_search_with, pareto_front, DseError,
    Evaluation, Latency, SearchConfig, SpaceCaps,
};
use vitdse::hw::{validate_tiles, CostModel, HardwareSpec, TileParams};
use vitdse::model::{Dag, MatMulOp, NodeId, OpKind, OpNode, Shape};

fn single_matmul(n: u64, k: u64, m: u64) -> Dag {
    Dag::new(vec![OpNode {
        id: NodeId(0),
        name: "mm".into(),
        kind: OpKind::MatMul(MatMulOp::weight(n, k, m)),
        head_scoped: false,
        heads: 1,
        inputs: vec![],
        shape: Shape::new(n, m),
    }])
    .unwrap()
}

fn toy_hw() -> HardwareSpec {
    HardwareSpec { axi_width_bits: 64, data_width_bits: 16, onchip_capacity_elems: 64, ..HardwareSpec::vu9p() }
}

/// Minimum over every integer tuple that passes `validate_tiles`, first in
/// (tm, pn, tn) order on ties.
fn brute_min(dag: &Dag, hw: &HardwareSpec, max_n: u64, max_m: u64) -> (TileParams, f64) {
    let model = CostModel::new(dag);
    let pm = hw.pm();
    let mut best: Option<(TileParams, f64)> = None;
    for tm in 1..=max_m {
        for pn in 1..=max_m {
            for tn in 1..=max_n {
                let t = TileParams::new(pn, pm, tn, tm);
                if !validate_tiles(&t, hw).is_feasible() {
                    continue;
                }
                let l = model.latency_s(&t, hw).unwrap();
                if best.is_none_or(|(_, b)| l < b) {
                    best = Some((t, l));
                }
            }
        }
    }
    best.unwrap()
}

#[test]
fn exhaustive_matches_brute_force_on_toy() {
    let dag = single_matmul(4, 8, 8);
    let hw = toy_hw();
    let space = enumerate_space(&dag, &hw, &SpaceCaps::default()).unwrap();
    let r = exhaustive_search(&dag, &hw, &space).unwrap();
    let (t, l) = brute_min(&dag, &hw, 4, 8);
    assert_eq!(r.best.tiles, t);
    assert_eq!(r.best.latency, Latency::Feasible(l));
    assert_eq!(r.evaluations_used as u64, space.size());
}

#[test]
fn exhaustive_matches_brute_force_on_random_spaces() {
    for seed in 0..6 {
        let toy = common::random_space(seed, 50, 400);
        let r = exhaustive_search(&toy.dag, &toy.hw, &toy.space).unwrap();
        let model = CostModel::new(&toy.dag);
        let min = toy
            .space
            .points()
            .map(|t| model.latency_s(&t, &toy.hw).unwrap())
            .fold(f64::INFINITY, f64::min);
        assert_eq!(r.best.latency, Latency::Feasible(min));
    }
}

#[test]
fn ties_resolve_to_loop_order() {
    let space = enumerate_space(&single_matmul(4, 8, 8), &toy_hw(), &SpaceCaps::default()).unwrap();
    let flat = |_: &TileParams| Latency::Feasible(1.0);
    let r = exhaustive_search_with(&flat, &space).unwrap();
    assert_eq!(r.best.tiles, space.points().next().unwrap());
}

#[test]
fn single_point_space() {
    let caps = SpaceCaps {
        tn_min: Some(4),
        tn_max: Some(4),
        tm_min: Some(8),
        tm_max: Some(8),
        pn_min: Some(3),
        pn_max: Some(3),
        ..SpaceCaps::default()
    };
    let dag = single_matmul(4, 8, 8);
    let space = enumerate_space(&dag, &toy_hw(), &caps).unwrap();
    let r = exhaustive_search(&dag, &toy_hw(), &space).unwrap();
    assert_eq!(r.best.tiles, TileParams::new(3, 2, 4, 8));
    assert_eq!(r.evaluations_used, 1);
}

#[test]
fn heuristic_finds_toy_optimum() {
    let dag = single_matmul(4, 8, 8);
    let hw = toy_hw();
    let space = enumerate_space(&dag, &hw, &SpaceCaps::default()).unwrap();
    let best = exhaustive_search(&dag, &hw, &space).unwrap().best.latency.seconds().unwrap();
    let hits = (0..10)
        .filter(|&seed| {
            let cfg = SearchConfig { set_size: 8, preservation_size: 2, iterations: 10, seed, ..SearchConfig::default() };
            let h = heuristic_search(&dag, &hw, &space, &cfg).unwrap();
            h.best.latency.seconds().unwrap() <= best * 1.01
        })
        .count();
    assert!(hits >= 9, "{hits}/10");
}

#[test]
fn heuristic_is_deterministic_and_monotone() {
    let toy = common::random_space(11, 1000, 5000);
    let cfg = SearchConfig { set_size: 20, preservation_size: 4, seed: 5, ..SearchConfig::default() };
    let a = heuristic_search(&toy.dag, &toy.hw, &toy.space, &cfg).unwrap();
    let b = heuristic_search(&toy.dag, &toy.hw, &toy.space, &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.history.len(), cfg.iterations + 1);
    assert!(a.history.windows(2).all(|w| w[1] <= w[0]));
    assert_eq!(*a.history.last().unwrap(), a.best.latency.seconds().unwrap());
}

#[test]
fn cache_changes_cost_not_answers() {
    let toy = common::random_space(4, 1000, 3000);
    let cfg = SearchConfig { set_size: 20, preservation_size: 4, seed: 2, ..SearchConfig::default() };
    let cached = heuristic_search(&toy.dag, &toy.hw, &toy.space, &cfg).unwrap();
    let plain =
        heuristic_search(&toy.dag, &toy.hw, &toy.space, &SearchConfig { use_cache: false, ..cfg.clone() }).unwrap();
    assert_eq!(cached.best, plain.best);
    assert_eq!(cached.history, plain.history);
    assert!(cached.evaluations_used <= plain.evaluations_used);
    // Every cached latency equals a fresh evaluation.
    let model = CostModel::new(&toy.dag);
    for e in &cached.all_evaluated {
        assert_eq!(e.latency.seconds(), model.latency_s(&e.tiles, &toy.hw));
    }
}

#[test]
fn zero_iterations_keeps_initial_best() {
    let toy = common::random_space(8, 1000, 3000);
    let cfg = SearchConfig { set_size: 10, preservation_size: 2, iterations: 0, seed: 1, ..SearchConfig::default() };
    let r = heuristic_search(&toy.dag, &toy.hw, &toy.space, &cfg).unwrap();
    assert_eq!(r.history.len(), 1);
    let min = r.all_evaluated.iter().filter_map(|e| e.latency.seconds()).fold(f64::INFINITY, f64::min);
    assert_eq!(r.best.latency.seconds(), Some(min));
}

#[test]
fn comparison_reports() {
    let toy = common::random_space(3, 1000, 3000);
    let exh = exhaustive_search(&toy.dag, &toy.hw, &toy.space).unwrap();
    let me = compare_searches(&exh, &exh, None).unwrap();
    assert_eq!(me.latency_ratio, 1.0);
    assert_eq!(me.optimality_gap, 0.0);
    assert_eq!(me.pareto_coverage, 1.0);
    assert_eq!(me.wall_clock_ratio, None);

    let degenerate =
        SearchConfig { set_size: 1, preservation_size: 1, iterations: 0, seed: 0, ..SearchConfig::default() };
    let h = heuristic_search(&toy.dag, &toy.hw, &toy.space, &degenerate).unwrap();
    assert_eq!(h.evaluations_used, 1);
    let c = compare_searches(&h, &exh, Some((1.0, 4.0))).unwrap();
    assert!((0.0..=1.0).contains(&c.pareto_coverage));
    assert!(c.latency_ratio >= 1.0);
    assert_eq!(c.wall_clock_ratio, Some(0.25));
    assert!(serde_json::to_string(&c).is_ok());

    let other = common::random_space(99, 1000, 3000);
    let o = exhaustive_search(&other.dag, &other.hw, &other.space).unwrap();
    assert!(matches!(compare_searches(&h, &o, None), Err(DseError::MismatchedSpaces { .. })));
}

#[test]
fn exhaustive_cap_guard() {
    let toy = common::random_space(1, 1000, 3000);
    let size = toy.space.size();
    assert!(matches!(check_exhaustive_cap(&toy.space, size - 1, false), Err(DseError::OverCap { .. })));
    assert!(check_exhaustive_cap(&toy.space, size - 1, true).is_ok());
    assert!(check_exhaustive_cap(&toy.space, size, false).is_ok());
}

#[test]
fn budget_is_respected() {
    let toy = common::random_space(21, 2000, 5000);
    let cap = toy.space.size() as usize / 10;
    let cfg = SearchConfig { max_evaluations: Some(cap), seed: 3, ..SearchConfig::default() };
    let r = heuristic_search(&toy.dag, &toy.hw, &toy.space, &cfg).unwrap();
    assert!(r.evaluations_used <= cap);
    assert_eq!(r.all_evaluated.iter().filter(|e| !e.from_cache).count(), r.evaluations_used);
}

#[test]
fn config_documents() {
    let cfg = SearchConfig::from_json(r#"{"set_size": 30, "preservation_size": 5, "seed": 4}"#).unwrap();
    assert_eq!((cfg.set_size, cfg.preservation_size, cfg.iterations), (30, 5, 50));
    assert!(SearchConfig::from_json(r#"{"set_size": 5, "preservation_size": 5}"#).is_err());
    assert!(SearchConfig::from_json(r#"{"mutation_bias": {"pn": 0.5, "tm": 0.5, "tn": 0.5, "restart": 0}}"#).is_err());
}

#[test]
fn csv_export_round_trips() {
    let toy = common::random_space(6, 50, 200);
    let r = exhaustive_search(&toy.dag, &toy.hw, &toy.space).unwrap();
    let mut buf = Vec::new();
    evaluations_to_csv(&r.all_evaluated, &mut buf).unwrap();
    let mut rd = csv::Reader::from_reader(buf.as_slice());
    let rows: Vec<csv::StringRecord> = rd.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), r.all_evaluated.len());
    for (row, e) in rows.iter().zip(&r.all_evaluated) {
        assert_eq!(row[0].parse::<u64>().unwrap(), e.tiles.pn);
        assert_eq!(row[5].parse::<f64>().unwrap(), e.latency.seconds().unwrap());
    }
}

fn dominated(a: (f64, u64), b: (f64, u64)) -> bool {
    b.0 <= a.0 && b.1 >= a.1 && (b.0 < a.0 || b.1 > a.1)
}

proptest! {
    #[test]
    fn pareto_front_equals_quadratic_oracle(
        raw in prop::collection::vec((1u64..20, 0u32..40, any::<bool>()), 1..120)
    ) {
        let evals: Vec<Evaluation> = raw
            .iter()
            .enumerate()
            .map(|(i, &(pn, lat, ok))| Evaluation {
                tiles: TileParams::new(pn, 2, 1 + i as u64, 64),
                latency: if ok { Latency::Feasible(f64::from(lat)) } else { Latency::Infeasible },
                from_cache: false,
            })
            .collect();
        let front = pareto_front(&evals);
        prop_assert!(domination_violations(&front).is_empty());
        let objs: Vec<(f64, u64, TileParams)> = evals
            .iter()
            .filter_map(|e| e.latency.seconds().map(|l| (l, e.tiles.parallelism(), e.tiles)))
            .collect();
        let mut expected: Vec<TileParams> = objs
            .iter()
            .filter(|a| !objs.iter().any(|b| dominated((a.0, a.1), (b.0, b.1))))
            .map(|a| a.2)
            .collect();
        let mut got: Vec<TileParams> = front.iter().flat_map(|p| p.tiles.iter().copied()).collect();
        expected.sort();
        got.sort();
        prop_assert_eq!(got, expected);
        prop_assert!(front.windows(2).all(|w| w[0].latency_s < w[1].latency_s));
    }

    #[test]
    fn heuristic_results_are_feasible(seed in 0u64..1000) {
        let toy = common::random_space(seed % 7, 100, 600);
        let cfg = SearchConfig { set_size: 6, preservation_size: 2, iterations: 5, seed, ..SearchConfig::default() };
        let r = heuristic_search_with(
            &|t: &TileParams| {
                assert!(toy.space.points().any(|p| p == *t));
                Latency::Feasible((t.tn * 1000 + t.tm) as f64)
            },
            &toy.space,
            &cfg,
        )
        .unwrap();
        prop_assert!(r.best.latency.is_feasible());
    }
}
