use std::collections::HashMap;

use proptest::prelude::*;
use vitdse::hw::HardwareSpec;
use vitdse::model::{
    analyze, batch_expand, build_dag, fuse_qkv, parse_model, split_heads, topo_schedule, Dag, ModelError, ModelSpec,
    OpKind, OpTag,
};

fn deit(d: u64, h: u64) -> ModelSpec {
    ModelSpec::new("deit", d, h, 12, 197)
}

#[test]
fn deit_base_parameter_count() {
    let spec = parse_model(
        r#"{"schema_version":1,"name":"deit-b","embed_dim":768,"num_heads":12,"num_layers":12,
            "num_tokens":197,"mlp_ratio":4.0}"#,
    )
    .unwrap();
    let dag = build_dag(&spec).unwrap();
    // Host-side tensors not present as graph weights: positional table,
    // class token and the final norm.
    let host = 197 * 768 + 768 + 2 * 768;
    assert_eq!(dag.weight_parameters() + host, 86_567_656);
}

#[test]
fn rejects_bad_documents() {
    let bad = [
        (r#"{"schema_version":1,"name":"x","embed_dim":10,"num_heads":3,"num_layers":1,"num_tokens":2,"mlp_ratio":4.0}"#, "divis"),
        (r#"{"schema_version":1,"name":"x","embed_dim":8,"num_heads":2,"num_layers":0,"num_tokens":2,"mlp_ratio":4.0}"#, "num_layers"),
        (r#"{"schema_version":2,"name":"x","embed_dim":8,"num_heads":2,"num_layers":1,"num_tokens":2,"mlp_ratio":4.0}"#, "schema_version"),
        (r#"{"schema_version":1,"name":"x","embed_dim":8,"num_heads":2,"num_layers":1,"num_tokens":2,"mlp_ratio":4.0,"extra":1}"#, "unknown field"),
        (r#"{"schema_version":1,"name":"x","embed_dim":8"#, "malformed"),
    ];
    for (doc, needle) in bad {
        let err = parse_model(doc).unwrap_err().to_string();
        assert!(err.contains(needle), "{err} lacks {needle}");
    }
    assert!(matches!(
        parse_model(r#"{"schema_version":1,"name":"x","embed_dim":10,"num_heads":3,"num_layers":1,"num_tokens":2,"mlp_ratio":4.0}"#),
        Err(ModelError::HeadDivisibility { embed_dim: 10, num_heads: 3 })
    ));
}

#[test]
fn minimal_model_builds() {
    let spec = ModelSpec::new("min", 4, 1, 1, 2);
    let dag = build_dag(&spec).unwrap();
    let report = analyze(&dag);
    let hand: u128 = dag.matmuls().map(|(n, mm)| u128::from(mm.n * mm.k * mm.m * n.heads)).sum();
    assert_eq!(report.total_macs, hand);
    assert_eq!(report.softmax_groups, 1);
}

#[test]
fn layers_replicate_the_block() {
    let one = build_dag(&ModelSpec::new("b", 768, 12, 1, 197)).unwrap().kind_histogram();
    let twelve = build_dag(&deit(768, 12)).unwrap().kind_histogram();
    for tag in OpTag::ALL {
        let per_layer = one.get(&tag).copied().unwrap_or(0) - usize::from(tag == OpTag::MatMul) * 2;
        let fixed = usize::from(tag == OpTag::MatMul) * 2; // patch embed + classifier
        assert_eq!(twelve.get(&tag).copied().unwrap_or(0), 12 * per_layer + fixed, "{tag}");
    }
    assert_eq!(analyze(&build_dag(&deit(768, 12)).unwrap()).softmax_groups, 12);
}

#[test]
fn deit_tiny_softmax_follows_its_product() {
    let dag = build_dag(&deit(192, 3)).unwrap();
    let order = topo_schedule(&dag).unwrap();
    let pos: HashMap<_, _> = order.iter().enumerate().map(|(i, id)| (*id, i)).collect();
    for node in dag.nodes().iter().filter(|n| n.kind.tag() == OpTag::Softmax) {
        let producer = node.inputs[0].node;
        assert!(dag.node(producer).head_scoped);
        assert!(pos[&producer] < pos[&node.id]);
    }
}

#[test]
fn qkv_fusion_on_deit_small() {
    let dag = build_dag(&deit(384, 6)).unwrap();
    let out = fuse_qkv(&dag, &HardwareSpec::vu9p()).unwrap();
    assert_eq!(out.fused, 12);
    let qkv = out.dag.find("l5.qkv").unwrap().kind.as_matmul().copied().unwrap();
    assert_eq!((qkv.k, qkv.m), (384, 1152));
    assert_eq!(out.dag.total_macs(), dag.total_macs());

    let again = fuse_qkv(&out.dag, &HardwareSpec::vu9p()).unwrap();
    assert_eq!(again.fused, 0);
    assert_eq!(again.dag, out.dag);

    let tiny = HardwareSpec { onchip_capacity_elems: 1024, ..HardwareSpec::vu9p() };
    let closed = fuse_qkv(&dag, &tiny).unwrap();
    assert_eq!(closed.fused, 0);
    assert_eq!(closed.dag, dag);
    assert!(!closed.diagnostics.is_empty());
}

#[test]
fn batching_deit_tiny() {
    let dag = build_dag(&deit(192, 3)).unwrap();
    assert_eq!(batch_expand(&dag, 1).unwrap(), dag);
    let two = batch_expand(&dag, 2).unwrap();
    assert_eq!(two.find("l0.q").unwrap().kind.as_matmul().unwrap().n, 394);
    assert!(batch_expand(&dag, 0).is_err());
}

fn arb_spec() -> impl Strategy<Value = ModelSpec> {
    (prop::sample::select(vec![1u64, 2, 3, 4]), 1u64..8, 1u64..3, 2u64..24, 1u64..3).prop_map(
        |(h, mult, layers, tokens, batch)| {
            let mut s = ModelSpec::new("p", h * mult * 2, h, layers, tokens);
            s.patch_pixels = 12;
            s.num_classes = 7;
            s.batch = batch;
            s
        },
    )
}

fn check_topo(dag: &Dag) {
    let order = topo_schedule(dag).unwrap();
    assert_eq!(order.len(), dag.len());
    let pos: HashMap<_, _> = order.iter().enumerate().map(|(i, id)| (*id, i)).collect();
    for (from, to) in dag.edges() {
        assert!(pos[&from] < pos[&to]);
    }
}

proptest! {
    #[test]
    fn rewrites_preserve_macs(spec in arb_spec(), b in 1u64..4) {
        let dag = build_dag(&spec).unwrap();
        let macs = dag.total_macs();
        let fused = fuse_qkv(&dag, &HardwareSpec::vu9p()).unwrap().dag;
        prop_assert_eq!(fused.total_macs(), macs);
        let split = split_heads(&dag).unwrap();
        prop_assert_eq!(split.total_macs(), macs);
        let batched = batch_expand(&dag, b).unwrap();
        prop_assert_eq!(batched.total_macs(), macs * u128::from(b));
        for d in [&dag, &fused, &split, &batched] {
            check_topo(d);
        }
    }

    #[test]
    fn matmul_shapes_chain(spec in arb_spec()) {
        let dag = build_dag(&spec).unwrap();
        for node in dag.nodes() {
            if let OpKind::MatMul(mm) = &node.kind {
                prop_assert_eq!(node.shape.rows, mm.n);
                prop_assert_eq!(node.shape.cols, mm.m * node.heads);
                prop_assert!(mm.a_rows >= mm.n);
            }
        }
    }
}
