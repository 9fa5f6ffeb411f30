//! Resource-gated graph rewrites: Q/K/V fusion, head-wise projections and batching.

use serde::Serialize;

use super::build::{assemble, Pending};
use super::dag::{BOperand, Dag, NodeId, OpKind, OpNode};
use super::ModelError;
use crate::hw::HardwareSpec;

/// Result of [`fuse_qkv`]; `diagnostics` explains every triple left unfused.
#[derive(Debug, Clone, Serialize)]
pub struct FuseOutcome {
    pub dag: Dag,
    pub fused: usize,
    pub diagnostics: Vec<String>,
}

/// Q/K/V projection triple feeding one attention block.
struct QkvTriple {
    q: NodeId,
    k: NodeId,
    v: NodeId,
}

fn plain_weight_matmul(node: &OpNode) -> bool {
    matches!(&node.kind, OpKind::MatMul(mm) if mm.b == BOperand::Weight) && !node.head_scoped
}

fn find_triples(dag: &Dag) -> Vec<QkvTriple> {
    let mut out = Vec::new();
    for node in dag.nodes() {
        let OpKind::MatMul(mm) = &node.kind else { continue };
        if mm.b != (BOperand::Activation { transposed: true }) {
            continue;
        }
        let (q, k) = (node.inputs[0], node.inputs[1]);
        // QK^T -> Softmax -> AV(B = V)
        let v = dag
            .consumers(node.id)
            .filter(|c| c.kind.tag() == super::OpTag::Softmax)
            .flat_map(|sm| dag.consumers(sm.id))
            .find_map(|av| match &av.kind {
                OpKind::MatMul(a) if a.b == (BOperand::Activation { transposed: false }) => Some(av.inputs[1]),
                _ => None,
            });
        let Some(v) = v else { continue };
        if q.port != 0 || k.port != 0 || v.port != 0 {
            continue;
        }
        let (qn, kn, vn) = (dag.node(q.node), dag.node(k.node), dag.node(v.node));
        if ![qn, kn, vn].iter().all(|n| plain_weight_matmul(n)) {
            continue;
        }
        if qn.inputs != kn.inputs || qn.inputs != vn.inputs || qn.kind != kn.kind || qn.kind != vn.kind {
            continue;
        }
        out.push(QkvTriple { q: q.node, k: k.node, v: v.node });
    }
    out
}

/// Replaces each Q/K/V projection triple with one MatMul of width `3m`
/// followed by a Split, when the fused `k x 3m` weight block fits on chip.
///
/// Already-fused graphs come back unchanged.
pub fn fuse_qkv(dag: &Dag, hw: &HardwareSpec) -> Result<FuseOutcome, ModelError> {
    let mut pending: Vec<Pending> = dag.nodes().iter().map(|n| Pending::from_node(dag, n)).collect();
    let mut remove = vec![false; dag.len()];
    let mut insert_after: Vec<Option<Pending>> = vec![None; dag.len()];
    let mut diagnostics = Vec::new();
    let mut fused = 0;

    for triple in find_triples(dag) {
        let q = dag.node(triple.q);
        let mm = *q.kind.as_matmul().expect("triple members are MatMuls");
        let block = u128::from(mm.k) * 3 * u128::from(mm.m);
        if block > u128::from(hw.onchip_capacity_elems) {
            diagnostics.push(format!(
                "{}: fused weight block {}x{} exceeds on-chip capacity {}",
                q.name,
                mm.k,
                3 * mm.m,
                hw.onchip_capacity_elems
            ));
            continue;
        }
        let base = q.name.strip_suffix(".q").unwrap_or(&q.name).to_string();
        let fused_name = format!("{base}.qkv");
        let split_name = format!("{base}.qkv_split");

        let mut wide = mm;
        wide.m = 3 * mm.m;
        let slot = &mut pending[triple.q.0];
        slot.name = fused_name.clone();
        slot.kind = OpKind::MatMul(wide);
        slot.shape.cols = 3 * mm.m;
        insert_after[triple.q.0] = Some(Pending {
            name: split_name.clone(),
            kind: OpKind::Split { parts: vec![mm.m; 3] },
            head_scoped: false,
            heads: 1,
            inputs: vec![(fused_name, 0)],
            shape: slot.shape,
        });
        remove[triple.k.0] = true;
        remove[triple.v.0] = true;

        let rename = [
            (dag.node(triple.q).name.clone(), 0),
            (dag.node(triple.k).name.clone(), 1),
            (dag.node(triple.v).name.clone(), 2),
        ];
        for p in pending.iter_mut() {
            for input in p.inputs.iter_mut() {
                if let Some((_, port)) = rename.iter().find(|(old, _)| *old == input.0) {
                    *input = (split_name.clone(), *port);
                }
            }
        }
        fused += 1;
    }

    let mut out = Vec::with_capacity(pending.len() + fused);
    for ((p, drop), extra) in pending.into_iter().zip(remove).zip(insert_after) {
        if !drop {
            out.push(p);
        }
        if let Some(split) = extra {
            out.push(split);
        }
    }
    Ok(FuseOutcome { dag: assemble(out)?, fused, diagnostics })
}

/// Computes the Q/K/V projections head by head: each becomes a head-scoped
/// MatMul of width `m / heads`. Fused or already head-wise projections are left alone.
pub fn split_heads(dag: &Dag) -> Result<Dag, ModelError> {
    let triples = find_triples(dag);
    let mut pending: Vec<Pending> = dag.nodes().iter().map(|n| Pending::from_node(dag, n)).collect();
    for t in triples {
        let heads = dag.consumers(t.q).map(|c| c.heads).max().unwrap_or(1);
        for id in [t.q, t.k, t.v] {
            let p = &mut pending[id.0];
            if let OpKind::MatMul(mm) = &mut p.kind {
                if mm.m % heads != 0 {
                    continue;
                }
                mm.m /= heads;
                p.head_scoped = true;
                p.heads = heads;
            }
        }
    }
    assemble(pending)
}

/// Stacks `batch` copies of every activation along rows.
pub fn batch_expand(dag: &Dag, batch: u64) -> Result<Dag, ModelError> {
    if batch == 0 {
        return Err(ModelError::invalid("batch", "must be at least 1"));
    }
    let mut pending: Vec<Pending> = dag.nodes().iter().map(|n| Pending::from_node(dag, n)).collect();
    for p in pending.iter_mut() {
        p.shape.rows *= batch;
        if let OpKind::MatMul(mm) = &mut p.kind {
            mm.n *= batch;
            mm.a_rows *= batch;
            if matches!(mm.b, BOperand::Activation { .. }) {
                mm.batch *= batch;
            }
        }
    }
    assemble(pending)
}
