use std::collections::HashMap;

use super::dag::{Dag, MatMulOp, NodeId, OpKind, OpNode, Operand, Shape};
use super::{ModelError, ModelSpec};

/// Node under construction; operands refer to producers by name so rewrites
/// can drop and insert nodes before ids are assigned.
#[derive(Debug, Clone)]
pub(crate) struct Pending {
    pub name: String,
    pub kind: OpKind,
    pub head_scoped: bool,
    pub heads: u64,
    pub inputs: Vec<(String, usize)>,
    pub shape: Shape,
}

impl Pending {
    pub fn from_node(dag: &Dag, node: &OpNode) -> Self {
        Self {
            name: node.name.clone(),
            kind: node.kind.clone(),
            head_scoped: node.head_scoped,
            heads: node.heads,
            inputs: node
                .inputs
                .iter()
                .map(|op| (dag.node(op.node).name.clone(), op.port))
                .collect(),
            shape: node.shape,
        }
    }
}

/// Assigns sequential ids in list order and resolves named operands.
pub(crate) fn assemble(pending: Vec<Pending>) -> Result<Dag, ModelError> {
    let ids: HashMap<&str, NodeId> =
        pending.iter().enumerate().map(|(i, p)| (p.name.as_str(), NodeId(i))).collect();
    let mut nodes = Vec::with_capacity(pending.len());
    for (i, p) in pending.iter().enumerate() {
        let inputs = p
            .inputs
            .iter()
            .map(|(name, port)| {
                ids.get(name.as_str())
                    .map(|&id| Operand::port(id, *port))
                    .ok_or_else(|| ModelError::Node {
                        node: p.name.clone(),
                        reason: format!("unknown input `{name}`"),
                    })
            })
            .collect::<Result<Vec<_>, _>>()?;
        nodes.push(OpNode {
            id: NodeId(i),
            name: p.name.clone(),
            kind: p.kind.clone(),
            head_scoped: p.head_scoped,
            heads: p.heads,
            inputs,
            shape: p.shape,
        });
    }
    Dag::new(nodes)
}

struct Builder {
    nodes: Vec<Pending>,
}

impl Builder {
    fn push(&mut self, name: String, kind: OpKind, heads: Option<u64>, inputs: &[&str], shape: Shape) -> String {
        self.nodes.push(Pending {
            name: name.clone(),
            kind,
            head_scoped: heads.is_some(),
            heads: heads.unwrap_or(1),
            inputs: inputs.iter().map(|s| (s.to_string(), 0)).collect(),
            shape,
        });
        name
    }

    fn matmul(&mut self, name: String, mm: MatMulOp, heads: Option<u64>, inputs: &[&str]) -> String {
        let shape = Shape::new(mm.n, heads.unwrap_or(1) * mm.m);
        self.push(name, OpKind::MatMul(mm), heads, inputs, shape)
    }
}

/// Lowers a model description to its operation DAG.
///
/// Each encoder layer contributes, in order: LayerNorm, the Q/K/V
/// projections, head-scoped `QK^T`, Softmax and `AV`, a head Concat, the
/// output projection, the first residual Add, LayerNorm, FC1, Gelu, FC2 and
/// the second residual Add. A patch-embedding MatMul feeds the first layer and
/// a classifier MatMul on the class-token rows ends the graph. Batched specs
/// stack images along rows.
pub fn build_dag(spec: &ModelSpec) -> Result<Dag, ModelError> {
    spec.validate()?;
    let rows = spec.rows();
    let d = spec.embed_dim;
    let h = spec.num_heads;
    let dh = spec.head_dim();
    let t = spec.num_tokens;
    let hidden = spec.mlp_hidden();
    let act = Shape::new(rows, d);

    let mut b = Builder { nodes: Vec::new() };
    let mut x = b.matmul("patch_embed".into(), MatMulOp::weight(rows, spec.patch_pixels, d), None, &[]);

    for l in 0..spec.num_layers {
        let p = |s: &str| format!("l{l}.{s}");
        let ln1 = b.push(p("ln1"), OpKind::LayerNorm, None, &[&x], act);
        let q = b.matmul(p("q"), MatMulOp::weight(rows, d, d), None, &[&ln1]);
        let k = b.matmul(p("k"), MatMulOp::weight(rows, d, d), None, &[&ln1]);
        let v = b.matmul(p("v"), MatMulOp::weight(rows, d, d), None, &[&ln1]);
        let qk = b.matmul(p("qk"), MatMulOp::activation(rows, dh, t, spec.batch, true), Some(h), &[&q, &k]);
        let sm = b.push(p("softmax"), OpKind::Softmax, Some(h), &[&qk], Shape::new(rows, h * t));
        let av = b.matmul(p("av"), MatMulOp::activation(rows, t, dh, spec.batch, false), Some(h), &[&sm, &v]);
        let cat = b.push(p("concat"), OpKind::Concat, None, &[&av], act);
        let proj = b.matmul(p("proj"), MatMulOp::weight(rows, d, d), None, &[&cat]);
        let add1 = b.push(p("add1"), OpKind::Add, None, &[&proj, &x], act);
        let ln2 = b.push(p("ln2"), OpKind::LayerNorm, None, &[&add1], act);
        let fc1 = b.matmul(p("fc1"), MatMulOp::weight(rows, d, hidden), None, &[&ln2]);
        let gelu = b.push(p("gelu"), OpKind::Gelu, None, &[&fc1], Shape::new(rows, hidden));
        let fc2 = b.matmul(p("fc2"), MatMulOp::weight(rows, hidden, d), None, &[&gelu]);
        x = b.push(p("add2"), OpKind::Add, None, &[&fc2, &add1], act);
    }

    let mut head = MatMulOp::weight(spec.batch, d, spec.num_classes);
    head.a_rows = rows;
    b.matmul("classifier".into(), head, None, &[&x]);

    assemble(b.nodes)
}
