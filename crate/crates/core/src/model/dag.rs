use std::collections::{BTreeMap, BinaryHeap, HashSet};
use std::cmp::Reverse;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub usize);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "%{}", self.0)
    }
}

/// A reference to one output port of a producer node. Only `Split` has more than one port.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Operand {
    pub node: NodeId,
    pub port: usize,
}

impl Operand {
    pub fn new(node: NodeId) -> Self {
        Self { node, port: 0 }
    }

    pub fn port(node: NodeId, port: usize) -> Self {
        Self { node, port }
    }
}

/// Row-major 2-D tensor shape. Head-scoped tensors store heads side by side in columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Shape {
    pub rows: u64,
    pub cols: u64,
}

impl Shape {
    pub fn new(rows: u64, cols: u64) -> Self {
        Self { rows, cols }
    }

    pub fn elements(&self) -> u64 {
        self.rows * self.cols
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.rows, self.cols)
    }
}

/// Where the B operand of a MatMul comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum BOperand {
    /// Static weights streamed from DDR.
    Weight,
    /// A second activation input; `transposed` for products like `Q K^T`.
    Activation { transposed: bool },
}

/// `A (n x k) * B (k x m)` executed once per head.
///
/// `a_rows` is the row count of the stored A tensor; it exceeds `n` when the
/// op reads a row subset (the classifier reads only class-token rows).
/// `batch` counts independent image instances stacked along rows in
/// activation-activation products.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MatMulOp {
    pub n: u64,
    pub k: u64,
    pub m: u64,
    pub a_rows: u64,
    pub batch: u64,
    pub b: BOperand,
}

impl MatMulOp {
    pub fn weight(n: u64, k: u64, m: u64) -> Self {
        Self { n, k, m, a_rows: n, batch: 1, b: BOperand::Weight }
    }

    pub fn activation(n: u64, k: u64, m: u64, batch: u64, transposed: bool) -> Self {
        Self { n, k, m, a_rows: n, batch, b: BOperand::Activation { transposed } }
    }

    pub fn macs(&self) -> u128 {
        u128::from(self.n) * u128::from(self.k) * u128::from(self.m)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum OpKind {
    MatMul(MatMulOp),
    LayerNorm,
    Softmax,
    Gelu,
    Add,
    /// Column-wise split; port `i` carries `parts[i]` columns.
    Split { parts: Vec<u64> },
    /// Merges per-head results back into one row-major tensor.
    Concat,
}

/// Field-less discriminant of [`OpKind`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum OpTag {
    MatMul,
    LayerNorm,
    Softmax,
    Gelu,
    Add,
    Split,
    Concat,
}

impl OpTag {
    pub const ALL: [OpTag; 7] = [
        OpTag::MatMul,
        OpTag::LayerNorm,
        OpTag::Softmax,
        OpTag::Gelu,
        OpTag::Add,
        OpTag::Split,
        OpTag::Concat,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OpTag::MatMul => "MatMul",
            OpTag::LayerNorm => "LayerNorm",
            OpTag::Softmax => "Softmax",
            OpTag::Gelu => "Gelu",
            OpTag::Add => "Add",
            OpTag::Split => "Split",
            OpTag::Concat => "Concat",
        }
    }
}

impl fmt::Display for OpTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl OpKind {
    pub fn tag(&self) -> OpTag {
        match self {
            OpKind::MatMul(_) => OpTag::MatMul,
            OpKind::LayerNorm => OpTag::LayerNorm,
            OpKind::Softmax => OpTag::Softmax,
            OpKind::Gelu => OpTag::Gelu,
            OpKind::Add => OpTag::Add,
            OpKind::Split { .. } => OpTag::Split,
            OpKind::Concat => OpTag::Concat,
        }
    }

    pub fn as_matmul(&self) -> Option<&MatMulOp> {
        match self {
            OpKind::MatMul(mm) => Some(mm),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpNode {
    pub id: NodeId,
    pub name: String,
    pub kind: OpKind,
    pub head_scoped: bool,
    /// Number of heads executed by this node; 1 unless head-scoped.
    pub heads: u64,
    pub inputs: Vec<Operand>,
    /// Output shape (the full input shape for `Split`).
    pub shape: Shape,
}

impl OpNode {
    /// Shape carried by output `port`.
    pub fn output_shape(&self, port: usize) -> Option<Shape> {
        match &self.kind {
            OpKind::Split { parts } => parts.get(port).map(|&c| Shape::new(self.shape.rows, c)),
            _ => (port == 0).then_some(self.shape),
        }
    }

    /// Shapes this node expects on each input, or `None` for an arity mismatch.
    ///
    /// A MatMul whose weight-side A operand has no input reads it from the host.
    pub fn expected_inputs(&self) -> Option<Vec<Shape>> {
        let s = self.shape;
        let shapes = match &self.kind {
            OpKind::MatMul(mm) => {
                let h = self.heads;
                match mm.b {
                    BOperand::Weight => {
                        let a = Shape::new(mm.a_rows, mm.k);
                        match self.inputs.len() {
                            0 => vec![],
                            1 => vec![a],
                            _ => return None,
                        }
                    }
                    BOperand::Activation { transposed } => {
                        let a = Shape::new(mm.a_rows, h * mm.k);
                        let b = if transposed {
                            Shape::new(mm.m * mm.batch, h * mm.k)
                        } else {
                            Shape::new(mm.k * mm.batch, h * mm.m)
                        };
                        vec![a, b]
                    }
                }
            }
            OpKind::LayerNorm | OpKind::Softmax | OpKind::Gelu | OpKind::Concat => vec![s],
            OpKind::Add => vec![s, s],
            OpKind::Split { .. } => vec![s],
        };
        (shapes.len() == self.inputs.len()).then_some(shapes)
    }

    fn check_local(&self) -> Result<(), ModelError> {
        let bad = |reason: &str| ModelError::Node { node: self.name.clone(), reason: reason.into() };
        if self.heads == 0 {
            return Err(bad("heads must be at least 1"));
        }
        if self.head_scoped && !matches!(self.kind, OpKind::MatMul(_) | OpKind::Softmax) {
            return Err(bad("only MatMul and Softmax may be head-scoped"));
        }
        if !self.head_scoped && self.heads != 1 {
            return Err(bad("non-head-scoped nodes carry exactly one head"));
        }
        match &self.kind {
            OpKind::MatMul(mm) => {
                if mm.n == 0 || mm.k == 0 || mm.m == 0 || mm.batch == 0 {
                    return Err(bad("MatMul dimensions must be positive"));
                }
                if mm.a_rows < mm.n {
                    return Err(bad("A operand has fewer rows than n"));
                }
                if self.shape != Shape::new(mm.n, self.heads * mm.m) {
                    return Err(bad("output shape disagrees with MatMul dims"));
                }
            }
            OpKind::Split { parts } => {
                if parts.is_empty() || parts.contains(&0) {
                    return Err(bad("split parts must be positive"));
                }
                if parts.iter().sum::<u64>() != self.shape.cols {
                    return Err(bad("split parts must cover the input columns"));
                }
            }
            _ => {}
        }
        if self.shape.rows == 0 || self.shape.cols == 0 {
            return Err(bad("empty output shape"));
        }
        Ok(())
    }
}

/// Validated, immutable operation graph. `nodes[i].id == NodeId(i)` always holds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Dag {
    nodes: Vec<OpNode>,
}

impl Dag {
    /// Validates ids, names, operand references, shapes and acyclicity.
    pub fn new(nodes: Vec<OpNode>) -> Result<Self, ModelError> {
        let mut names = HashSet::new();
        for (i, node) in nodes.iter().enumerate() {
            if node.id != NodeId(i) {
                return Err(ModelError::Node {
                    node: node.name.clone(),
                    reason: format!("id {} stored at position {i}", node.id),
                });
            }
            if !names.insert(node.name.as_str()) {
                return Err(ModelError::Node {
                    node: node.name.clone(),
                    reason: "duplicate node name".into(),
                });
            }
            node.check_local()?;
        }
        for node in &nodes {
            let expected = node.expected_inputs().ok_or_else(|| ModelError::Node {
                node: node.name.clone(),
                reason: format!("unexpected input count {}", node.inputs.len()),
            })?;
            for (operand, want) in node.inputs.iter().zip(expected) {
                let producer = nodes.get(operand.node.0).ok_or_else(|| ModelError::Node {
                    node: node.name.clone(),
                    reason: format!("input {} does not exist", operand.node),
                })?;
                let got = producer.output_shape(operand.port).ok_or_else(|| ModelError::Node {
                    node: node.name.clone(),
                    reason: format!("{} has no port {}", producer.name, operand.port),
                })?;
                if got != want {
                    return Err(ModelError::Shape {
                        producer: producer.name.clone(),
                        consumer: node.name.clone(),
                        produced: got,
                        expected: want,
                    });
                }
            }
        }
        topo_order(&nodes)?;
        Ok(Self { nodes })
    }

    pub fn nodes(&self) -> &[OpNode] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &OpNode {
        &self.nodes[id.0]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn find(&self, name: &str) -> Option<&OpNode> {
        self.nodes.iter().find(|n| n.name == name)
    }

    /// Producer -> consumer pairs, one per operand.
    pub fn edges(&self) -> Vec<(NodeId, NodeId)> {
        self.nodes
            .iter()
            .flat_map(|n| n.inputs.iter().map(move |op| (op.node, n.id)))
            .collect()
    }

    pub fn consumers(&self, id: NodeId) -> impl Iterator<Item = &OpNode> {
        self.nodes.iter().filter(move |n| n.inputs.iter().any(|op| op.node == id))
    }

    pub fn matmuls(&self) -> impl Iterator<Item = (&OpNode, &MatMulOp)> {
        self.nodes.iter().filter_map(|n| n.kind.as_matmul().map(|mm| (n, mm)))
    }

    pub fn count(&self, tag: OpTag) -> usize {
        self.nodes.iter().filter(|n| n.kind.tag() == tag).count()
    }

    pub fn kind_histogram(&self) -> BTreeMap<OpTag, usize> {
        let mut hist = BTreeMap::new();
        for n in &self.nodes {
            *hist.entry(n.kind.tag()).or_insert(0) += 1;
        }
        hist
    }

    pub fn total_macs(&self) -> u128 {
        self.matmuls().map(|(n, mm)| mm.macs() * u128::from(n.heads)).sum()
    }

    /// Learnable parameters implied by weight shapes: weights plus biases for
    /// weight-side MatMuls and a scale/shift pair per LayerNorm column.
    pub fn weight_parameters(&self) -> u128 {
        self.nodes
            .iter()
            .map(|n| match &n.kind {
                OpKind::MatMul(mm) if mm.b == BOperand::Weight => {
                    u128::from(n.heads) * u128::from(mm.k * mm.m + mm.m)
                }
                OpKind::LayerNorm => 2 * u128::from(n.shape.cols),
                _ => 0,
            })
            .sum()
    }
}

/// Deterministic Kahn ordering with ascending-id tie-breaks.
pub(crate) fn topo_order(nodes: &[OpNode]) -> Result<Vec<NodeId>, ModelError> {
    let mut indegree = vec![0usize; nodes.len()];
    let mut consumers: Vec<Vec<usize>> = vec![Vec::new(); nodes.len()];
    for (i, node) in nodes.iter().enumerate() {
        for op in &node.inputs {
            if op.node.0 >= nodes.len() {
                return Err(ModelError::Node {
                    node: node.name.clone(),
                    reason: format!("input {} does not exist", op.node),
                });
            }
            indegree[i] += 1;
            consumers[op.node.0].push(i);
        }
    }
    let mut ready: BinaryHeap<Reverse<usize>> =
        (0..nodes.len()).filter(|&i| indegree[i] == 0).map(Reverse).collect();
    let mut order = Vec::with_capacity(nodes.len());
    while let Some(Reverse(i)) = ready.pop() {
        order.push(NodeId(i));
        for &c in &consumers[i] {
            indegree[c] -= 1;
            if indegree[c] == 0 {
                ready.push(Reverse(c));
            }
        }
    }
    if order.len() != nodes.len() {
        let stuck = (0..nodes.len()).find(|&i| indegree[i] > 0).unwrap_or(0);
        return Err(ModelError::Cycle { node: nodes[stuck].name.clone() });
    }
    Ok(order)
}

/// Topological order of `dag`; every node follows all of its inputs and ties
/// are broken by ascending node id.
pub fn topo_schedule(dag: &Dag) -> Result<Vec<NodeId>, ModelError> {
    topo_order(dag.nodes())
}

#[cfg(test)]
pub(crate) mod testutil {
    use super::*;

    /// Builds a node of the given kind with a 1x1 shape, for ordering tests.
    pub fn unit(id: usize, kind: OpKind, inputs: &[usize]) -> OpNode {
        OpNode {
            id: NodeId(id),
            name: format!("n{id}"),
            kind,
            head_scoped: false,
            heads: 1,
            inputs: inputs.iter().map(|&i| Operand::new(NodeId(i))).collect(),
            shape: Shape::new(1, 1),
        }
    }
}
