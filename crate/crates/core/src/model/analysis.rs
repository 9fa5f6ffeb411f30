use std::collections::BTreeMap;

use serde::Serialize;

use super::dag::{Dag, OpTag};
use super::topo_schedule;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MatMulSummary {
    pub id: usize,
    pub name: String,
    pub n: u64,
    pub k: u64,
    pub m: u64,
    pub heads: u64,
    pub head_scoped: bool,
    pub macs: u128,
}

/// Structural summary of a DAG.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AnalysisReport {
    pub node_count: usize,
    pub edge_count: usize,
    pub kind_counts: BTreeMap<String, usize>,
    pub softmax_groups: usize,
    pub matmuls: Vec<MatMulSummary>,
    pub total_macs: u128,
    /// Nodes on the longest dependency chain.
    pub critical_path_nodes: usize,
}

impl AnalysisReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One row per MatMul.
    pub fn to_csv(&self) -> Result<String, csv::Error> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["id", "name", "n", "k", "m", "heads", "head_scoped", "macs"])?;
        for mm in &self.matmuls {
            w.write_record([
                mm.id.to_string(),
                mm.name.clone(),
                mm.n.to_string(),
                mm.k.to_string(),
                mm.m.to_string(),
                mm.heads.to_string(),
                mm.head_scoped.to_string(),
                mm.macs.to_string(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

pub fn analyze(dag: &Dag) -> AnalysisReport {
    let mut kind_counts: BTreeMap<String, usize> =
        OpTag::ALL.iter().map(|t| (t.name().to_string(), 0)).collect();
    for (tag, count) in dag.kind_histogram() {
        kind_counts.insert(tag.name().to_string(), count);
    }

    let matmuls = dag
        .matmuls()
        .map(|(node, mm)| MatMulSummary {
            id: node.id.0,
            name: node.name.clone(),
            n: mm.n,
            k: mm.k,
            m: mm.m,
            heads: node.heads,
            head_scoped: node.head_scoped,
            macs: mm.macs() * u128::from(node.heads),
        })
        .collect();

    let order = topo_schedule(dag).expect("Dag values are acyclic");
    let mut depth = vec![0usize; dag.len()];
    for id in order {
        let node = dag.node(id);
        depth[id.0] = 1 + node.inputs.iter().map(|op| depth[op.node.0]).max().unwrap_or(0);
    }

    AnalysisReport {
        node_count: dag.len(),
        edge_count: dag.edges().len(),
        kind_counts,
        softmax_groups: dag.count(OpTag::Softmax),
        matmuls,
        total_macs: dag.total_macs(),
        critical_path_nodes: depth.into_iter().max().unwrap_or(0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_dag, ModelSpec};

    #[test]
    fn toy_mac_total_matches_hand_sum() {
        // d=4, heads=1, tokens=2, hidden=16, patch=3, classes=5
        let mut spec = ModelSpec::new("toy", 4, 1, 1, 2);
        spec.patch_pixels = 3;
        spec.num_classes = 5;
        let report = analyze(&build_dag(&spec).unwrap());
        let hand = 2 * 3 * 4        // patch
            + 3 * (2 * 4 * 4)       // q, k, v
            + 2 * 4 * 2             // qk
            + 2 * 2 * 4             // av
            + 2 * 4 * 4             // proj
            + 2 * 4 * 16            // fc1
            + 2 * 16 * 4            // fc2
            + 4 * 5; // classifier
        assert_eq!(report.total_macs, hand);
        // patch, ln1, q, qk, softmax, av, concat, proj, add1, ln2, fc1, gelu, fc2, add2, classifier
        assert_eq!(report.critical_path_nodes, 15);
        assert!(report.to_csv().unwrap().lines().count() == report.matmuls.len() + 1);
    }
}
