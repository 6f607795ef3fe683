//! Greedy layer-by-layer graph matching of an appearance netlist onto a
//! functional netlist, and covert-cell deployment from the mapping.

mod deploy;
mod hungarian;

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netlist::{levelize, GateType, Netlist, NodeId};

pub use deploy::{edge_mismatch_ratio, deploy_covert};
pub use hungarian::{hungarian, AssignError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MatchError {
    #[error("invalid cost config: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Assign(#[from] AssignError),
    #[error("mapping document: {0}")]
    Json(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CostConfig {
    pub c_hide: f64,
    pub c_mismatch: f64,
    pub w_conn: f64,
    pub c_dummy: f64,
}

impl Default for CostConfig {
    fn default() -> Self {
        CostConfig {
            c_hide: 0.0,
            c_mismatch: 10.0,
            w_conn: 3.0,
            c_dummy: 100.0,
        }
    }
}

impl CostConfig {
    pub fn validate(&self) -> Result<(), MatchError> {
        let all = [self.c_hide, self.c_mismatch, self.w_conn, self.c_dummy];
        if all.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(MatchError::BadConfig("costs must be finite and non-negative".into()));
        }
        if !(self.c_hide <= self.c_mismatch && self.c_mismatch < self.c_dummy) {
            return Err(MatchError::BadConfig("need c_hide <= c_mismatch < c_dummy".into()));
        }
        Ok(())
    }
}

/// Whether `truth` may be hidden inside a gate that looks like `appearance`.
pub fn hides(appearance: GateType, truth: GateType) -> bool {
    use GateType::*;
    match appearance {
        Nand | Nor => truth == Not,
        And | Or => truth == Buf,
        Xor | Xnor => !matches!(truth, Input | Output),
        Buf | Not => matches!(truth, Const0 | Const1),
        _ => false,
    }
}

pub fn node_cost(a_type: GateType, f_type: GateType, cfg: &CostConfig) -> f64 {
    if a_type == f_type {
        0.0
    } else if hides(a_type, f_type) {
        cfg.c_hide
    } else {
        cfg.c_mismatch
    }
}

/// Partial injective map between appearance (A) and functional (F) nodes.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NodeMapping {
    /// A node -> F node.
    pub pairs: BTreeMap<NodeId, NodeId>,
    /// Layer-local mappings; `pairs` is their union.
    pub per_layer: Vec<Vec<(NodeId, NodeId)>>,
    pub unmatched_a: BTreeSet<NodeId>,
    pub unmatched_f: BTreeSet<NodeId>,
}

impl NodeMapping {
    /// F node -> A node.
    pub fn inverse(&self) -> BTreeMap<NodeId, NodeId> {
        self.pairs.iter().map(|(&a, &f)| (f, a)).collect()
    }

    /// Mapping restricted to layers `0..k`.
    pub fn prefix(&self, k: usize) -> BTreeMap<NodeId, NodeId> {
        self.per_layer[..k.min(self.per_layer.len())]
            .iter()
            .flatten()
            .copied()
            .collect()
    }
}

/// `w_conn` times the number of distinct F-predecessors of `f` that no
/// mapped A-predecessor of `a` corresponds to. Extra A-predecessors are free.
pub fn connection_cost(
    a_graph: &Netlist,
    f_graph: &Netlist,
    a: NodeId,
    f: NodeId,
    m_prev: &BTreeMap<NodeId, NodeId>,
    cfg: &CostConfig,
) -> f64 {
    let mapped: HashSet<NodeId> = a_graph
        .node(a)
        .fanin
        .iter()
        .filter_map(|p| m_prev.get(p).copied())
        .collect();
    let preds: BTreeSet<NodeId> = f_graph.node(f).fanin.iter().copied().collect();
    let missing = preds.iter().filter(|p| !mapped.contains(p)).count();
    cfg.w_conn * missing as f64
}

/// Square cost matrix for one layer; rows are A nodes, columns F nodes,
/// padded with `c_dummy`.
pub fn build_cost_matrix(
    a_graph: &Netlist,
    f_graph: &Netlist,
    layer_a: &[NodeId],
    layer_f: &[NodeId],
    m_prev: &BTreeMap<NodeId, NodeId>,
    cfg: &CostConfig,
) -> Vec<Vec<f64>> {
    let n = layer_a.len().max(layer_f.len());
    let mut c = vec![vec![cfg.c_dummy; n]; n];
    for (i, &a) in layer_a.iter().enumerate() {
        for (j, &f) in layer_f.iter().enumerate() {
            c[i][j] = node_cost(a_graph.node(a).kind, f_graph.node(f).kind, cfg)
                + connection_cost(a_graph, f_graph, a, f, m_prev, cfg);
        }
    }
    c
}

/// PI pairing: equal names first, then the remaining PIs positionally in
/// declaration order.
pub fn match_pi_layer(a_graph: &Netlist, f_graph: &Netlist) -> Vec<(NodeId, NodeId)> {
    let f_by_name: HashMap<&str, NodeId> = f_graph
        .inputs()
        .iter()
        .map(|&f| (f_graph.node(f).name.as_str(), f))
        .collect();
    let mut pairs = Vec::new();
    let mut used_a = HashSet::new();
    let mut used_f = HashSet::new();
    for &a in a_graph.inputs() {
        if let Some(&f) = f_by_name.get(a_graph.node(a).name.as_str()) {
            pairs.push((a, f));
            used_a.insert(a);
            used_f.insert(f);
        }
    }
    let rest_a = a_graph.inputs().iter().filter(|a| !used_a.contains(a));
    let rest_f = f_graph.inputs().iter().filter(|f| !used_f.contains(f));
    pairs.extend(rest_a.zip(rest_f).map(|(&a, &f)| (a, f)));
    pairs
}

/// Per-layer record of the assignment problem that was solved.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerTrace {
    pub layer: usize,
    pub a_nodes: Vec<NodeId>,
    pub f_nodes: Vec<NodeId>,
    pub cost: Vec<Vec<f64>>,
    pub assignment: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    pub mapping: NodeMapping,
    pub layers: Vec<LayerTrace>,
    /// `(node_cost, connection_cost)` of every matched pair, keyed by A node.
    pub pair_costs: BTreeMap<NodeId, (f64, f64)>,
    /// Sum of the optimal assignment costs over all layers, dummies included.
    pub total_cost: f64,
}

/// Greedy layer-by-layer matching. Connection costs at layer `k` see the
/// accumulated mapping of layers `0..k`.
pub fn match_graphs(a_graph: &Netlist, f_graph: &Netlist, cfg: &CostConfig) -> Result<MatchResult, MatchError> {
    cfg.validate()?;
    let la = levelize(a_graph);
    let lf = levelize(f_graph);
    let depth = la.layers.len().max(lf.layers.len());
    let layer_of = |l: &crate::netlist::Levelization, k: usize| -> Vec<NodeId> {
        l.layers.get(k).cloned().unwrap_or_default()
    };

    let mut mapping = NodeMapping::default();
    let mut pair_costs = BTreeMap::new();
    let mut layers = Vec::new();
    let mut total_cost = 0.0;
    let mut m_acc: BTreeMap<NodeId, NodeId> = BTreeMap::new();

    for k in 0..depth {
        let mut layer_a = layer_of(&la, k);
        let mut layer_f = layer_of(&lf, k);
        let mut local = Vec::new();
        if k == 0 {
            // Sources: PIs pair by name/position; constants go through the
            // assignment below like any other layer.
            local = match_pi_layer(a_graph, f_graph);
            for &(a, _) in &local {
                pair_costs.insert(a, (0.0, 0.0));
            }
            layer_a.retain(|&a| a_graph.node(a).kind != GateType::Input);
            layer_f.retain(|&f| f_graph.node(f).kind != GateType::Input);
            let matched_a: HashSet<NodeId> = local.iter().map(|p| p.0).collect();
            let matched_f: HashSet<NodeId> = local.iter().map(|p| p.1).collect();
            for &a in a_graph.inputs() {
                if !matched_a.contains(&a) {
                    mapping.unmatched_a.insert(a);
                }
            }
            for &f in f_graph.inputs() {
                if !matched_f.contains(&f) {
                    mapping.unmatched_f.insert(f);
                }
            }
        }
        if !layer_a.is_empty() || !layer_f.is_empty() {
            let cost = build_cost_matrix(a_graph, f_graph, &layer_a, &layer_f, &m_acc, cfg);
            let (assignment, opt) = hungarian(&cost)?;
            total_cost += opt;
            for (i, &j) in assignment.iter().enumerate() {
                match (layer_a.get(i), layer_f.get(j)) {
                    (Some(&a), Some(&f)) => {
                        let nc = node_cost(a_graph.node(a).kind, f_graph.node(f).kind, cfg);
                        pair_costs.insert(a, (nc, cost[i][j] - nc));
                        local.push((a, f));
                    }
                    (Some(&a), None) => {
                        mapping.unmatched_a.insert(a);
                    }
                    (None, Some(&f)) => {
                        mapping.unmatched_f.insert(f);
                    }
                    (None, None) => unreachable!("padding only fills the shorter side"),
                }
            }
            layers.push(LayerTrace {
                layer: k,
                a_nodes: layer_a,
                f_nodes: layer_f,
                cost,
                assignment,
            });
        }
        for &(a, f) in &local {
            m_acc.insert(a, f);
            mapping.pairs.insert(a, f);
        }
        mapping.per_layer.push(local);
    }
    Ok(MatchResult {
        mapping,
        layers,
        pair_costs,
        total_cost,
    })
}

#[derive(Serialize, Deserialize)]
struct PairDoc {
    a: String,
    f: String,
    layer: usize,
    node_cost: f64,
    conn_cost: f64,
}

#[derive(Serialize, Deserialize)]
struct MappingDoc {
    pairs: Vec<PairDoc>,
    unmatched_a: Vec<String>,
    unmatched_f: Vec<String>,
    total_cost: f64,
}

impl MatchResult {
    /// Structured-text mapping document, keyed by node names.
    pub fn to_json(&self, a_graph: &Netlist, f_graph: &Netlist) -> String {
        let mut pairs = Vec::new();
        for (layer, local) in self.mapping.per_layer.iter().enumerate() {
            for &(a, f) in local {
                let (nc, cc) = self.pair_costs.get(&a).copied().unwrap_or((0.0, 0.0));
                pairs.push(PairDoc {
                    a: a_graph.node(a).name.clone(),
                    f: f_graph.node(f).name.clone(),
                    layer,
                    node_cost: nc,
                    conn_cost: cc,
                });
            }
        }
        let doc = MappingDoc {
            pairs,
            unmatched_a: self.mapping.unmatched_a.iter().map(|&a| a_graph.node(a).name.clone()).collect(),
            unmatched_f: self.mapping.unmatched_f.iter().map(|&f| f_graph.node(f).name.clone()).collect(),
            total_cost: self.total_cost,
        };
        serde_json::to_string_pretty(&doc).expect("mapping document serialises")
    }

    /// Rebuild the mapping (without layer traces) from [`Self::to_json`].
    pub fn mapping_from_json(text: &str, a_graph: &Netlist, f_graph: &Netlist) -> Result<NodeMapping, MatchError> {
        let doc: MappingDoc = serde_json::from_str(text).map_err(|e| MatchError::Json(e.to_string()))?;
        let find = |g: &Netlist, name: &str| g.find(name).ok_or_else(|| MatchError::Json(format!("unknown node `{name}`")));
        let mut m = NodeMapping::default();
        for p in &doc.pairs {
            let (a, f) = (find(a_graph, &p.a)?, find(f_graph, &p.f)?);
            if m.per_layer.len() <= p.layer {
                m.per_layer.resize(p.layer + 1, Vec::new());
            }
            m.per_layer[p.layer].push((a, f));
            m.pairs.insert(a, f);
        }
        for name in &doc.unmatched_a {
            m.unmatched_a.insert(find(a_graph, name)?);
        }
        for name in &doc.unmatched_f {
            m.unmatched_f.insert(find(f_graph, name)?);
        }
        Ok(m)
    }
}
