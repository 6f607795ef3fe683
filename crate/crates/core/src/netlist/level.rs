//! Topological ordering and longest-path levelization.

use std::collections::VecDeque;

use super::{Netlist, NetlistError, Node, NodeId};

/// Layer assignment where every edge strictly increases the layer index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Levelization {
    /// `layers[0]` holds the primary inputs and constant drivers.
    pub layers: Vec<Vec<NodeId>>,
    pub level_of: Vec<usize>,
}

impl Levelization {
    /// Index of the deepest layer (logic depth of the critical path).
    pub fn depth(&self) -> usize {
        self.layers.len().saturating_sub(1)
    }

    pub fn layer(&self, k: usize) -> &[NodeId] {
        self.layers.get(k).map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Kahn's algorithm over fan-in edges. On failure, names a node that lies on
/// a cycle.
pub(crate) fn kahn_order(nodes: &[Node]) -> Result<Vec<NodeId>, NetlistError> {
    let n = nodes.len();
    let mut indeg: Vec<usize> = nodes.iter().map(|x| x.fanin.len()).collect();
    let mut fanout: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, node) in nodes.iter().enumerate() {
        for f in &node.fanin {
            fanout[f.0].push(i);
        }
    }
    let mut queue: VecDeque<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(u) = queue.pop_front() {
        order.push(NodeId(u));
        for &v in &fanout[u] {
            indeg[v] -= 1;
            if indeg[v] == 0 {
                queue.push_back(v);
            }
        }
    }
    if order.len() == n {
        return Ok(order);
    }
    // Every unsorted node has an unsorted predecessor; walking n steps
    // backwards from any of them must end on a cycle.
    let mut cur = (0..n).find(|&i| indeg[i] > 0).expect("unsorted node exists");
    for _ in 0..n {
        cur = nodes[cur]
            .fanin
            .iter()
            .map(|f| f.0)
            .find(|&p| indeg[p] > 0)
            .expect("unsorted node has an unsorted predecessor");
    }
    Err(NetlistError::Cycle(nodes[cur].name.clone()))
}

/// Longest-path levelization: sources (inputs and constants) sit at level 0
/// and every gate sits one above its deepest predecessor.
pub fn levelize(n: &Netlist) -> Levelization {
    let mut level_of = vec![0usize; n.len()];
    for &id in n.topo_order() {
        let node = n.node(id);
        level_of[id.0] = node
            .fanin
            .iter()
            .map(|f| level_of[f.0] + 1)
            .max()
            .unwrap_or(0);
    }
    let depth = level_of.iter().copied().max();
    let mut layers = vec![Vec::new(); depth.map_or(0, |d| d + 1)];
    for (i, &l) in level_of.iter().enumerate() {
        layers[l].push(NodeId(i));
    }
    debug_assert!(layers
        .first()
        .is_none_or(|l0| l0.iter().all(|id| n.node(*id).kind.is_source())));
    Levelization { layers, level_of }
}
