//! Mimicry-aware k-way partitioning.
//!
//! Three phases run in sequence:
//! 1. spectral embedding of the undirected circuit graph + seeded k-means,
//! 2. Kernighan-Lin refinement of every adjacent block pair, kept only when
//!    the global cut strictly improves,
//! 3. greedy single-node moves trading cut size against I/O imbalance.

mod balance;
mod kl;
mod pieces;
mod spectral;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netlist::{CamoError, Netlist};

pub use balance::{greedy_balance, BalanceOutcome, Move};
pub use kl::kl_refine;
pub use pieces::{extract_pieces, recombine, BoundaryMap, BoundaryNet, Piece};
pub use spectral::{kmeans, normalized_laplacian, smallest_eigenvectors, spectral_coarse};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PartitionError {
    #[error("cannot split {nodes} nodes into {k} blocks")]
    TooFewNodes { nodes: usize, k: usize },
    #[error("invalid partition config: {0}")]
    BadConfig(String),
    #[error("boundary port `{0}` cannot be resolved")]
    UnresolvedPort(String),
    #[error("boundary type mismatch at `{0}`")]
    BoundaryType(String),
    #[error(transparent)]
    Camo(#[from] CamoError),
}

/// Undirected, weighted view of a netlist plus distinct directed
/// predecessor/successor lists for port counting.
#[derive(Debug, Clone)]
pub struct CircuitGraph {
    n: usize,
    /// Sorted by neighbour; weight = number of fan-in references between
    /// the two nodes in either direction.
    adj: Vec<Vec<(usize, u32)>>,
    succ: Vec<Vec<usize>>,
    pred: Vec<Vec<usize>>,
}

impl CircuitGraph {
    pub fn from_netlist(n: &Netlist) -> Self {
        let edges: Vec<(usize, usize)> = n.edges().map(|(s, d)| (s.0, d.0)).collect();
        Self::from_edges(n.len(), &edges)
    }

    /// Directed edges `(src, dst)`; parallel edges add weight.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Self {
        let mut w: Vec<BTreeMap<usize, u32>> = vec![BTreeMap::new(); n];
        let mut succ = vec![Vec::new(); n];
        let mut pred = vec![Vec::new(); n];
        for &(s, d) in edges {
            if s == d {
                continue;
            }
            *w[s].entry(d).or_default() += 1;
            *w[d].entry(s).or_default() += 1;
            succ[s].push(d);
            pred[d].push(s);
        }
        for l in succ.iter_mut().chain(pred.iter_mut()) {
            l.sort_unstable();
            l.dedup();
        }
        CircuitGraph {
            n,
            adj: w.into_iter().map(|m| m.into_iter().collect()).collect(),
            succ,
            pred,
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn neighbors(&self, v: usize) -> &[(usize, u32)] {
        &self.adj[v]
    }

    pub fn weight(&self, u: usize, v: usize) -> u32 {
        self.adj[u]
            .binary_search_by_key(&v, |&(x, _)| x)
            .map_or(0, |i| self.adj[u][i].1)
    }

    pub fn successors(&self, v: usize) -> &[usize] {
        &self.succ[v]
    }

    pub fn predecessors(&self, v: usize) -> &[usize] {
        &self.pred[v]
    }

    pub fn degree(&self, v: usize) -> u32 {
        self.adj[v].iter().map(|&(_, w)| w).sum()
    }

    /// Total weight of edges whose endpoints lie in different blocks.
    pub fn cut_size(&self, assignment: &[usize]) -> usize {
        let mut cut = 0usize;
        for u in 0..self.n {
            for &(v, w) in &self.adj[u] {
                if u < v && assignment[u] != assignment[v] {
                    cut += w as usize;
                }
            }
        }
        cut
    }

    /// Per block: (distinct outside nets entering, distinct inside nets
    /// leaving).
    pub fn io_counts(&self, assignment: &[usize], k: usize) -> Vec<(usize, usize)> {
        let mut io = vec![(0usize, 0usize); k];
        let mut seen = Vec::new();
        for u in 0..self.n {
            let bu = assignment[u];
            seen.clear();
            for &v in &self.succ[u] {
                let bv = assignment[v];
                if bv != bu && !seen.contains(&bv) {
                    seen.push(bv);
                }
            }
            if !seen.is_empty() {
                io[bu].1 += 1;
            }
            for &b in &seen {
                io[b].0 += 1;
            }
        }
        io
    }
}

/// Population standard deviation of per-block total external ports.
pub fn io_imbalance(io: &[(usize, usize)]) -> f64 {
    if io.is_empty() {
        return 0.0;
    }
    let totals: Vec<f64> = io.iter().map(|&(i, o)| (i + o) as f64).collect();
    let mean = totals.iter().sum::<f64>() / totals.len() as f64;
    let var = totals.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / totals.len() as f64;
    var.sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PartitionConfig {
    pub k: usize,
    pub w_cut: f64,
    pub w_io: f64,
    /// `(min, max)` block sizes enforced during greedy balancing; `None`
    /// means `(1, n)`.
    pub size_bounds: Option<(usize, usize)>,
    pub seed: u64,
    pub max_greedy_iters: usize,
    /// Independent k-means restarts; the lowest-cut clustering wins.
    pub kmeans_restarts: usize,
}

impl Default for PartitionConfig {
    fn default() -> Self {
        PartitionConfig {
            k: 2,
            w_cut: 1.0,
            w_io: 0.5,
            size_bounds: None,
            seed: 0,
            max_greedy_iters: 1000,
            kmeans_restarts: 10,
        }
    }
}

impl PartitionConfig {
    pub fn with_k(k: usize) -> Self {
        PartitionConfig {
            k,
            ..Self::default()
        }
    }

    /// Resolved `(min, max)` bounds for a graph with `n` nodes.
    pub fn bounds(&self, n: usize) -> Result<(usize, usize), PartitionError> {
        if self.k == 0 {
            return Err(PartitionError::BadConfig("k must be at least 1".into()));
        }
        if n < self.k {
            return Err(PartitionError::TooFewNodes { nodes: n, k: self.k });
        }
        if self.w_cut < 0.0 || self.w_io < 0.0 {
            return Err(PartitionError::BadConfig("weights must be non-negative".into()));
        }
        let (lo, hi) = self.size_bounds.unwrap_or((1, n));
        if lo < 1 {
            return Err(PartitionError::BadConfig("minimum block size must be >= 1".into()));
        }
        if hi < n.div_ceil(self.k) {
            return Err(PartitionError::BadConfig(format!(
                "maximum block size {hi} is below ceil(n/k) = {}",
                n.div_ceil(self.k)
            )));
        }
        if lo * self.k > n {
            return Err(PartitionError::BadConfig(format!(
                "minimum block size {lo} cannot be met by {n} nodes in {} blocks",
                self.k
            )));
        }
        Ok((lo, hi))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub k: usize,
    pub assignment: Vec<usize>,
    pub cut_size: usize,
    pub io_counts: Vec<(usize, usize)>,
}

impl Partition {
    pub fn from_assignment(g: &CircuitGraph, k: usize, assignment: Vec<usize>) -> Self {
        let cut_size = g.cut_size(&assignment);
        let io_counts = g.io_counts(&assignment, k);
        Partition {
            k,
            assignment,
            cut_size,
            io_counts,
        }
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.k];
        for &b in &self.assignment {
            s[b] += 1;
        }
        s
    }

    pub fn imbalance(&self) -> f64 {
        io_imbalance(&self.io_counts)
    }

    /// Nodes of block `b` in ascending order.
    pub fn members(&self, b: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&v| self.assignment[v] == b)
            .collect()
    }
}

/// Cut sizes recorded after each phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseTrace {
    pub spectral_cut: usize,
    pub kl_cut: usize,
    pub kl_accepted: bool,
    pub final_cut: usize,
    pub moves: Vec<Move>,
}

#[derive(Debug, Clone)]
pub struct PartitionOutcome {
    pub partition: Partition,
    pub trace: PhaseTrace,
}

/// Run all three phases on a netlist.
pub fn partition_pipeline(n: &Netlist, cfg: &PartitionConfig) -> Result<PartitionOutcome, PartitionError> {
    let g = CircuitGraph::from_netlist(n);
    partition_graph(&g, cfg)
}

pub fn partition_graph(g: &CircuitGraph, cfg: &PartitionConfig) -> Result<PartitionOutcome, PartitionError> {
    cfg.bounds(g.len())?;
    let coarse = spectral_coarse(g, cfg)?;
    let refined = kl_refine(g, &coarse);
    let kl_accepted = refined.cut_size < coarse.cut_size;
    let balanced = greedy_balance(g, &refined, cfg)?;
    let trace = PhaseTrace {
        spectral_cut: coarse.cut_size,
        kl_cut: refined.cut_size,
        kl_accepted,
        final_cut: balanced.partition.cut_size,
        moves: balanced.moves,
    };
    Ok(PartitionOutcome {
        partition: balanced.partition,
        trace,
    })
}

#[derive(Serialize, Deserialize)]
struct PartitionDoc {
    k: usize,
    assignment: BTreeMap<String, usize>,
    cut_size: usize,
    io_counts: Vec<(usize, usize)>,
    phase_trace: PhaseTrace,
}

impl PartitionOutcome {
    /// Structured-text document keyed by node name.
    pub fn to_json(&self, n: &Netlist) -> String {
        let doc = PartitionDoc {
            k: self.partition.k,
            assignment: n
                .nodes()
                .iter()
                .zip(&self.partition.assignment)
                .map(|(x, &b)| (x.name.clone(), b))
                .collect(),
            cut_size: self.partition.cut_size,
            io_counts: self.partition.io_counts.clone(),
            phase_trace: self.trace.clone(),
        };
        serde_json::to_string_pretty(&doc).expect("partition document serialises")
    }

    /// Inverse of [`Self::to_json`] against the same netlist.
    pub fn from_json(text: &str, n: &Netlist) -> Result<Self, PartitionError> {
        let doc: PartitionDoc =
            serde_json::from_str(text).map_err(|e| PartitionError::BadConfig(e.to_string()))?;
        let mut assignment = Vec::with_capacity(n.len());
        for node in n.nodes() {
            let b = doc
                .assignment
                .get(&node.name)
                .copied()
                .ok_or_else(|| PartitionError::UnresolvedPort(node.name.clone()))?;
            if b >= doc.k {
                return Err(PartitionError::BadConfig(format!("block {b} out of range")));
            }
            assignment.push(b);
        }
        let g = CircuitGraph::from_netlist(n);
        Ok(PartitionOutcome {
            partition: Partition::from_assignment(&g, doc.k, assignment),
            trace: doc.phase_trace,
        })
    }
}

#[cfg(test)]
pub(crate) mod testutil {
    use super::CircuitGraph;

    pub fn undirected(n: usize, edges: &[(usize, usize)]) -> CircuitGraph {
        CircuitGraph::from_edges(n, edges)
    }

    /// Exhaustive minimum cut over all 2-colourings with block sizes in
    /// `[lo, hi]`.
    pub fn brute_force_bisection(g: &CircuitGraph, lo: usize, hi: usize) -> usize {
        let n = g.len();
        let mut best = usize::MAX;
        for mask in 0u32..(1 << n) {
            let ones = mask.count_ones() as usize;
            if ones < lo || ones > hi || n - ones < lo || n - ones > hi {
                continue;
            }
            let a: Vec<usize> = (0..n).map(|v| ((mask >> v) & 1) as usize).collect();
            best = best.min(g.cut_size(&a));
        }
        best
    }
}
