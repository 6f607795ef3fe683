use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::net::SelectorNet;
use super::TnetError;
use crate::netlist::{CamouflagedNetlist, Cell, GateSpec, GateType, NodeId, Port};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractStats {
    /// NAND nodes kept after pruning.
    pub nodes: usize,
    pub pruned: usize,
    /// Node slots of kept nodes plus output slots.
    pub slots: usize,
    /// Slots whose true source is not an apparent source of the same sink.
    pub violations: usize,
}

impl ExtractStats {
    pub fn violation_fraction(&self) -> f64 {
        if self.slots == 0 {
            0.0
        } else {
            self.violations as f64 / self.slots as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Extracted {
    pub camo: CamouflagedNetlist,
    pub stats: ExtractStats,
}

/// Hard selections of both parameter sets with containment bookkeeping.
struct Readout {
    apparent: Vec<Vec<usize>>,
    truth: Vec<Vec<usize>>,
    node_violations: Vec<usize>,
    out_sel: Vec<usize>,
    out_violations: usize,
    live: Vec<bool>,
}

fn readout(net: &SelectorNet) -> Readout {
    let s0 = net.selections(&net.theta0);
    let s1 = net.selections(&net.theta1);
    let nodes = net.num_nodes();
    let npi = net.num_pis;
    let mut apparent: Vec<Vec<usize>> = Vec::with_capacity(nodes);
    let mut truth: Vec<Vec<usize>> = Vec::with_capacity(nodes);
    let mut node_violations = vec![0usize; nodes];
    for i in 0..nodes {
        let mut app = vec![s0[2 * i], s0[2 * i + 1]];
        let tru = vec![s1[2 * i], s1[2 * i + 1]];
        for &t in &tru {
            if !app.contains(&t) {
                node_violations[i] += 1;
                app.push(t);
            }
        }
        apparent.push(app);
        truth.push(tru);
    }
    let out_sel: Vec<usize> = (0..net.num_pos).map(|o| s1[2 * nodes + o]).collect();
    let out_violations = (0..net.num_pos).filter(|&o| s0[2 * nodes + o] != out_sel[o]).count();

    let mut live = vec![false; npi + nodes];
    let mut stack: Vec<usize> = out_sel.clone();
    stack.extend((0..net.num_pos).map(|o| s0[2 * nodes + o]));
    while let Some(s) = stack.pop() {
        if live[s] {
            continue;
        }
        live[s] = true;
        if s >= npi {
            stack.extend(apparent[s - npi].iter().copied());
        }
    }
    Readout {
        apparent,
        truth,
        node_violations,
        out_sel,
        out_violations,
        live,
    }
}

impl Readout {
    fn stats(&self, npi: usize) -> ExtractStats {
        let mut stats = ExtractStats {
            nodes: 0,
            pruned: 0,
            slots: self.out_sel.len(),
            violations: self.out_violations,
        };
        for (i, v) in self.node_violations.iter().enumerate() {
            if self.live[npi + i] {
                stats.nodes += 1;
                stats.slots += 2;
                stats.violations += v;
            } else {
                stats.pruned += 1;
            }
        }
        stats
    }
}

/// The statistics `extract` would report, without building the netlist.
pub fn extract_stats(net: &SelectorNet) -> ExtractStats {
    readout(net).stats(net.num_pis)
}

/// Reads the hard circuits out of `net`.
///
/// Apparent fan-in comes from the θ0 argmax and true fan-in from the θ1
/// argmax. A true source missing from the apparent fan-in is a containment
/// violation; it is appended to the apparent gate as an extra NAND pin so the
/// cell stays well formed, and counted. Outputs follow θ1; an output whose θ0
/// choice differs is counted too. Nodes outside the apparent fan-in cone of
/// both output selections are dropped.
pub fn extract(net: &SelectorNet, pi_names: &[String], po_names: &[String]) -> Result<Extracted, TnetError> {
    if pi_names.len() != net.num_pis || po_names.len() != net.num_pos {
        return Err(TnetError::Shape(format!(
            "names for {} inputs and {} outputs, net has {} and {}",
            pi_names.len(),
            po_names.len(),
            net.num_pis,
            net.num_pos
        )));
    }
    let nodes = net.num_nodes();
    let npi = net.num_pis;
    let r = readout(net);
    let stats = r.stats(npi);
    let mut taken: HashSet<String> = pi_names.iter().cloned().collect();
    let mut new_id = vec![usize::MAX; npi + nodes];
    let mut cells = Vec::new();
    for (i, name) in pi_names.iter().enumerate() {
        new_id[i] = i;
        cells.push(Cell::plain(name, GateType::Input, Vec::new()));
    }
    for i in 0..nodes {
        if !r.live[npi + i] {
            continue;
        }
        let mut name = format!("nand{i}");
        let mut k = 0;
        while taken.contains(&name) {
            k += 1;
            name = format!("nand{i}_{k}");
        }
        taken.insert(name.clone());
        let map = |v: &[usize]| -> Vec<NodeId> { v.iter().map(|&s| NodeId(new_id[s])).collect() };
        let cell = Cell::covert(
            &name,
            GateSpec::new(GateType::Nand, map(&r.apparent[i])),
            GateSpec::new(GateType::Nand, map(&r.truth[i])),
        );
        new_id[npi + i] = cells.len();
        cells.push(cell);
    }
    let outputs = r
        .out_sel
        .iter()
        .zip(po_names)
        .map(|(&s, name)| Port {
            node: NodeId(new_id[s]),
            name: name.clone(),
        })
        .collect();
    let camo = CamouflagedNetlist::new(cells, (0..npi).map(NodeId).collect(), outputs)?;
    Ok(Extracted { camo, stats })
}
