//! Seeded random combinational netlists for property tests and benchmarks.

use rand::seq::SliceRandom;
use rand::Rng;

use super::{GateType, Netlist, NetlistBuilder, NodeId};

#[derive(Debug, Clone)]
pub struct RandomDagConfig {
    pub inputs: usize,
    pub gates: usize,
    pub max_fanin: usize,
    /// Fan-ins are drawn from the most recent `window` signals, which keeps
    /// the graphs deep rather than flat.
    pub window: usize,
    pub kinds: Vec<GateType>,
}

impl Default for RandomDagConfig {
    fn default() -> Self {
        RandomDagConfig {
            inputs: 6,
            gates: 20,
            max_fanin: 3,
            window: 12,
            kinds: vec![
                GateType::And,
                GateType::Nand,
                GateType::Or,
                GateType::Nor,
                GateType::Xor,
                GateType::Xnor,
                GateType::Not,
                GateType::Buf,
            ],
        }
    }
}

/// Random DAG: every gate without fan-out becomes a primary output.
pub fn random_dag<R: Rng>(rng: &mut R, cfg: &RandomDagConfig) -> Netlist {
    let mut b = NetlistBuilder::new();
    let mut signals: Vec<NodeId> = (0..cfg.inputs).map(|i| b.input(&format!("i{i}"))).collect();
    let mut used = vec![false; cfg.inputs + cfg.gates];
    for g in 0..cfg.gates {
        let kind = *cfg.kinds.choose(rng).expect("non-empty gate kinds");
        let arity = if kind.is_unary() {
            1
        } else {
            rng.gen_range(2..=cfg.max_fanin.max(2))
        };
        let lo = signals.len().saturating_sub(cfg.window);
        let mut fanin = Vec::with_capacity(arity);
        while fanin.len() < arity {
            let pick = signals[rng.gen_range(lo..signals.len())];
            if !fanin.contains(&pick) || signals.len() - lo < arity {
                fanin.push(pick);
            }
        }
        for f in &fanin {
            used[f.0] = true;
        }
        signals.push(b.gate(&format!("g{g}"), kind, &fanin));
    }
    let mut any = false;
    for id in cfg.inputs..signals.len() {
        if !used[id] {
            b.output_node(NodeId(id));
            any = true;
        }
    }
    if !any {
        if let Some(&last) = signals.last() {
            b.output_node(last);
        }
    }
    b.build().expect("random DAG is valid by construction")
}
