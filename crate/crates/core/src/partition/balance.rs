use serde::{Deserialize, Serialize};

use super::{io_imbalance, CircuitGraph, Partition, PartitionConfig, PartitionError};

/// Moves with gain at or below this are treated as non-improving.
const GAIN_EPS: f64 = 1e-9;

/// One executed phase-3 move. Deltas are `after - before`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Move {
    pub node: usize,
    pub from: usize,
    pub to: usize,
    pub delta_cut: i64,
    pub delta_imbalance: f64,
    pub gain: f64,
    /// Size-bound repair move, executed regardless of gain.
    #[serde(default)]
    pub forced: bool,
}

#[derive(Debug, Clone)]
pub struct BalanceOutcome {
    pub partition: Partition,
    pub moves: Vec<Move>,
}

/// Incrementally maintained assignment with per-block port counts.
struct State<'g> {
    g: &'g CircuitGraph,
    assign: Vec<usize>,
    sizes: Vec<usize>,
    /// `succ_in[u]`: (block, distinct successors of `u` in that block).
    succ_in: Vec<Vec<(usize, u32)>>,
    io: Vec<(i64, i64)>,
}

impl<'g> State<'g> {
    fn new(g: &'g CircuitGraph, p: &Partition) -> Self {
        let mut sizes = vec![0; p.k];
        for &b in &p.assignment {
            sizes[b] += 1;
        }
        let mut succ_in = vec![Vec::new(); g.len()];
        for (u, slot) in succ_in.iter_mut().enumerate() {
            for &v in g.successors(u) {
                bump(slot, p.assignment[v], 1);
            }
        }
        let mut s = State {
            g,
            assign: p.assignment.clone(),
            sizes,
            succ_in,
            io: vec![(0, 0); p.k],
        };
        for u in 0..g.len() {
            s.contrib(u, 1);
        }
        s
    }

    fn contrib(&mut self, u: usize, sign: i64) {
        let own = self.assign[u];
        let mut leaves = false;
        for &(b, c) in &self.succ_in[u] {
            if b != own && c > 0 {
                leaves = true;
                self.io[b].0 += sign;
            }
        }
        if leaves {
            self.io[own].1 += sign;
        }
    }

    fn move_node(&mut self, v: usize, to: usize) {
        let from = self.assign[v];
        let preds = self.g.predecessors(v);
        self.contrib(v, -1);
        for &u in preds {
            self.contrib(u, -1);
        }
        self.assign[v] = to;
        self.sizes[from] -= 1;
        self.sizes[to] += 1;
        for &u in preds {
            bump(&mut self.succ_in[u], from, -1);
            bump(&mut self.succ_in[u], to, 1);
        }
        self.contrib(v, 1);
        for &u in preds {
            self.contrib(u, 1);
        }
    }

    fn imbalance(&self) -> f64 {
        let io: Vec<(usize, usize)> = self.io.iter().map(|&(i, o)| (i as usize, o as usize)).collect();
        io_imbalance(&io)
    }

    /// Cut change (after - before) for moving `v` to block `to`.
    fn delta_cut(&self, v: usize, to: usize) -> i64 {
        let from = self.assign[v];
        let mut d = 0i64;
        for &(u, w) in self.g.neighbors(v) {
            if self.assign[u] == from {
                d += w as i64;
            } else if self.assign[u] == to {
                d -= w as i64;
            }
        }
        d
    }

    fn evaluate(&mut self, v: usize, to: usize, cfg: &PartitionConfig, imb_before: f64) -> Move {
        let from = self.assign[v];
        let delta_cut = self.delta_cut(v, to);
        self.move_node(v, to);
        let imb_after = self.imbalance();
        self.move_node(v, from);
        let delta_imbalance = imb_after - imb_before;
        Move {
            node: v,
            from,
            to,
            delta_cut,
            delta_imbalance,
            gain: cfg.w_cut * (-delta_cut as f64) + cfg.w_io * (-delta_imbalance),
            forced: false,
        }
    }

    fn neighbor_blocks(&self, v: usize) -> Vec<usize> {
        let own = self.assign[v];
        let mut bs: Vec<usize> = self
            .g
            .neighbors(v)
            .iter()
            .map(|&(u, _)| self.assign[u])
            .filter(|&b| b != own)
            .collect();
        bs.sort_unstable();
        bs.dedup();
        bs
    }
}

fn bump(slot: &mut Vec<(usize, u32)>, block: usize, by: i32) {
    if let Some(e) = slot.iter_mut().find(|e| e.0 == block) {
        e.1 = (e.1 as i32 + by) as u32;
    } else {
        debug_assert!(by > 0);
        slot.push((block, by as u32));
    }
}

fn better(best: &Option<Move>, m: &Move) -> bool {
    best.as_ref().map_or(true, |b| m.gain > b.gain)
}

/// Phase 3: repeatedly execute the single best positive-gain boundary move.
/// Blocks outside the size bounds are first repaired with forced moves.
pub fn greedy_balance(
    g: &CircuitGraph,
    p: &Partition,
    cfg: &PartitionConfig,
) -> Result<BalanceOutcome, PartitionError> {
    let (lo, hi) = cfg.bounds(g.len())?;
    let mut st = State::new(g, p);
    let mut moves = Vec::new();
    if p.k < 2 {
        return Ok(BalanceOutcome {
            partition: p.clone(),
            moves,
        });
    }

    loop {
        let over = (0..p.k).find(|&b| st.sizes[b] > hi);
        let under = (0..p.k).find(|&b| st.sizes[b] < lo);
        if over.is_none() && under.is_none() {
            break;
        }
        let imb = st.imbalance();
        let mut best: Option<Move> = None;
        for v in 0..g.len() {
            let from = st.assign[v];
            for to in 0..p.k {
                if to == from {
                    continue;
                }
                let legal = match (over, under) {
                    (Some(o), _) => from == o && st.sizes[to] < hi,
                    (None, Some(u)) => to == u && st.sizes[from] > lo,
                    _ => false,
                };
                if legal {
                    let m = st.evaluate(v, to, cfg, imb);
                    if better(&best, &m) {
                        best = Some(m);
                    }
                }
            }
        }
        let mut m = best.expect("feasible bounds always admit a repair move");
        m.forced = true;
        st.move_node(m.node, m.to);
        moves.push(m);
    }

    for _ in 0..cfg.max_greedy_iters {
        let imb = st.imbalance();
        let mut best: Option<Move> = None;
        for v in 0..g.len() {
            let from = st.assign[v];
            if st.sizes[from] <= lo {
                continue;
            }
            for to in st.neighbor_blocks(v) {
                if st.sizes[to] >= hi {
                    continue;
                }
                let m = st.evaluate(v, to, cfg, imb);
                if better(&best, &m) {
                    best = Some(m);
                }
            }
        }
        match best {
            Some(m) if m.gain > GAIN_EPS => {
                st.move_node(m.node, m.to);
                moves.push(m);
            }
            _ => break,
        }
    }
    Ok(BalanceOutcome {
        partition: Partition::from_assignment(g, p.k, st.assign),
        moves,
    })
}

#[cfg(test)]
mod tests {
    use super::super::testutil::*;
    use super::*;

    #[test]
    fn incremental_io_matches_recount() {
        let g = undirected(6, &[(0, 2), (1, 2), (2, 3), (2, 4), (4, 5), (1, 5)]);
        let p = Partition::from_assignment(&g, 3, vec![0, 1, 0, 2, 1, 2]);
        let mut st = State::new(&g, &p);
        for (v, to) in [(2, 1), (5, 0), (0, 2), (2, 0)] {
            st.move_node(v, to);
            let want = g.io_counts(&st.assign, 3);
            let got: Vec<(usize, usize)> = st.io.iter().map(|&(i, o)| (i as usize, o as usize)).collect();
            assert_eq!(got, want);
        }
    }

    #[test]
    fn star_hub_moves_to_leaves() {
        // hub 0 isolated in block 1; leaves 1..=5 in block 0.
        let g = undirected(7, &[(0, 1), (0, 2), (0, 3), (0, 4), (0, 5), (6, 0)]);
        let p = Partition::from_assignment(&g, 2, vec![1, 0, 0, 0, 0, 0, 1]);
        assert_eq!(p.cut_size, 5);
        let cfg = PartitionConfig::with_k(2);
        let out = greedy_balance(&g, &p, &cfg).unwrap();
        assert_eq!(out.moves[0].node, 0);
        assert_eq!(out.moves[0].delta_cut, -4);
        assert!(out.partition.cut_size < p.cut_size);
        assert_eq!(out.partition.cut_size, 1);
    }

    #[test]
    fn optimal_balanced_partition_stays() {
        let g = undirected(6, &[(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5), (2, 3)]);
        let p = Partition::from_assignment(&g, 2, vec![0, 0, 0, 1, 1, 1]);
        let out = greedy_balance(&g, &p, &PartitionConfig::with_k(2)).unwrap();
        assert!(out.moves.is_empty());
        assert_eq!(out.partition, p);
    }

    #[test]
    fn pure_cut_weighting_is_monotone() {
        let g = undirected(8, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 6), (6, 7), (0, 7)]);
        let p = Partition::from_assignment(&g, 2, vec![0, 1, 0, 1, 0, 0, 1, 1]);
        let cfg = PartitionConfig {
            w_io: 0.0,
            ..PartitionConfig::with_k(2)
        };
        let out = greedy_balance(&g, &p, &cfg).unwrap();
        assert!(out.partition.cut_size <= p.cut_size);
        for m in &out.moves {
            assert!(m.delta_cut < 0);
        }
    }

    #[test]
    fn size_bounds_are_repaired_and_respected() {
        let g = undirected(6, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5)]);
        let p = Partition::from_assignment(&g, 2, vec![0, 0, 0, 0, 0, 1]);
        let cfg = PartitionConfig {
            size_bounds: Some((2, 4)),
            ..PartitionConfig::with_k(2)
        };
        let out = greedy_balance(&g, &p, &cfg).unwrap();
        assert!(out.moves.iter().any(|m| m.forced));
        for s in out.partition.block_sizes() {
            assert!((2..=4).contains(&s));
        }
        assert_eq!(out.partition.cut_size, 1);
    }
}
