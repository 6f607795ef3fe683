use mimic_core::netlist::random::{random_dag, RandomDagConfig};
use mimic_core::netlist::{CamouflagedNetlist, Netlist, TruthTable};
use mimic_core::partition::{
    extract_pieces, greedy_balance, io_imbalance, kl_refine, partition_pipeline, recombine, spectral_coarse,
    CircuitGraph, Partition, PartitionConfig,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn netlist(seed: u64, inputs: usize, gates: usize) -> Netlist {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_dag(
        &mut rng,
        &RandomDagConfig {
            inputs,
            gates,
            ..Default::default()
        },
    )
}

fn recount(g: &CircuitGraph, assign: &[usize]) -> usize {
    let mut cut = 0;
    for u in 0..g.len() {
        for &(v, w) in g.neighbors(u) {
            if u < v && assign[u] != assign[v] {
                cut += w as usize;
            }
        }
    }
    cut
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn coarse_partition_covers_every_node(seed in any::<u64>(), gates in 6usize..50, k in 2usize..5) {
        let n = netlist(seed, 4, gates);
        let g = CircuitGraph::from_netlist(&n);
        let p = spectral_coarse(&g, &PartitionConfig { k, seed, ..Default::default() }).unwrap();
        prop_assert_eq!(p.assignment.len(), g.len());
        prop_assert!(p.assignment.iter().all(|&b| b < k));
        prop_assert!(p.block_sizes().iter().all(|&s| s > 0));
        prop_assert_eq!(p.cut_size, recount(&g, &p.assignment));
    }

    #[test]
    fn kl_never_raises_the_cut(
        seed in any::<u64>(),
        gates in 4usize..40,
        k in 2usize..4,
        labels in prop::collection::vec(0usize..4, 64),
    ) {
        let n = netlist(seed, 3, gates);
        let g = CircuitGraph::from_netlist(&n);
        let assign: Vec<usize> = (0..g.len()).map(|v| labels[v % labels.len()] % k).collect();
        let p = Partition::from_assignment(&g, k, assign);
        let r = kl_refine(&g, &p);
        prop_assert_eq!(r.cut_size, recount(&g, &r.assignment));
        prop_assert!(r.cut_size <= p.cut_size);
        if r.cut_size == p.cut_size {
            prop_assert_eq!(r, p);
        }
    }

    #[test]
    fn balancing_moves_replay_with_positive_gain(
        seed in any::<u64>(),
        gates in 6usize..50,
        k in 2usize..5,
        w_io in 0.0f64..2.0,
    ) {
        let n = netlist(seed, 4, gates);
        let g = CircuitGraph::from_netlist(&n);
        let cfg = PartitionConfig { k, seed, w_io, ..Default::default() };
        let start = kl_refine(&g, &spectral_coarse(&g, &cfg).unwrap());
        let out = greedy_balance(&g, &start, &cfg).unwrap();
        let mut assign = start.assignment.clone();
        for m in &out.moves {
            prop_assert_eq!(assign[m.node], m.from);
            let cut0 = recount(&g, &assign) as i64;
            let imb0 = io_imbalance(&g.io_counts(&assign, k));
            assign[m.node] = m.to;
            let cut1 = recount(&g, &assign) as i64;
            let imb1 = io_imbalance(&g.io_counts(&assign, k));
            prop_assert_eq!(m.delta_cut, cut1 - cut0);
            prop_assert!((m.delta_imbalance - (imb1 - imb0)).abs() < 1e-9);
            let gain = cfg.w_cut * (cut0 - cut1) as f64 + cfg.w_io * (imb0 - imb1);
            prop_assert!(m.forced || gain > 0.0, "move {:?} recomputes to gain {}", m, gain);
        }
        prop_assert_eq!(&assign, &out.partition.assignment);
        let (lo, hi) = cfg.bounds(g.len()).unwrap();
        prop_assert!(out.partition.block_sizes().iter().all(|&s| (lo..=hi).contains(&s)));
    }

    #[test]
    fn pipeline_is_deterministic_and_monotone(seed in any::<u64>(), gates in 6usize..50, k in 2usize..5) {
        let n = netlist(seed, 4, gates);
        let cfg = PartitionConfig { k, seed, w_io: 0.0, ..Default::default() };
        let a = partition_pipeline(&n, &cfg).unwrap();
        let b = partition_pipeline(&n, &cfg).unwrap();
        prop_assert_eq!(&a.partition, &b.partition);
        prop_assert!(a.trace.spectral_cut >= a.trace.kl_cut);
        prop_assert!(a.trace.kl_cut >= a.trace.final_cut);
        prop_assert_eq!(a.partition.cut_size, a.trace.final_cut);
    }

    #[test]
    fn identity_pieces_recombine_losslessly(seed in any::<u64>(), inputs in 1usize..10, gates in 2usize..50, k in 1usize..5) {
        let n = netlist(seed, inputs, gates);
        let k = k.min(n.len());
        let p = if k == 1 {
            Partition::from_assignment(&CircuitGraph::from_netlist(&n), 1, vec![0; n.len()])
        } else {
            partition_pipeline(&n, &PartitionConfig { k, seed, ..Default::default() }).unwrap().partition
        };
        let (pieces, map) = extract_pieces(&n, &p);
        let camo: Vec<CamouflagedNetlist> = pieces.iter().map(|pc| CamouflagedNetlist::identity(&pc.netlist)).collect();
        let whole = recombine(&camo, &map).unwrap();
        let f = whole.function_view().unwrap();
        prop_assert_eq!(f.input_names(), n.input_names());
        prop_assert_eq!(f.output_names(), n.output_names());
        prop_assert_eq!(TruthTable::of(&f).unwrap(), TruthTable::of(&n).unwrap());
    }
}
