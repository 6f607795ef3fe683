use mimic_core::netlist::GateType;
use mimic_core::tnet::{
    extract, loss_cryptic, train, ForwardMode, MimicryDataset, SelectorNet, TrainConfig,
};
use mimic_core::netlist::random::{random_dag, RandomDagConfig};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `(offset, len)` of every selector slot: two per node, layer by layer,
/// then one per output.
fn slot_ranges(pis: usize, pos: usize, layers: &[usize]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let (mut offset, mut avail) = (0, pis);
    for &size in layers {
        for _ in 0..2 * size {
            out.push((offset, avail));
            offset += avail;
        }
        avail += size;
    }
    for _ in 0..pos {
        out.push((offset, avail));
        offset += avail;
    }
    out
}

fn shape() -> impl Strategy<Value = (usize, usize, Vec<usize>)> {
    (1usize..5, 1usize..3, prop::collection::vec(1usize..4, 1..4))
}

fn names(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

fn bits(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| if rng.gen::<bool>() { 1.0 } else { 0.0 }).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hard_endpoints_read_only_their_own_parameters((pis, pos, layers) in shape(), seed in any::<u64>()) {
        let mut net = SelectorNet::random(pis, pos, &layers, 1.0, seed).unwrap();
        net.theta1 = SelectorNet::random(pis, pos, &layers, 1.0, seed ^ 1).unwrap().theta0;
        let x = bits(seed, pis);
        let y0 = net.forward(&x, 0.0, ForwardMode::Hard, 0).unwrap();
        let y1 = net.forward(&x, 1.0, ForwardMode::Hard, 0).unwrap();
        let mut other = net.clone();
        other.theta1 = SelectorNet::random(pis, pos, &layers, 1.0, seed ^ 2).unwrap().theta0;
        prop_assert_eq!(&y0, &other.forward(&x, 0.0, ForwardMode::Hard, 0).unwrap());
        let mut other = net.clone();
        other.theta0 = SelectorNet::random(pis, pos, &layers, 1.0, seed ^ 3).unwrap().theta0;
        prop_assert_eq!(&y1, &other.forward(&x, 1.0, ForwardMode::Hard, 0).unwrap());
    }

    #[test]
    fn saturated_soft_forward_matches_hard((pis, pos, layers) in shape(), seed in any::<u64>(), p in prop::sample::select(vec![0.0, 1.0])) {
        let mut net = SelectorNet::new(pis, pos, &layers).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (off, len) in slot_ranges(pis, pos, &layers) {
            let hot0 = rng.gen_range(0..len);
            let hot1 = rng.gen_range(0..len);
            net.theta0[off + hot0] = 20.0;
            net.theta1[off + hot1] = 20.0;
        }
        let x = bits(seed, pis);
        let soft = net.forward(&x, p, ForwardMode::Soft, 0).unwrap();
        let hard = net.forward(&x, p, ForwardMode::Hard, 0).unwrap();
        for (s, h) in soft.iter().zip(&hard) {
            prop_assert!((s - h).abs() < 1e-6, "soft {} vs hard {}", s, h);
        }
    }

    #[test]
    fn zero_cryptic_loss_means_no_violations(
        (pis, pos, layers) in shape(),
        seed in any::<u64>(),
        shifts in prop::collection::vec(-3.0f64..3.0, 64),
    ) {
        // Shifting a slot's logits by a constant leaves its distribution unchanged.
        let mut net = SelectorNet::random(pis, pos, &layers, 1.0, seed).unwrap();
        for (i, (off, len)) in slot_ranges(pis, pos, &layers).into_iter().enumerate() {
            for v in &mut net.theta1[off..off + len] {
                *v += shifts[i % shifts.len()];
            }
        }
        let c = loss_cryptic(&net);
        prop_assert!(c < 1e-12, "cryptic {}", c);
        let x = extract(&net, &names("i", pis), &names("o", pos)).unwrap();
        prop_assert_eq!(x.stats.violations, 0);
    }

    #[test]
    fn extraction_yields_nand_only_views((pis, pos, layers) in shape(), seed in any::<u64>()) {
        let mut net = SelectorNet::random(pis, pos, &layers, 1.0, seed).unwrap();
        net.theta1 = SelectorNet::random(pis, pos, &layers, 1.0, seed ^ 1).unwrap().theta0;
        let x = extract(&net, &names("i", pis), &names("o", pos)).unwrap();
        let (app, fun) = x.camo.views().unwrap();
        for view in [&app, &fun] {
            prop_assert!(view.nodes().iter().all(|n| matches!(n.kind, GateType::Input | GateType::Nand)));
            prop_assert_eq!(view.outputs().len(), pos);
        }
        prop_assert!(x.stats.violations <= x.stats.slots);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn training_is_a_function_of_seed_config_and_data(sa in any::<u64>(), sf in any::<u64>(), seed in any::<u64>()) {
        let dag = |s: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            random_dag(&mut rng, &RandomDagConfig { inputs: 3, gates: 5, ..Default::default() })
        };
        let ds = MimicryDataset::build(&dag(sa), &dag(sf), 16, 0, 0).unwrap();
        for mode in [ForwardMode::Soft, ForwardMode::Gumbel] {
            let cfg = TrainConfig { epochs: 5, seed, mode, ..Default::default() };
            let a = train(&ds, &cfg).unwrap();
            let b = train(&ds, &cfg).unwrap();
            prop_assert_eq!(a.trace, b.trace);
            prop_assert_eq!(a.net, b.net);
        }
    }
}
