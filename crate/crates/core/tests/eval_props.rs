use mimic_core::eval::{decamo_resilience, deception_score, functional_accuracy, overheads, DeceptionInput};
use mimic_core::matcher::{deploy_covert, match_graphs, CostConfig};
use mimic_core::netlist::random::{random_dag, RandomDagConfig};
use mimic_core::netlist::{CamouflagedNetlist, Netlist};
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

fn camouflaged(sa: u64, sf: u64, ga: usize, gf: usize) -> (CamouflagedNetlist, Netlist) {
    let a = netlist(sa, 5, ga);
    let f = netlist(sf, 4, gf);
    let r = match_graphs(&a, &f, &CostConfig::default()).unwrap();
    (deploy_covert(&a, &f, &r.mapping).unwrap(), f)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn deception_is_relative_gain_with_matching_sign(e in 1e-6f64..1.0, m in 0.0f64..1.0) {
        let s = deception_score(DeceptionInput { f1_expose: e, f1_mimicry: m });
        let v = s.score.unwrap();
        prop_assert_eq!(v, (m - e) / e);
        prop_assert_eq!(v > 0.0, m > e);
        prop_assert_eq!(v < 0.0, m < e);
    }

    #[test]
    fn identity_overheads_are_unity(seed in any::<u64>(), inputs in 1usize..8, gates in 1usize..40) {
        let n = netlist(seed, inputs, gates);
        let o = overheads(&CamouflagedNetlist::identity(&n), &n).unwrap();
        prop_assert_eq!((o.area_ratio, o.power_ratio, o.delay_ratio), (1.0, 1.0, 1.0));
    }

    #[test]
    fn matcher_outputs_are_fully_accurate(sa in any::<u64>(), sf in any::<u64>(), ga in 1usize..30, gf in 1usize..30) {
        let (camo, f) = camouflaged(sa, sf, ga, gf);
        let acc = functional_accuracy(&camo, &f, 256, 0).unwrap();
        prop_assert_eq!(acc.matching_bits, acc.total_bits);
    }

    #[test]
    fn revealing_cells_never_adds_consistent_keys(
        sa in any::<u64>(),
        sf in any::<u64>(),
        ga in 1usize..20,
        gf in 1usize..20,
        pick in any::<u64>(),
    ) {
        let (camo, f) = camouflaged(sa, sf, ga, gf);
        let covert = camo.covert_cells();
        prop_assume!(covert.len() <= 10);
        let before = decamo_resilience(&camo, &f, 10, 256, 0).unwrap();
        prop_assert!(before.consistent_keys >= 1);
        prop_assert!(before.true_key_consistent);
        let chosen: Vec<_> = covert.iter().enumerate().filter(|(i, _)| (pick >> i) & 1 == 1).map(|(_, &c)| c).collect();
        let after = decamo_resilience(&camo.reveal(&chosen), &f, 10, 256, 0).unwrap();
        prop_assert!(after.consistent_keys >= 1);
        prop_assert!(after.consistent_keys <= before.consistent_keys);
        prop_assert_eq!(after.covert_cells, covert.len() - chosen.len());
    }

    #[test]
    fn sampled_metrics_reproduce(sa in any::<u64>(), sf in any::<u64>(), seed in any::<u64>()) {
        let (camo, f) = camouflaged(sa, sf, 20, 20);
        let x = functional_accuracy(&camo, &f, 128, seed).unwrap();
        let y = functional_accuracy(&camo, &f, 128, seed).unwrap();
        prop_assert_eq!(x, y);
    }
}
