use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ulofdma_core::scheduler::{dpp_epoch, srm_epoch};
use ulofdma_core::*;

fn random_rates(k: usize, n: usize, d_max: f64, seed: u64) -> (PhyConfig, RateTable) {
    let phy = PhyConfig { n_rus: n, ..PhyConfig::default() };
    let mcs = McsTable::default();
    let params = TopologyParams { d_max_m: d_max, ..TopologyParams::default() };
    let topo = generate_topology(k, &params, seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let state = sample_channel(k, n, &mut rng);
    let rates = rate_table(&state, &topo, &phy, &mcs).unwrap();
    (phy, rates)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dyadic_v_scaling_at_rest_keeps_assignment(
        k in 1usize..10, n in 1usize..10, seed in any::<u64>(),
        v in 0.5f64..500.0, e in -8i32..8,
    ) {
        let (phy, rates) = random_rates(k, n, 15.0, seed);
        let mcs = McsTable::default();
        let powers = phy.power_levels_mw();
        let rest = QueueState::zeros(k);
        let a = PolicyConfig::homogeneous(PolicyKind::Esrm, k, v, 26_000.0, 25.0, &phy, &mcs);
        let b = PolicyConfig { v: v * 2f64.powi(e), ..a.clone() };
        let da = dpp_epoch(&rest, &rates, &powers, &a).unwrap();
        let db = dpp_epoch(&rest, &rates, &powers, &b).unwrap();
        prop_assert_eq!(da.action.pairs(), db.action.pairs());
    }

    #[test]
    fn v_scaling_at_rest_stays_optimal(
        k in 1usize..10, n in 1usize..10, seed in any::<u64>(),
        v in 0.5f64..500.0, c in 0.01f64..100.0,
    ) {
        let (phy, rates) = random_rates(k, n, 15.0, seed);
        let mcs = McsTable::default();
        let powers = phy.power_levels_mw();
        let rest = QueueState::zeros(k);
        let a = PolicyConfig::homogeneous(PolicyKind::Esrm, k, v, 26_000.0, 25.0, &phy, &mcs);
        let b = PolicyConfig { v: v * c, ..a.clone() };
        let da = dpp_epoch(&rest, &rates, &powers, &a).unwrap();
        let db = dpp_epoch(&rest, &rates, &powers, &b).unwrap();
        // Rates are whole bits, so equal-valued selections tie exactly.
        let total = |d: &ulofdma_core::scheduler::EpochDecision| d.action.rate.iter().sum::<f64>();
        prop_assert_eq!(total(&da), total(&db));
    }

    #[test]
    fn esrm_at_rest_matches_sum_rate(k in 1usize..12, n in 1usize..10, seed in any::<u64>()) {
        let (phy, rates) = random_rates(k, n, 15.0, seed);
        let mcs = McsTable::default();
        let powers = phy.power_levels_mw();
        let cfg = PolicyConfig::homogeneous(PolicyKind::Esrm, k, 100.0, 26_000.0, 25.0, &phy, &mcs);
        let esrm = dpp_epoch(&QueueState::zeros(k), &rates, &powers, &cfg).unwrap();
        let srm = srm_epoch(&rates, &powers);
        prop_assert_eq!(esrm.action.pairs(), srm.pairs());
        prop_assert_eq!(&esrm.action.rate, &srm.rate);
    }

    #[test]
    fn every_policy_emits_feasible_actions(
        k in 1usize..12, seed in any::<u64>(), policy in prop::sample::select(PolicyKind::ALL.to_vec()),
    ) {
        let phy = PhyConfig::default();
        let mcs = McsTable::default();
        let cfg = PolicyConfig::homogeneous(policy, k, 100.0, 20_000.0, 25.0, &phy, &mcs);
        let mut sched = Scheduler::new(cfg, &phy, seed).unwrap();
        let topo = generate_topology(k, &TopologyParams::default(), seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let powers = phy.power_levels_mw();
        for _ in 0..40 {
            let state = sample_channel(k, phy.n_rus, &mut rng);
            let rates = rate_table(&state, &topo, &phy, &mcs).unwrap();
            let d = sched.step(&rates).unwrap();
            prop_assert!(d.action.is_feasible(phy.n_rus, &powers));
            for s in 0..k {
                if d.action.ru_of(s).is_none() {
                    prop_assert_eq!(d.action.rate[s], 0.0);
                    prop_assert_eq!(d.action.power[s], 0.0);
                }
            }
            prop_assert!(d.queues_after.all_nonnegative());
        }
    }
}
