use proptest::prelude::*;
use rrm_core::baselines::{greedy, oracle, random_policy, static_daily, StaticOptions};
use rrm_core::environment::{evaluate, NeighborhoodModel};
use rrm_core::topology::{random_network, Band};

#[test]
fn random_policy_frequencies_are_uniform() {
    let net = random_network(1, Band::Band2G4, 1.0, 0).unwrap();
    let space = Band::Band2G4.action_space();
    let mut counts = vec![0usize; space.len()];
    let draws = 10_000;
    for seed in 0..draws {
        let a = random_policy(&net, seed).assignments[0];
        counts[space.iter().position(|&s| s == a).unwrap()] += 1;
    }
    let expected = draws as f64 / space.len() as f64;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    // 99.9th percentile of chi-square with 5 degrees of freedom
    assert!(chi2 < 20.515, "chi2 = {chi2}, counts {counts:?}");
}

#[test]
fn random_is_worse_than_greedy_on_most_five_ap_instances() {
    let env = NeighborhoodModel::default();
    let total = 200;
    let mut worse = 0;
    for seed in 0..total {
        let net = random_network(5, Band::Band2G4, 3.0, seed).unwrap();
        let g = evaluate(&net, &greedy(&net, &env), &env).unwrap().regret;
        let r: f64 = (0..50)
            .map(|k| evaluate(&net, &random_policy(&net, seed * 1000 + k), &env).unwrap().regret)
            .sum::<f64>()
            / 50.0;
        if r >= g {
            worse += 1;
        }
    }
    assert!(worse * 100 >= total * 95, "{worse}/{total}");
}

#[test]
fn static_daily_of_one_slot_is_greedy() {
    let env = NeighborhoodModel::default();
    for seed in 0..20 {
        let net = random_network(6, Band::Band5G, 3.0, seed).unwrap();
        let s = static_daily(std::slice::from_ref(&net), &env, StaticOptions::default()).unwrap();
        assert_eq!(s, greedy(&net, &env));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn oracle_is_never_beaten(seed in any::<u64>(), n in 1usize..=4, density in 0.5f64..5.0) {
        let env = NeighborhoodModel::default();
        let net = random_network(n, Band::Band2G4, density, seed).unwrap();
        let (_, best) = oracle(&net, &env).unwrap();
        let g = evaluate(&net, &greedy(&net, &env), &env).unwrap().regret;
        let r = evaluate(&net, &random_policy(&net, seed), &env).unwrap().regret;
        prop_assert!(best <= g && best <= r);
    }
}
