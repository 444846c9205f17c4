mod common;

use rand::seq::SliceRandom;
use rrm_core::agent::{
    committed_load, decode_order, decode_sequential, encode_features, init_model, step_distributions,
    DecodeMode, ModelDims,
};
use rrm_core::environment::{observe, CouplingTable, NeighborhoodModel, Observation, RadioView};
use rrm_core::rng::stream;
use rrm_core::topology::{random_network, Band, ChannelAssignment, Network};

#[test]
fn gradients_match_finite_differences() {
    for seed in 100..103 {
        let (err, count, at) = common::finite_difference_error(seed, 1e-4, 1e-10);
        assert!(count > 6000);
        assert!(err < 1e-4, "seed {seed}: relative error {err:e} at {at}");
    }
}

#[test]
fn uniform_logits_sample_uniformly() {
    let net = Network::new(Band::Band2G4, vec![0.0, -60.0, -60.0, 0.0], vec![0.6, 0.4], None).unwrap();
    let mut model = init_model(ModelDims::for_band(Band::Band2G4), NeighborhoodModel::default(), 3).unwrap();
    for (_, t) in model.params.decoder.tensors_mut().into_iter().skip(2) {
        t.iter_mut().for_each(|w| *w = 0.0);
    }
    let obs = observe(&net, None);
    let features = encode_features(&obs, &model.feature_model, None);
    let a = Band::Band2G4.action_count();
    let draws = 10_000;
    let mut counts = vec![vec![0usize; a]; 2];
    let mut rng = stream(11, "uniform-logits", &[]);
    for _ in 0..draws {
        let r = decode_sequential(&model, &obs, &features, DecodeMode::Sample, &mut rng).unwrap();
        for (t, &ap) in r.order.iter().enumerate() {
            counts[t][r.actions[ap]] += 1;
        }
    }
    let p = 1.0 / a as f64;
    let sd = (draws as f64 * p * (1.0 - p)).sqrt();
    for step in &counts {
        for &c in step {
            assert!((c as f64 - draws as f64 * p).abs() <= 3.0 * sd, "{counts:?}");
        }
    }
}

#[test]
fn committed_load_ignores_undecided_aps() {
    for seed in 0..50 {
        let net = random_network(6, Band::Band2G4, 3.0, seed).unwrap();
        let env = NeighborhoodModel::default();
        let model = init_model(ModelDims::for_band(Band::Band2G4), env, seed).unwrap();
        let obs = observe(&net, None);
        let features = encode_features(&obs, &env, None);
        let mut rng = stream(seed, "masking", &[]);
        let r = decode_sequential(&model, &obs, &features, DecodeMode::Sample, &mut rng).unwrap();
        let space = Band::Band2G4.action_space();
        let full = CouplingTable::new(&obs, &env);
        for t in 0..r.order.len() {
            let mut committed: Vec<Option<ChannelAssignment>> = vec![None; 6];
            for &j in &r.order[..t] {
                committed[j] = Some(space[r.actions[j]]);
            }
            let mut masked_load = obs.load().to_vec();
            for &j in &r.order[t..] {
                masked_load[j] = 0.0;
            }
            let masked = obs.with_load(masked_load).unwrap();
            let ap = r.order[t];
            let a = committed_load(&full, ap, &committed, 4);
            let b = committed_load(&CouplingTable::new(&masked, &env), ap, &committed, 4);
            assert_eq!(a, b, "seed {seed} step {t}");
        }
    }
}

#[test]
fn features_and_embeddings_are_equivariant() {
    for seed in 0..20 {
        let net = random_network(5, Band::Band5G, 2.0, seed).unwrap();
        let env = NeighborhoodModel::default();
        let model = init_model(ModelDims::for_band(Band::Band5G), env, seed).unwrap();
        let mut perm: Vec<usize> = (0..5).collect();
        perm.shuffle(&mut stream(seed, "perm", &[]));
        let a = encode_features(&observe(&net, None), &env, None);
        let b = encode_features(&observe(&net.permuted(&perm), None), &env, None);
        assert_eq!(a.dim, 1 + 20 + 1);
        for (new, &old) in perm.iter().enumerate() {
            // summation order changes with the labels, so allow rounding
            let close = |x: &[f64], y: &[f64]| x.iter().zip(y).all(|(p, q)| (p - q).abs() <= 1e-12);
            assert!(close(b.row(new), a.row(old)));
            let ea = model.params.encoder.forward(a.row(old)).output;
            let eb = model.params.encoder.forward(b.row(new)).output;
            assert!(close(&ea, &eb));
        }
    }
}

#[test]
fn feature_width_does_not_depend_on_size() {
    let env = NeighborhoodModel::default();
    for n in [1, 2, 7, 15] {
        let f = encode_features(&observe(&random_network(n, Band::Band2G4, 2.0, n as u64).unwrap(), None), &env, None);
        assert_eq!((f.n, f.dim), (n, 6));
    }
}

#[test]
fn greedy_decoding_is_deterministic_and_distributions_normalized() {
    let net = random_network(6, Band::Band5G, 3.0, 4).unwrap();
    let env = NeighborhoodModel::default();
    let model = init_model(ModelDims::for_band(Band::Band5G), env, 8).unwrap();
    let obs: Observation = observe(&net, None);
    let features = encode_features(&obs, &env, None);
    let mut r1 = stream(1, "x", &[]);
    let mut r2 = stream(2, "x", &[]);
    let a = decode_sequential(&model, &obs, &features, DecodeMode::Greedy, &mut r1).unwrap();
    let b = decode_sequential(&model, &obs, &features, DecodeMode::Greedy, &mut r2).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.order, decode_order(obs.load()));
    for probs in step_distributions(&model, &obs, &features, &a).unwrap() {
        assert_eq!(probs.len(), 35);
        assert!(probs.iter().all(|&p| p >= 0.0));
        assert!((probs.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
    }
    assert!(a.log_probs.iter().all(|&lp| lp <= 0.0));
}
