#![allow(dead_code)]

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rrm_core::agent::{
    decode_sequential, encode_features, gradients, init_model, replay_loss, AgentModel, DecodeMode,
    LossCoefficients, ModelDims,
};
use rrm_core::baselines::random_policy;
use rrm_core::environment::{evaluate, observe, NeighborhoodModel};
use rrm_core::rng::stream;
use rrm_core::topology::{random_network, Band, ChannelAssignment, ChannelConfig, Network};

pub struct Case {
    pub net: Network,
    pub cfg: ChannelConfig,
    pub model: NeighborhoodModel,
}

pub fn random_model<R: Rng>(rng: &mut R) -> NeighborhoodModel {
    let t = rng.random_range(-95.0..-65.0);
    if rng.random_bool(0.5) {
        NeighborhoodModel::threshold(t)
    } else {
        NeighborhoodModel::sigmoid(t, rng.random_range(1.0..10.0))
    }
}

pub fn random_case(seed: u64) -> Case {
    let mut rng = stream(seed, "property-case", &[]);
    let band = if rng.random_bool(0.5) { Band::Band2G4 } else { Band::Band5G };
    let n = rng.random_range(1..=8);
    let density = rng.random_range(0.5..5.0);
    let net = random_network(n, band, density, rng.random()).unwrap();
    let cfg = random_policy(&net, rng.random());
    Case {
        net,
        cfg,
        model: random_model(&mut rng),
    }
}

fn rebuild(net: &Network, rssi: Vec<f64>) -> Network {
    Network::new(net.band(), rssi, net.load().to_vec(), None).unwrap()
}

pub fn check_bounds(c: &Case) -> Result<(), String> {
    let rec = evaluate(&c.net, &c.cfg, &c.model).map_err(|e| e.to_string())?;
    if !(0.0..=1.0).contains(&rec.regret) {
        return Err(format!("regret {} outside [0, 1]", rec.regret));
    }
    for i in 0..c.net.n_aps() {
        let (b, u) = (rec.busy_fraction[i], rec.utilization[i]);
        if !(0.0..=1.0).contains(&b) || !(0.0..=1.0).contains(&u) {
            return Err(format!("ap {i}: busy {b} utilization {u}"));
        }
    }
    let again = evaluate(&c.net, &c.cfg, &c.model).unwrap();
    if again != rec {
        return Err("evaluate is not pure".into());
    }
    Ok(())
}

/// Raising one received rssi never lowers the receiver's busy fraction nor
/// the regret.
pub fn check_monotone(c: &Case, i: usize, j: usize, raise_db: f64) -> Result<(), String> {
    let n = c.net.n_aps();
    if n < 2 || i == j {
        return Ok(());
    }
    let mut rssi = c.net.rssi_matrix().to_vec();
    rssi[i * n + j] = (rssi[i * n + j] + raise_db).min(0.0);
    let louder = rebuild(&c.net, rssi);
    let before = evaluate(&c.net, &c.cfg, &c.model).unwrap();
    let after = evaluate(&louder, &c.cfg, &c.model).unwrap();
    if after.busy_fraction[i] < before.busy_fraction[i] {
        return Err(format!("B_{i} fell from {} to {}", before.busy_fraction[i], after.busy_fraction[i]));
    }
    if after.regret < before.regret - 1e-12 {
        return Err(format!("regret fell from {} to {}", before.regret, after.regret));
    }
    Ok(())
}

pub fn check_permutation(c: &Case, perm: &[usize]) -> Result<(), String> {
    let net = c.net.permuted(perm);
    let cfg = c.cfg.permuted(perm);
    let a = evaluate(&c.net, &c.cfg, &c.model).unwrap();
    let b = evaluate(&net, &cfg, &c.model).unwrap();
    if (a.regret - b.regret).abs() > 1e-12 {
        return Err(format!("regret {} vs {}", a.regret, b.regret));
    }
    for (new, &old) in perm.iter().enumerate() {
        let same = |x: f64, y: f64| (x - y).abs() <= 1e-12;
        if !same(b.busy_fraction[new], a.busy_fraction[old])
            || !same(b.utilization[new], a.utilization[old])
            || !same(b.achieved_airtime[new], a.achieved_airtime[old])
        {
            return Err(format!("ap {old} -> {new} not permuted consistently"));
        }
    }
    Ok(())
}

/// Pairwise disjoint blocks: no busy time, regret from widths alone, and
/// zero regret when every block is as wide as allowed.
pub fn check_disjoint(seed: u64) -> Result<(), String> {
    let mut rng = stream(seed, "disjoint-case", &[]);
    let band = if rng.random_bool(0.5) { Band::Band2G4 } else { Band::Band5G };
    let w_max = band.max_width();
    let full = rng.random_bool(0.5);
    let mut blocks = Vec::new();
    let mut ch = 1;
    while ch <= band.base_channels() {
        let widths: Vec<usize> = band
            .allowed_widths()
            .iter()
            .copied()
            .filter(|&w| (ch - 1) % w == 0 && ch - 1 + w <= band.base_channels())
            .collect();
        let w = if full { w_max } else { *widths.choose(&mut rng).unwrap() };
        blocks.push(ChannelAssignment { block_start: ch, width: w });
        ch += w;
    }
    blocks.shuffle(&mut rng);
    let n = rng.random_range(1..=blocks.len());
    blocks.truncate(n);
    let net = random_network(n, band, rng.random_range(0.5..8.0), rng.random()).unwrap();
    let cfg = ChannelConfig::new(blocks);
    let model = random_model(&mut rng);
    let rec = evaluate(&net, &cfg, &model).map_err(|e| e.to_string())?;
    if rec.busy_fraction.iter().any(|&b| b != 0.0) {
        return Err(format!("busy {:?} on disjoint blocks", rec.busy_fraction));
    }
    let load = net.load();
    let achieved: f64 = load.iter().zip(&cfg.assignments).map(|(r, a)| r * a.width as f64).sum();
    let bound: f64 = load.iter().map(|r| r * w_max as f64).sum();
    let expected = 1.0 - achieved / bound;
    if (rec.regret - expected).abs() > 1e-12 {
        return Err(format!("regret {} but widths imply {expected}", rec.regret));
    }
    if full && rec.regret.abs() > 1e-12 {
        return Err(format!("full-width disjoint blocks give regret {}", rec.regret));
    }
    Ok(())
}

/// Largest relative error between analytic and central-difference
/// gradients over every parameter of a freshly initialized agent, and the
/// count of parameters compared. Entries where both gradients are below
/// `floor` in magnitude are compared against `floor` instead.
pub fn finite_difference_error(seed: u64, eps: f64, floor: f64) -> (f64, usize, String) {
    let net = random_network(3, Band::Band2G4, 2.5, seed).unwrap();
    let env = NeighborhoodModel::default();
    let mut model: AgentModel = init_model(ModelDims::for_band(Band::Band2G4), env, seed).unwrap();
    // nonzero selector and critic outputs make every term of the loss active
    let obs = observe(&net, None);
    let features = encode_features(&obs, &model.feature_model, None);
    let mut rng = stream(seed, "fd-rollout", &[]);
    let rollout = decode_sequential(&model, &obs, &features, DecodeMode::Sample, &mut rng).unwrap();
    let regret = evaluate(&net, &rollout.config, &env).unwrap().regret;
    let coeffs = LossCoefficients {
        value: 0.5,
        entropy: 0.05,
        selector: 1.0,
    };
    let g = gradients(&model, &obs, &rollout, regret, &coeffs).unwrap();
    let analytic: Vec<(String, Vec<f64>)> = g
        .grads
        .tensors()
        .into_iter()
        .map(|(name, t)| (name, t.to_vec()))
        .collect();
    let mut worst = 0.0f64;
    let mut worst_at = String::new();
    let mut count = 0;
    for (ti, (name, grad)) in analytic.iter().enumerate() {
        for k in 0..grad.len() {
            let original = model.params.tensors()[ti].1[k];
            let at = |v: f64, model: &mut AgentModel| {
                model.params.tensors_mut()[ti].1[k] = v;
                replay_loss(model, &obs, &rollout, regret, g.advantage, &coeffs).unwrap()
            };
            let plus = at(original + eps, &mut model);
            let minus = at(original - eps, &mut model);
            model.params.tensors_mut()[ti].1[k] = original;
            let numeric = (plus - minus) / (2.0 * eps);
            let scale = grad[k].abs().max(numeric.abs()).max(floor);
            let rel = (grad[k] - numeric).abs() / scale;
            count += 1;
            if rel > worst {
                worst = rel;
                worst_at = format!("{name}[{k}] analytic {} numeric {numeric}", grad[k]);
            }
        }
    }
    (worst, count, worst_at)
}

/// Frozen candidate sets from an untrained policy: the selector alone is fit
/// to the candidates' true regrets, then scored on held-out instances by how
/// often its pick is no worse than the median candidate.
pub fn selector_ranking(seed: u64, train_instances: u64, test_instances: u64, epochs: usize) -> (usize, usize) {
    use rrm_core::agent::{select_best, Rollout};
    use rrm_core::trainer::InstanceGenerator;

    let env = NeighborhoodModel::default();
    let gen = acceptance_generator();
    let mut model = init_model(ModelDims::for_band(Band::Band2G4), env, seed).unwrap();
    let candidates = |model: &AgentModel, tag: &str, i: u64| -> (Network, Vec<(Rollout, f64)>) {
        let net = InstanceGenerator::sample(&gen, seed, tag, &[i]).unwrap();
        let obs = observe(&net, None);
        let features = encode_features(&obs, &model.feature_model, None);
        let set = (0..8)
            .map(|r| {
                let mut s = stream(seed, "selector-candidate", &[i, r]);
                let ro = decode_sequential(model, &obs, &features, DecodeMode::Sample, &mut s).unwrap();
                let regret = evaluate(&net, &ro.config, &env).unwrap().regret;
                (ro, regret)
            })
            .collect();
        (net, set)
    };
    let train: Vec<(Network, Vec<(Rollout, f64)>)> =
        (0..train_instances).map(|i| candidates(&model, "selector-train", i)).collect();
    let pairs: Vec<([f64; 4], f64)> = train
        .iter()
        .flat_map(|(_, set)| set.iter().map(|(ro, r)| (ro.selector_features, *r)))
        .collect();
    for _ in 0..epochs {
        let mut grad = rrm_core::nn::Mlp::zeros(model.params.selector.shape());
        for (x, target) in &pairs {
            let trace = model.params.selector.forward(x);
            let d = 2.0 * (trace.output[0] - target);
            model.params.selector.backward(x, &trace, &[d], &mut grad, None);
        }
        for ((_, p), (_, g)) in model.params.selector.tensors_mut().into_iter().zip(grad.tensors()) {
            for (w, dw) in p.iter_mut().zip(g) {
                *w -= 0.1 * dw / pairs.len() as f64;
            }
        }
    }
    let mut good = 0;
    for i in 0..test_instances {
        let (net, set) = candidates(&model, "selector-test", i);
        let rollouts: Vec<Rollout> = set.iter().map(|(r, _)| r.clone()).collect();
        let (best, _) = select_best(&model, &observe(&net, None), &rollouts).unwrap();
        let mut regrets: Vec<f64> = set.iter().map(|(_, r)| *r).collect();
        let chosen = regrets[best];
        regrets.sort_by(f64::total_cmp);
        let k = regrets.len();
        let median = 0.5 * (regrets[(k - 1) / 2] + regrets[k / 2]);
        if chosen <= median {
            good += 1;
        }
    }
    (good, test_instances as usize)
}

/// Training distribution of the convergence runs.
pub fn acceptance_generator() -> rrm_core::trainer::InstanceGenerator {
    rrm_core::trainer::InstanceGenerator {
        band: Band::Band2G4,
        n_min: 3,
        n_max: 6,
        density_min: 2.0,
        density_max: 3.0,
        ..Default::default()
    }
}

/// Instances from the training distribution on which even the oracle
/// cannot avoid all interference.
pub fn interference_limited_set(seed: u64, size: usize) -> Vec<Network> {
    let env = NeighborhoodModel::default();
    let gen = acceptance_generator();
    let mut out = Vec::with_capacity(size);
    let mut k = 0;
    while out.len() < size {
        let net = gen.sample(seed, "interference-limited", &[k]).unwrap();
        k += 1;
        if rrm_core::baselines::oracle(&net, &env).unwrap().1 > 0.0 {
            out.push(net);
        }
    }
    out
}

/// A triangle of mutually audible APs 0, 1, 3 plus a distant AP 2. APs 0
/// and 1 peak together on even slots; 2 and 3 peak, slightly higher, on odd
/// slots. The mean-load forecast therefore prefers pairing 0 with 1 on one
/// block, which is the worst choice on every even slot.
pub fn two_phase_case() -> rrm_core::harness::LoadTrace {
    let far = -95.0;
    #[rustfmt::skip]
    let rssi = vec![
        0.0, -60.0, far, -70.0,
        -60.0, 0.0, far, -70.0,
        far, far, 0.0, far,
        -70.0, -70.0, far, 0.0,
    ];
    let net = Network::new(Band::Band2G4, rssi, vec![0.5; 4], None).unwrap();
    rrm_core::harness::two_phase_trace(&net, &[0, 1], 0.8, 0.85, 0.1, 144, 10).unwrap()
}

/// Telemetry from a random network with one overlapping pair planted just
/// above `t_star` and another just below, each within one grid step, so
/// `t_star` is the only grid point that fits noiseless data.
pub fn planted_telemetry(seed: u64, t_star: f64, step: f64, sigma_busy: f64) -> Vec<rrm_core::calibration::TelemetryRecord> {
    let mut rng = stream(seed, "planted-telemetry", &[]);
    let net = random_network(16, Band::Band2G4, 2.0, rng.random()).unwrap();
    let n = net.n_aps();
    let mut rssi = net.rssi_matrix().to_vec();
    let above = t_star + rng.random_range(0.0..step);
    let below = t_star - step + rng.random_range(0.0..step);
    for (i, j, r) in [(0, 1, above), (2, 3, below)] {
        rssi[i * n + j] = r;
        rssi[j * n + i] = r;
    }
    let load: Vec<f64> = (0..n).map(|_| rng.random_range(0.03..0.12)).collect();
    let net = Network::new(Band::Band2G4, rssi, load, None).unwrap();
    let mut cfg = random_policy(&net, rng.random());
    cfg.assignments[1] = cfg.assignments[0];
    cfg.assignments[3] = cfg.assignments[2];
    rrm_core::calibration::synth_telemetry(&net, &cfg, &NeighborhoodModel::threshold(t_star), sigma_busy, 20, rng.random())
        .unwrap()
}
