//! Actor-critic policy with an auto-regressive decoder over APs and a
//! selector that picks the best of several sampled configurations.
//!
//! The encoder maps each AP's engineered features to an embedding. The
//! decoder visits APs heaviest-load first; its step input is the AP's
//! embedding plus the load already committed on every base channel by
//! neighbors decided earlier. The critic reads the mean-pooled embedding.
//! The selector scores whole candidate configurations and is trained to
//! predict their regret.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::environment::{CouplingTable, NeighborhoodModel, Observation, RadioView};
use crate::error::{Error, Result};
use crate::nn::{log_softmax, softmax, Mlp, MlpShape, MlpTrace};
use crate::rng;
use crate::topology::{Band, ChannelAssignment, ChannelConfig};

pub const MODEL_FORMAT_VERSION: u32 = 1;
/// mean/max predicted busy, mean width fraction, mean log-prob
pub const SELECTOR_FEATURES: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDims {
    pub band: Band,
    pub feature_dim: usize,
    pub embed_dim: usize,
    pub encoder_hidden: usize,
    pub decoder_hidden: usize,
    pub critic_hidden: usize,
    pub selector_hidden: usize,
    pub action_count: usize,
}

impl ModelDims {
    pub fn for_band(band: Band) -> Self {
        ModelDims {
            band,
            feature_dim: band.base_channels() + 2,
            embed_dim: 32,
            encoder_hidden: 64,
            decoder_hidden: 64,
            critic_hidden: 32,
            selector_hidden: 32,
            action_count: band.action_count(),
        }
    }

    pub fn base_channels(&self) -> usize {
        self.band.base_channels()
    }

    pub fn validate(&self) -> Result<()> {
        let expected = ModelDims {
            embed_dim: self.embed_dim,
            encoder_hidden: self.encoder_hidden,
            decoder_hidden: self.decoder_hidden,
            critic_hidden: self.critic_hidden,
            selector_hidden: self.selector_hidden,
            ..ModelDims::for_band(self.band)
        };
        if *self != expected {
            return Err(Error::Structural(format!(
                "model dims {self:?} inconsistent with band {}",
                self.band
            )));
        }
        let sizes = [
            self.embed_dim,
            self.encoder_hidden,
            self.decoder_hidden,
            self.critic_hidden,
            self.selector_hidden,
        ];
        if sizes.contains(&0) {
            return Err(Error::Structural("zero-sized layer".into()));
        }
        Ok(())
    }

    fn encoder(&self) -> MlpShape {
        MlpShape {
            inputs: self.feature_dim,
            hidden: self.encoder_hidden,
            outputs: self.embed_dim,
        }
    }

    fn decoder(&self) -> MlpShape {
        MlpShape {
            inputs: self.embed_dim + self.base_channels(),
            hidden: self.decoder_hidden,
            outputs: self.action_count,
        }
    }

    fn critic(&self) -> MlpShape {
        MlpShape {
            inputs: self.embed_dim,
            hidden: self.critic_hidden,
            outputs: 1,
        }
    }

    fn selector(&self) -> MlpShape {
        MlpShape {
            inputs: SELECTOR_FEATURES,
            hidden: self.selector_hidden,
            outputs: 1,
        }
    }
}

/// Weights of the four networks; also used as the gradient container.
#[derive(Clone, Debug, PartialEq)]
pub struct AgentParams {
    pub encoder: Mlp,
    pub decoder: Mlp,
    pub critic: Mlp,
    pub selector: Mlp,
}

impl AgentParams {
    pub fn zeros(dims: &ModelDims) -> Self {
        AgentParams {
            encoder: Mlp::zeros(dims.encoder()),
            decoder: Mlp::zeros(dims.decoder()),
            critic: Mlp::zeros(dims.critic()),
            selector: Mlp::zeros(dims.selector()),
        }
    }

    fn networks(&self) -> [(&'static str, &Mlp); 4] {
        [
            ("encoder", &self.encoder),
            ("decoder", &self.decoder),
            ("critic", &self.critic),
            ("selector", &self.selector),
        ]
    }

    /// `(name, values)` for every tensor, in checkpoint order.
    pub fn tensors(&self) -> Vec<(String, &[f64])> {
        self.networks()
            .into_iter()
            .flat_map(|(net, mlp)| {
                mlp.tensors()
                    .into_iter()
                    .map(move |(t, v)| (format!("{net}.{t}"), v))
            })
            .collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, &mut Vec<f64>)> {
        let mut out = Vec::with_capacity(16);
        for (net, mlp) in [
            ("encoder", &mut self.encoder),
            ("decoder", &mut self.decoder),
            ("critic", &mut self.critic),
            ("selector", &mut self.selector),
        ] {
            for (t, v) in mlp.tensors_mut() {
                out.push((format!("{net}.{t}"), v));
            }
        }
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|(_, v)| v.len()).sum()
    }

    /// `self += scale * other`, tensor by tensor.
    pub fn add_scaled(&mut self, other: &AgentParams, scale: f64) {
        let src = other.tensors();
        for ((_, dst), (_, s)) in self.tensors_mut().into_iter().zip(src) {
            for (d, v) in dst.iter_mut().zip(s) {
                *d += scale * v;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for (_, t) in self.tensors_mut() {
            for v in t.iter_mut() {
                *v *= factor;
            }
        }
    }

    pub fn l2_norm(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|(_, v)| v.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    /// Name of the first tensor holding a non-finite value.
    pub fn first_non_finite(&self) -> Option<String> {
        self.tensors()
            .into_iter()
            .find(|(_, v)| v.iter().any(|x| !x.is_finite()))
            .map(|(n, _)| n)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AgentModel {
    pub dims: ModelDims,
    /// Neighborhood rule the agent uses when engineering its own inputs.
    pub feature_model: NeighborhoodModel,
    pub version: u32,
    pub params: AgentParams,
}

pub fn init_model(dims: ModelDims, feature_model: NeighborhoodModel, seed: u64) -> Result<AgentModel> {
    dims.validate()?;
    feature_model.validate()?;
    let mut r = rng::stream(seed, "init", &[]);
    let params = AgentParams {
        encoder: Mlp::init(dims.encoder(), &mut r),
        decoder: Mlp::init(dims.decoder(), &mut r),
        critic: Mlp::init(dims.critic(), &mut r),
        selector: Mlp::init(dims.selector(), &mut r),
    };
    Ok(AgentModel {
        dims,
        feature_model,
        version: MODEL_FORMAT_VERSION,
        params,
    })
}

/// Per-AP feature rows, `n x feature_dim`.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    pub n: usize,
    pub dim: usize,
    pub data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

/// `[load_i, neighbor load per base channel, degree_i / n]`.
///
/// Without a reference configuration each neighbor's load is spread evenly
/// over all base channels. With one, it lands on the neighbor's block.
pub fn encode_features(
    obs: &Observation,
    model: &NeighborhoodModel,
    reference: Option<&ChannelConfig>,
) -> FeatureMatrix {
    let n = obs.n_aps();
    let channels = obs.band().base_channels();
    let dim = channels + 2;
    let load = obs.load();
    let mut data = vec![0.0; n * dim];
    for i in 0..n {
        let row = &mut data[i * dim..(i + 1) * dim];
        row[0] = load[i];
        let mut degree = 0usize;
        for j in 0..n {
            if j == i {
                continue;
            }
            let w = model.weight(obs.rssi(i, j));
            if w > 0.5 {
                degree += 1;
            }
            let pressure = w * load[j];
            match reference {
                Some(cfg) => {
                    for c in cfg.assignments[j].occupied_set() {
                        row[c] += pressure;
                    }
                }
                None => {
                    for slot in &mut row[1..=channels] {
                        *slot += pressure / channels as f64;
                    }
                }
            }
        }
        row[dim - 1] = degree as f64 / n as f64;
    }
    FeatureMatrix { n, dim, data }
}

/// APs by descending load, ties by index.
pub fn decode_order(load: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..load.len()).collect();
    order.sort_by(|&a, &b| load[b].total_cmp(&load[a]).then(a.cmp(&b)));
    order
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DecodeMode {
    Sample,
    Greedy,
}

/// One complete pass of the decoder over all APs.
#[derive(Clone, Debug, PartialEq)]
pub struct Rollout {
    pub config: ChannelConfig,
    /// Action index per AP, into `band.action_space()`.
    pub actions: Vec<usize>,
    /// AP visited at each step.
    pub order: Vec<usize>,
    pub log_probs: Vec<f64>,
    pub entropies: Vec<f64>,
    pub value_estimate: f64,
    pub selector_features: [f64; SELECTOR_FEATURES],
    pub selector_score: f64,
}

impl Rollout {
    pub fn mean_log_prob(&self) -> f64 {
        if self.log_probs.is_empty() {
            0.0
        } else {
            self.log_probs.iter().sum::<f64>() / self.log_probs.len() as f64
        }
    }
}

/// Candidate summary fed to the selector, computed on the observation.
pub fn selector_features(
    table: &CouplingTable,
    config: &ChannelConfig,
    mean_log_prob: f64,
) -> [f64; SELECTOR_FEATURES] {
    let n = table.n_aps();
    if n == 0 {
        return [0.0, 0.0, 1.0, mean_log_prob];
    }
    let masks: Vec<u32> = config.assignments.iter().map(|a| a.mask()).collect();
    let widths: Vec<usize> = config.assignments.iter().map(|a| a.width).collect();
    let busy: Vec<f64> = (0..n).map(|i| table.busy(i, &masks)).collect();
    let mean_busy = busy.iter().sum::<f64>() / n as f64;
    let max_busy = busy.iter().cloned().fold(0.0, f64::max);
    let width_frac = widths.iter().sum::<usize>() as f64 / (n as f64 * table.w_max());
    [mean_busy, max_busy, width_frac, mean_log_prob]
}

/// Load already committed by decided neighbors of `ap` on each base
/// channel, weighted by how strongly `ap` hears them.
pub fn committed_load(
    table: &CouplingTable,
    ap: usize,
    committed: &[Option<ChannelAssignment>],
    channels: usize,
) -> Vec<f64> {
    let mut pressure = vec![0.0; channels];
    for (j, slot) in committed.iter().enumerate() {
        if let Some(a) = slot {
            let c = table.coupling(ap, j);
            if c != 0.0 {
                for ch in a.occupied_set() {
                    pressure[ch - 1] += c;
                }
            }
        }
    }
    pressure
}

struct StepTrace {
    ap: usize,
    input: Vec<f64>,
    trace: MlpTrace,
    probs: Vec<f64>,
    log_probs: Vec<f64>,
    action: usize,
}

struct ForwardTrace {
    embeddings: Vec<MlpTrace>,
    steps: Vec<StepTrace>,
    pooled: Vec<f64>,
    critic: MlpTrace,
    selector_input: [f64; SELECTOR_FEATURES],
    selector: MlpTrace,
}

enum Chooser<'a, R: Rng + ?Sized> {
    Sample(&'a mut R),
    Greedy,
    Forced(&'a [usize]),
}

fn check_finite(values: &[f64], tensor: &str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numerical {
            tensor: tensor.to_string(),
        })
    }
}

fn check_shapes(model: &AgentModel, obs: &Observation, features: &FeatureMatrix) -> Result<()> {
    if model.dims.band != obs.band() {
        return Err(Error::Structural(format!(
            "model built for band {} but observation is {}",
            model.dims.band,
            obs.band()
        )));
    }
    if features.dim != model.dims.feature_dim || features.n != obs.n_aps() {
        return Err(Error::Structural(format!(
            "feature matrix {}x{} does not match {} APs x {} features",
            features.n,
            features.dim,
            obs.n_aps(),
            model.dims.feature_dim
        )));
    }
    Ok(())
}

fn run_forward<R: Rng + ?Sized>(
    model: &AgentModel,
    obs: &Observation,
    features: &FeatureMatrix,
    mut chooser: Chooser<'_, R>,
    recorded_selector_input: Option<[f64; SELECTOR_FEATURES]>,
) -> Result<(Rollout, ForwardTrace)> {
    check_shapes(model, obs, features)?;
    let n = obs.n_aps();
    let dims = &model.dims;
    let channels = dims.base_channels();
    let space = dims.band.action_space();
    let table = CouplingTable::new(obs, &model.feature_model);
    let p = &model.params;

    let embeddings: Vec<MlpTrace> = (0..n).map(|i| p.encoder.forward(features.row(i))).collect();
    for e in &embeddings {
        check_finite(&e.output, "encoder.output")?;
    }

    let order = decode_order(obs.load());
    let mut actions = vec![usize::MAX; n];
    let mut committed: Vec<Option<ChannelAssignment>> = vec![None; n];
    let mut steps = Vec::with_capacity(n);
    for (t, &ap) in order.iter().enumerate() {
        let mut input = Vec::with_capacity(dims.embed_dim + channels);
        input.extend_from_slice(&embeddings[ap].output);
        input.extend_from_slice(&committed_load(&table, ap, &committed, channels));
        let trace = p.decoder.forward(&input);
        check_finite(&trace.output, "decoder.logits")?;
        let probs = softmax(&trace.output);
        let log_probs = log_softmax(&trace.output);
        let action = match &mut chooser {
            Chooser::Forced(acts) => {
                let a = acts[t];
                if a >= space.len() {
                    return Err(Error::Structural(format!("action index {a} out of range")));
                }
                a
            }
            Chooser::Greedy => {
                let mut best = 0;
                for k in 1..probs.len() {
                    if trace.output[k] > trace.output[best] {
                        best = k;
                    }
                }
                best
            }
            Chooser::Sample(rng) => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut pick = probs.len() - 1;
                for (k, pk) in probs.iter().enumerate() {
                    acc += pk;
                    if u < acc {
                        pick = k;
                        break;
                    }
                }
                pick
            }
        };
        actions[ap] = action;
        committed[ap] = Some(space[action]);
        steps.push(StepTrace {
            ap,
            input,
            trace,
            probs,
            log_probs,
            action,
        });
    }

    let mut pooled = vec![0.0; dims.embed_dim];
    for e in &embeddings {
        for (d, v) in pooled.iter_mut().zip(&e.output) {
            *d += v / n as f64;
        }
    }
    let critic = p.critic.forward(&pooled);
    check_finite(&critic.output, "critic.output")?;

    let log_probs: Vec<f64> = steps.iter().map(|s| s.log_probs[s.action]).collect();
    let entropies: Vec<f64> = steps
        .iter()
        .map(|s| {
            -s.probs
                .iter()
                .zip(&s.log_probs)
                .map(|(p, lp)| if *p > 0.0 { p * lp } else { 0.0 })
                .sum::<f64>()
        })
        .collect();
    let config = ChannelConfig::new(actions.iter().map(|&a| space[a]).collect());
    let selector_input = match recorded_selector_input {
        Some(f) => f,
        None => {
            let mean_lp = if n == 0 {
                0.0
            } else {
                log_probs.iter().sum::<f64>() / n as f64
            };
            selector_features(&table, &config, mean_lp)
        }
    };
    let selector = p.selector.forward(&selector_input);
    check_finite(&selector.output, "selector.output")?;

    let rollout = Rollout {
        config,
        actions,
        order,
        log_probs,
        entropies,
        value_estimate: critic.output[0],
        selector_features: selector_input,
        selector_score: selector.output[0],
    };
    let trace = ForwardTrace {
        embeddings,
        steps,
        pooled,
        critic,
        selector_input,
        selector,
    };
    Ok((rollout, trace))
}

/// Decodes one configuration, sampling or taking the argmax at every step.
pub fn decode_sequential<R: Rng + ?Sized>(
    model: &AgentModel,
    obs: &Observation,
    features: &FeatureMatrix,
    mode: DecodeMode,
    rng: &mut R,
) -> Result<Rollout> {
    let chooser = match mode {
        DecodeMode::Sample => Chooser::Sample(rng),
        DecodeMode::Greedy => Chooser::Greedy,
    };
    run_forward(model, obs, features, chooser, None).map(|(r, _)| r)
}

/// Per-step action distributions of a decoded rollout (teacher-forced).
pub fn step_distributions(
    model: &AgentModel,
    obs: &Observation,
    features: &FeatureMatrix,
    rollout: &Rollout,
) -> Result<Vec<Vec<f64>>> {
    let forced = forced_actions(rollout);
    let (_, trace) = run_forward::<rng::StreamRng>(
        model,
        obs,
        features,
        Chooser::Forced(&forced),
        Some(rollout.selector_features),
    )?;
    Ok(trace.steps.into_iter().map(|s| s.probs).collect())
}

fn forced_actions(rollout: &Rollout) -> Vec<usize> {
    rollout.order.iter().map(|&ap| rollout.actions[ap]).collect()
}

pub fn selector_score(model: &AgentModel, features: &[f64; SELECTOR_FEATURES]) -> f64 {
    model.params.selector.forward(features).output[0]
}

/// Index of the candidate with the lowest selector score (ties: lowest
/// index) and its configuration.
pub fn select_best(
    model: &AgentModel,
    obs: &Observation,
    rollouts: &[Rollout],
) -> Result<(usize, ChannelConfig)> {
    if rollouts.is_empty() {
        return Err(Error::Usage("select_best needs at least one rollout".into()));
    }
    let table = CouplingTable::new(obs, &model.feature_model);
    let mut best = 0;
    let mut best_score = f64::INFINITY;
    for (k, r) in rollouts.iter().enumerate() {
        r.config.validate(obs.band(), obs.n_aps())?;
        let feats = selector_features(&table, &r.config, r.mean_log_prob());
        let score = selector_score(model, &feats);
        if k == 0 || score < best_score {
            best = k;
            best_score = score;
        }
    }
    Ok((best, rollouts[best].config.clone()))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossCoefficients {
    pub value: f64,
    pub entropy: f64,
    pub selector: f64,
}

impl Default for LossCoefficients {
    fn default() -> Self {
        LossCoefficients {
            value: 0.5,
            entropy: 0.01,
            selector: 1.0,
        }
    }
}

/// Loss of a recorded rollout at the model's current weights, with the
/// advantage held fixed. The actions and the selector inputs are replayed
/// as recorded.
pub fn replay_loss(
    model: &AgentModel,
    obs: &Observation,
    rollout: &Rollout,
    realized_regret: f64,
    advantage: f64,
    coeffs: &LossCoefficients,
) -> Result<f64> {
    let features = encode_features(obs, &model.feature_model, None);
    let forced = forced_actions(rollout);
    let (replayed, _) = run_forward::<rng::StreamRng>(
        model,
        obs,
        &features,
        Chooser::Forced(&forced),
        Some(rollout.selector_features),
    )?;
    let ret = -realized_regret;
    let policy = -advantage * replayed.log_probs.iter().sum::<f64>();
    let value = coeffs.value * (replayed.value_estimate - ret).powi(2);
    let entropy = -coeffs.entropy * replayed.entropies.iter().sum::<f64>();
    let selector = coeffs.selector * (replayed.selector_score - realized_regret).powi(2);
    Ok(policy + value + entropy + selector)
}

/// Gradients of one rollout's loss plus the advantage that was used.
#[derive(Clone, Debug)]
pub struct RolloutGradients {
    pub grads: AgentParams,
    pub advantage: f64,
    pub loss: f64,
}

/// Analytic gradients of
/// `-A * sum log pi + c_v (V - G)^2 - c_e * sum H + c_s (S - regret)^2`
/// with `G = -regret` and `A = G - V` held constant.
pub fn gradients(
    model: &AgentModel,
    obs: &Observation,
    rollout: &Rollout,
    realized_regret: f64,
    coeffs: &LossCoefficients,
) -> Result<RolloutGradients> {
    let features = encode_features(obs, &model.feature_model, None);
    let forced = forced_actions(rollout);
    let (replayed, trace) = run_forward::<rng::StreamRng>(
        model,
        obs,
        &features,
        Chooser::Forced(&forced),
        Some(rollout.selector_features),
    )?;
    let dims = &model.dims;
    let p = &model.params;
    let n = obs.n_aps();
    let ret = -realized_regret;
    let value = replayed.value_estimate;
    let advantage = ret - value;
    let mut grads = AgentParams::zeros(dims);
    let mut d_embed = vec![vec![0.0; dims.embed_dim]; n];

    let mut entropy_sum = 0.0;
    let mut log_prob_sum = 0.0;
    for step in &trace.steps {
        let h: f64 = -step
            .probs
            .iter()
            .zip(&step.log_probs)
            .map(|(p, lp)| p * lp)
            .sum::<f64>();
        entropy_sum += h;
        log_prob_sum += step.log_probs[step.action];
        let d_logits: Vec<f64> = step
            .probs
            .iter()
            .zip(&step.log_probs)
            .enumerate()
            .map(|(k, (&pk, &lpk))| {
                let onehot = if k == step.action { 1.0 } else { 0.0 };
                -advantage * (onehot - pk) + coeffs.entropy * pk * (lpk + h)
            })
            .collect();
        let mut d_input = vec![0.0; step.input.len()];
        p.decoder
            .backward(&step.input, &step.trace, &d_logits, &mut grads.decoder, Some(&mut d_input));
        for (d, v) in d_embed[step.ap].iter_mut().zip(&d_input[..dims.embed_dim]) {
            *d += v;
        }
    }

    let d_value = 2.0 * coeffs.value * (value - ret);
    let mut d_pooled = vec![0.0; dims.embed_dim];
    p.critic
        .backward(&trace.pooled, &trace.critic, &[d_value], &mut grads.critic, Some(&mut d_pooled));
    for row in &mut d_embed {
        for (d, v) in row.iter_mut().zip(&d_pooled) {
            *d += v / n as f64;
        }
    }
    for i in 0..n {
        p.encoder.backward(
            features.row(i),
            &trace.embeddings[i],
            &d_embed[i],
            &mut grads.encoder,
            None,
        );
    }

    let score = trace.selector.output[0];
    let d_score = 2.0 * coeffs.selector * (score - realized_regret);
    p.selector.backward(
        &trace.selector_input,
        &trace.selector,
        &[d_score],
        &mut grads.selector,
        None,
    );

    if let Some(name) = grads.first_non_finite() {
        return Err(Error::Numerical {
            tensor: format!("grad.{name}"),
        });
    }
    let loss = -advantage * log_prob_sum
        + coeffs.value * (value - ret).powi(2)
        - coeffs.entropy * entropy_sum
        + coeffs.selector * (score - realized_regret).powi(2);
    if !loss.is_finite() {
        return Err(Error::Numerical {
            tensor: "loss".into(),
        });
    }
    Ok(RolloutGradients {
        grads,
        advantage,
        loss,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::observe;
    use crate::topology::{random_network, Network};

    fn model(seed: u64) -> AgentModel {
        init_model(ModelDims::for_band(Band::Band2G4), NeighborhoodModel::default(), seed).unwrap()
    }

    fn obs(n: usize, seed: u64) -> Observation {
        observe(&random_network(n, Band::Band2G4, 4.0, seed).unwrap(), None)
    }

    #[test]
    fn lone_ap_features() {
        let net = Network::new(Band::Band2G4, vec![0.0], vec![0.6], None).unwrap();
        let f = encode_features(&observe(&net, None), &NeighborhoodModel::default(), None);
        assert_eq!(f.row(0), &[0.6, 0.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn out_of_range_aps_have_no_neighbor_load() {
        let net = Network::new(Band::Band2G4, vec![0.0, -100.0, -100.0, 0.0], vec![0.6, 0.3], None)
            .unwrap();
        let f = encode_features(&observe(&net, None), &NeighborhoodModel::default(), None);
        assert!(f.row(0)[1..].iter().all(|&v| v == 0.0));
        assert!(f.row(1)[1..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn feature_width_is_independent_of_fleet_size() {
        for n in [1, 3, 9, 20] {
            let f = encode_features(&obs(n, n as u64), &NeighborhoodModel::default(), None);
            assert_eq!((f.n, f.dim), (n, 6));
        }
    }

    #[test]
    fn reference_config_places_load_on_the_block() {
        let net = Network::new(Band::Band2G4, vec![0.0, -60.0, -60.0, 0.0], vec![0.6, 0.3], None)
            .unwrap();
        let cfg = ChannelConfig::new(vec![ChannelAssignment::new(1, 1), ChannelAssignment::new(3, 2)]);
        let f = encode_features(&observe(&net, None), &NeighborhoodModel::default(), Some(&cfg));
        assert_eq!(f.row(0), &[0.6, 0.0, 0.0, 0.3, 0.3, 0.5]);
        assert_eq!(f.row(1), &[0.3, 0.6, 0.0, 0.0, 0.0, 0.5]);
    }

    #[test]
    fn order_is_heaviest_first_with_index_ties() {
        assert_eq!(decode_order(&[0.2, 0.5, 0.2, 0.9]), vec![3, 1, 0, 2]);
    }

    #[test]
    fn greedy_decoding_is_deterministic() {
        let m = model(1);
        let o = obs(6, 2);
        let f = encode_features(&o, &m.feature_model, None);
        let mut r1 = rng::stream(1, "a", &[]);
        let mut r2 = rng::stream(2, "b", &[]);
        let a = decode_sequential(&m, &o, &f, DecodeMode::Greedy, &mut r1).unwrap();
        let b = decode_sequential(&m, &o, &f, DecodeMode::Greedy, &mut r2).unwrap();
        assert_eq!(a, b);
        assert!(a.log_probs.iter().all(|&lp| lp <= 0.0));
        assert_eq!(a.log_probs.len(), 6);
    }

    #[test]
    fn step_distributions_are_normalized() {
        let m = model(5);
        let o = obs(7, 3);
        let f = encode_features(&o, &m.feature_model, None);
        let mut r = rng::stream(9, "s", &[]);
        let roll = decode_sequential(&m, &o, &f, DecodeMode::Sample, &mut r).unwrap();
        for dist in step_distributions(&m, &o, &f, &roll).unwrap() {
            assert!(dist.iter().all(|&p| p >= 0.0));
            assert!((dist.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn band_mismatch_is_structural() {
        let m = init_model(ModelDims::for_band(Band::Band5G), NeighborhoodModel::default(), 0).unwrap();
        let o = obs(3, 1);
        let f = encode_features(&o, &m.feature_model, None);
        let mut r = rng::stream(0, "x", &[]);
        assert!(matches!(
            decode_sequential(&m, &o, &f, DecodeMode::Greedy, &mut r),
            Err(Error::Structural(_))
        ));
    }

    #[test]
    fn select_best_edge_cases() {
        let m = model(2);
        let o = obs(4, 8);
        let f = encode_features(&o, &m.feature_model, None);
        let mut r = rng::stream(0, "x", &[]);
        let roll = decode_sequential(&m, &o, &f, DecodeMode::Sample, &mut r).unwrap();
        assert!(matches!(select_best(&m, &o, &[]), Err(Error::Usage(_))));
        assert_eq!(select_best(&m, &o, std::slice::from_ref(&roll)).unwrap(), (0, roll.config.clone()));
        let same = vec![roll.clone(), roll.clone(), roll.clone()];
        assert_eq!(select_best(&m, &o, &same).unwrap().0, 0);
    }

    #[test]
    fn zero_advantage_and_entropy_give_zero_actor_gradient() {
        let m = model(3);
        let o = obs(5, 4);
        let f = encode_features(&o, &m.feature_model, None);
        let mut r = rng::stream(0, "x", &[]);
        let roll = decode_sequential(&m, &o, &f, DecodeMode::Sample, &mut r).unwrap();
        // regret chosen so that G - V = 0
        let regret = -roll.value_estimate;
        let coeffs = LossCoefficients {
            entropy: 0.0,
            ..LossCoefficients::default()
        };
        let g = gradients(&m, &o, &roll, regret, &coeffs).unwrap();
        assert_eq!(g.advantage, 0.0);
        assert!(g.grads.decoder.tensors().iter().all(|(_, v)| v.iter().all(|&x| x == 0.0)));
    }

    #[test]
    fn value_coefficient_scales_critic_gradient_exactly() {
        let m = model(4);
        let o = obs(5, 5);
        let f = encode_features(&o, &m.feature_model, None);
        let mut r = rng::stream(0, "x", &[]);
        let roll = decode_sequential(&m, &o, &f, DecodeMode::Sample, &mut r).unwrap();
        let base = LossCoefficients::default();
        let doubled = LossCoefficients {
            value: 2.0 * base.value,
            ..base
        };
        let g1 = gradients(&m, &o, &roll, 0.3, &base).unwrap().grads;
        let g2 = gradients(&m, &o, &roll, 0.3, &doubled).unwrap().grads;
        for ((_, a), (_, b)) in g1.critic.tensors().iter().zip(g2.critic.tensors().iter()) {
            for (x, y) in a.iter().zip(b.iter()) {
                assert_eq!(2.0 * x, *y);
            }
        }
    }
}
