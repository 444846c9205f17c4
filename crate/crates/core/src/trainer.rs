//! Seeded actor-critic training loop with a step-decay learning rate,
//! periodic evaluation and resumable checkpoints.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agent::{
    decode_sequential, encode_features, gradients, init_model, select_best, AgentModel,
    AgentParams, DecodeMode, LossCoefficients, ModelDims, Rollout,
};
use crate::checkpoint::{read_checkpoint, write_checkpoint, Checkpoint, CheckpointMeta};
use crate::environment::{evaluate, observe, EvalRecord, NeighborhoodModel, NoiseSpec};
use crate::error::{Error, Result};
use crate::rng;
use crate::topology::{random_network_with, Band, Network, NetworkGenParams};

const EMA_DECAY: f64 = 0.99;

/// Distribution of synthetic training and evaluation instances.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceGenerator {
    pub band: Band,
    pub n_min: usize,
    pub n_max: usize,
    pub density_min: f64,
    pub density_max: f64,
    #[serde(default)]
    pub shadowing_db: f64,
}

impl Default for InstanceGenerator {
    fn default() -> Self {
        InstanceGenerator {
            band: Band::Band2G4,
            n_min: 3,
            n_max: 12,
            density_min: 2.0,
            density_max: 4.0,
            shadowing_db: 0.0,
        }
    }
}

impl InstanceGenerator {
    pub fn validate(&self) -> Result<()> {
        if self.n_min == 0 || self.n_min > self.n_max {
            return Err(Error::Validation(format!(
                "need 1 <= n_min <= n_max, got {}..{}",
                self.n_min, self.n_max
            )));
        }
        if !(self.density_min > 0.0) || self.density_min > self.density_max {
            return Err(Error::Validation(format!(
                "need 0 < density_min <= density_max, got {}..{}",
                self.density_min, self.density_max
            )));
        }
        Ok(())
    }

    /// Instance keyed by `(seed, tag, indices)`.
    pub fn sample(&self, seed: u64, tag: &str, indices: &[u64]) -> Result<Network> {
        let mut r = rng::stream(seed, tag, indices);
        let n = r.random_range(self.n_min..=self.n_max);
        let density = if self.density_max > self.density_min {
            r.random_range(self.density_min..=self.density_max)
        } else {
            self.density_min
        };
        let params = NetworkGenParams {
            density,
            shadowing_db: self.shadowing_db,
        };
        random_network_with(n, self.band, params, r.random())
    }

    pub fn eval_set(&self, seed: u64, size: usize) -> Result<Vec<Network>> {
        (0..size as u64)
            .map(|i| self.sample(seed, "eval-set", &[i]))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    #[default]
    Sgd,
    Adam,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub iterations: u64,
    /// Rollouts per instance (K).
    pub rollouts: usize,
    pub lr_initial: f64,
    pub lr_final: f64,
    pub lr_decay_every: u64,
    pub batch_instances: usize,
    /// 0 disables periodic evaluation.
    pub eval_every: u64,
    pub eval_set_size: usize,
    /// 0 writes only the final checkpoint.
    pub checkpoint_every: u64,
    pub seed: u64,
    pub generator: InstanceGenerator,
    pub environment: NeighborhoodModel,
    pub coefficients: LossCoefficients,
    pub optimizer: OptimizerKind,
    /// Global gradient-norm clip; 0 disables.
    pub grad_clip: f64,
    /// Decode the K rollouts on the rayon pool.
    pub parallel: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            iterations: 50_000,
            rollouts: 8,
            lr_initial: 3e-3,
            lr_final: 1e-4,
            lr_decay_every: 5_000,
            batch_instances: 1,
            eval_every: 1_000,
            eval_set_size: 20,
            checkpoint_every: 10_000,
            seed: 0,
            generator: InstanceGenerator::default(),
            environment: NeighborhoodModel::default(),
            coefficients: LossCoefficients::default(),
            optimizer: OptimizerKind::default(),
            grad_clip: 1.0,
            parallel: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr_final > 0.0) || self.lr_initial < self.lr_final {
            return Err(Error::Validation(format!(
                "need lr_initial >= lr_final > 0, got {} and {}",
                self.lr_initial, self.lr_final
            )));
        }
        if self.rollouts == 0 || self.batch_instances == 0 {
            return Err(Error::Validation("rollouts and batch_instances must be >= 1".into()));
        }
        if self.lr_decay_every == 0 {
            return Err(Error::Validation("lr_decay_every must be >= 1".into()));
        }
        if self.eval_every > 0 && self.eval_set_size == 0 {
            return Err(Error::Validation("eval_set_size must be >= 1 when evaluating".into()));
        }
        self.generator.validate()?;
        self.environment.validate()
    }

    /// Step decay `max(lr_final, lr_initial * gamma^floor(k / every))`, with
    /// `gamma` chosen so the last iteration runs at `lr_final`.
    pub fn learning_rate(&self, k: u64) -> f64 {
        let last_step = self.iterations.saturating_sub(1) / self.lr_decay_every;
        if last_step == 0 {
            return self.lr_initial;
        }
        let gamma = (self.lr_final / self.lr_initial).powf(1.0 / last_step as f64);
        let step = (k / self.lr_decay_every).min(last_step);
        if step == last_step {
            return self.lr_final;
        }
        (self.lr_initial * gamma.powi(step as i32)).max(self.lr_final)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainRow {
    pub iteration: u64,
    pub mean_regret: f64,
    pub moving_avg_regret: f64,
    pub lr: f64,
    pub wall_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub iteration: u64,
    pub eval_mean_regret: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainLog {
    pub rows: Vec<TrainRow>,
    pub evals: Vec<EvalRow>,
}

impl TrainLog {
    pub fn write_csv(&self, dir: &Path) -> Result<()> {
        write_rows(
            &dir.join("train_log.csv"),
            &["iteration", "mean_regret", "moving_avg_regret", "lr", "wall_seconds"],
            &self.rows,
        )?;
        write_rows(&dir.join("eval_log.csv"), &["iteration", "eval_mean_regret"], &self.evals)
    }

    /// Regret columns only; the wall-clock column is not reproducible.
    pub fn regret_columns(&self) -> Vec<(u64, f64, f64)> {
        self.rows
            .iter()
            .map(|r| (r.iteration, r.mean_regret, r.moving_avg_regret))
            .collect()
    }
}

fn write_rows<T: Serialize>(path: &Path, header: &[&str], rows: &[T]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    w.write_record(header).map_err(|e| Error::Structural(format!("{}: {e}", path.display())))?;
    for r in rows {
        w.serialize(r)
            .map_err(|e| Error::Structural(format!("{}: {e}", path.display())))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Aggregate outcome of running the policy over an evaluation set.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyEval {
    pub mean_regret: f64,
    pub records: Vec<EvalRecord>,
    pub chosen: Vec<usize>,
}

/// K sampled rollouts plus one greedy rollout per instance, choice by the
/// selector, regret measured on the noiseless ground truth.
pub fn choose_config(
    model: &AgentModel,
    net: &Network,
    noise: Option<&NoiseSpec>,
    k: usize,
    seed: u64,
    instance: u64,
) -> Result<(usize, Vec<Rollout>)> {
    let obs = observe(net, noise);
    let features = encode_features(&obs, &model.feature_model, None);
    let mut candidates = Vec::with_capacity(k + 1);
    for r in 0..k {
        let mut stream = rng::stream(seed, "policy-rollout", &[instance, r as u64]);
        candidates.push(decode_sequential(model, &obs, &features, DecodeMode::Sample, &mut stream)?);
    }
    let mut unused = rng::stream(seed, "policy-greedy", &[instance]);
    candidates.push(decode_sequential(model, &obs, &features, DecodeMode::Greedy, &mut unused)?);
    let (best, _) = select_best(model, &obs, &candidates)?;
    Ok((best, candidates))
}

/// Noise for instance `i` is drawn from a stream keyed by `noise.seed` and
/// `i`; rollout sampling streams depend only on `seed` and `i`, so the same
/// seed with zero noise reproduces the clean result exactly.
pub fn evaluate_policy(
    model: &AgentModel,
    eval_set: &[Network],
    model_env: &NeighborhoodModel,
    noise: Option<&NoiseSpec>,
    k: usize,
    seed: u64,
) -> Result<PolicyEval> {
    if eval_set.is_empty() {
        return Err(Error::Usage("evaluation set is empty".into()));
    }
    let results: Vec<Result<(usize, EvalRecord)>> = eval_set
        .par_iter()
        .enumerate()
        .map(|(i, net)| {
            let instance_noise = noise.map(|n| NoiseSpec {
                seed: rng::derive_seed(n.seed, "instance-noise", &[i as u64]),
                ..*n
            });
            let (best, candidates) =
                choose_config(model, net, instance_noise.as_ref(), k, seed, i as u64)?;
            Ok((best, evaluate(net, &candidates[best].config, model_env)?))
        })
        .collect();
    let mut records = Vec::with_capacity(eval_set.len());
    let mut chosen = Vec::with_capacity(eval_set.len());
    for r in results {
        let (c, rec) = r?;
        chosen.push(c);
        records.push(rec);
    }
    let mean_regret = records.iter().map(|r| r.regret).sum::<f64>() / records.len() as f64;
    Ok(PolicyEval {
        mean_regret,
        records,
        chosen,
    })
}

#[derive(Clone, Debug)]
enum OptimizerState {
    Sgd,
    Adam {
        m: AgentParams,
        v: AgentParams,
        t: u64,
    },
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

impl OptimizerState {
    fn new(kind: OptimizerKind, dims: &ModelDims) -> Self {
        match kind {
            OptimizerKind::Sgd => OptimizerState::Sgd,
            OptimizerKind::Adam => OptimizerState::Adam {
                m: AgentParams::zeros(dims),
                v: AgentParams::zeros(dims),
                t: 0,
            },
        }
    }

    fn step(&mut self, params: &mut AgentParams, grads: &AgentParams, lr: f64) {
        match self {
            OptimizerState::Sgd => params.add_scaled(grads, -lr),
            OptimizerState::Adam { m, v, t } => {
                *t += 1;
                let c1 = 1.0 - ADAM_BETA1.powi(*t as i32);
                let c2 = 1.0 - ADAM_BETA2.powi(*t as i32);
                let g = grads.tensors();
                for (((_, p), (_, mt)), ((_, vt), (_, gt))) in params
                    .tensors_mut()
                    .into_iter()
                    .zip(m.tensors_mut())
                    .zip(v.tensors_mut().into_iter().zip(g))
                {
                    for k in 0..p.len() {
                        mt[k] = ADAM_BETA1 * mt[k] + (1.0 - ADAM_BETA1) * gt[k];
                        vt[k] = ADAM_BETA2 * vt[k] + (1.0 - ADAM_BETA2) * gt[k] * gt[k];
                        p[k] -= lr * (mt[k] / c1) / ((vt[k] / c2).sqrt() + ADAM_EPS);
                    }
                }
            }
        }
    }

    fn to_tensors(&self) -> Vec<(String, Vec<f64>)> {
        match self {
            OptimizerState::Sgd => Vec::new(),
            OptimizerState::Adam { m, v, t } => {
                let mut out = vec![("adam.t".to_string(), vec![*t as f64])];
                for (name, vals) in m.tensors() {
                    out.push((format!("adam.m.{name}"), vals.to_vec()));
                }
                for (name, vals) in v.tensors() {
                    out.push((format!("adam.v.{name}"), vals.to_vec()));
                }
                out
            }
        }
    }

    fn from_tensors(kind: OptimizerKind, dims: &ModelDims, extra: &[(String, Vec<f64>)]) -> Result<Self> {
        let mut state = OptimizerState::new(kind, dims);
        if let OptimizerState::Adam { m, v, t } = &mut state {
            let find = |name: &str| -> Result<&Vec<f64>> {
                extra
                    .iter()
                    .find(|(n, _)| n == name)
                    .map(|(_, v)| v)
                    .ok_or_else(|| Error::Incompatible(format!("checkpoint lacks `{name}`")))
            };
            *t = find("adam.t")?[0] as u64;
            for (prefix, target) in [("adam.m", m), ("adam.v", v)] {
                for (name, slot) in target.tensors_mut() {
                    let src = find(&format!("{prefix}.{name}"))?;
                    if src.len() != slot.len() {
                        return Err(Error::Structural(format!("{prefix}.{name} has wrong length")));
                    }
                    slot.copy_from_slice(src);
                }
            }
        }
        Ok(state)
    }
}

pub fn checkpoint_path(out_dir: &Path, iteration: u64) -> PathBuf {
    out_dir.join(format!("ckpt_{iteration}"))
}

struct Progress {
    model: AgentModel,
    optimizer: OptimizerState,
    ema: Option<f64>,
    next_iteration: u64,
}

impl Progress {
    fn checkpoint(&self, seed: u64) -> Checkpoint {
        let mut extra = self.optimizer.to_tensors();
        extra.push((
            "trainer.ema".into(),
            match self.ema {
                Some(e) => vec![e],
                None => vec![],
            },
        ));
        Checkpoint {
            model: self.model.clone(),
            meta: CheckpointMeta {
                seed,
                iteration: self.next_iteration,
            },
            extra,
        }
    }
}

/// Trains from scratch. Writes logs and `ckpt_<iter>` files when `out_dir`
/// is given.
pub fn train(cfg: &TrainConfig, out_dir: Option<&Path>) -> Result<(AgentModel, TrainLog)> {
    cfg.validate()?;
    let model = init_model(ModelDims::for_band(cfg.generator.band), cfg.environment, cfg.seed)?;
    let dims = model.dims;
    run(
        cfg,
        out_dir,
        Progress {
            model,
            optimizer: OptimizerState::new(cfg.optimizer, &dims),
            ema: None,
            next_iteration: 0,
        },
    )
}

/// Continues a run from a checkpoint written by [`train`] with the same
/// configuration.
pub fn resume(
    cfg: &TrainConfig,
    checkpoint: &Path,
    out_dir: Option<&Path>,
) -> Result<(AgentModel, TrainLog)> {
    cfg.validate()?;
    let ckpt = read_checkpoint(checkpoint)?;
    if ckpt.meta.seed != cfg.seed {
        return Err(Error::Incompatible(format!(
            "checkpoint seed {} differs from config seed {}",
            ckpt.meta.seed, cfg.seed
        )));
    }
    if ckpt.model.dims != ModelDims::for_band(cfg.generator.band) {
        return Err(Error::Incompatible("checkpoint dims differ from config".into()));
    }
    let optimizer = OptimizerState::from_tensors(cfg.optimizer, &ckpt.model.dims, &ckpt.extra)?;
    let ema = ckpt
        .extra
        .iter()
        .find(|(n, _)| n == "trainer.ema")
        .and_then(|(_, v)| v.first().copied());
    run(
        cfg,
        out_dir,
        Progress {
            model: ckpt.model,
            optimizer,
            ema,
            next_iteration: ckpt.meta.iteration,
        },
    )
}

struct Sampled {
    regret: f64,
    grads: AgentParams,
}

fn iteration_batch(cfg: &TrainConfig, model: &AgentModel, k: u64) -> Result<Vec<Sampled>> {
    let mut out = Vec::with_capacity(cfg.batch_instances * cfg.rollouts);
    for b in 0..cfg.batch_instances as u64 {
        let net = cfg.generator.sample(cfg.seed, "train-instance", &[k, b])?;
        let obs = observe(&net, None);
        let features = encode_features(&obs, &model.feature_model, None);
        let one = |r: usize| -> Result<Sampled> {
            let mut stream = rng::stream(cfg.seed, "train-rollout", &[k, b, r as u64]);
            let rollout = decode_sequential(model, &obs, &features, DecodeMode::Sample, &mut stream)?;
            let regret = evaluate(&net, &rollout.config, &cfg.environment)?.regret;
            let g = gradients(model, &obs, &rollout, regret, &cfg.coefficients)?;
            Ok(Sampled {
                regret,
                grads: g.grads,
            })
        };
        let batch: Vec<Result<Sampled>> = if cfg.parallel {
            (0..cfg.rollouts).into_par_iter().map(one).collect()
        } else {
            (0..cfg.rollouts).map(one).collect()
        };
        for s in batch {
            out.push(s?);
        }
    }
    Ok(out)
}

fn run(cfg: &TrainConfig, out_dir: Option<&Path>, mut state: Progress) -> Result<(AgentModel, TrainLog)> {
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let eval_set = if cfg.eval_every > 0 {
        cfg.generator.eval_set(cfg.seed, cfg.eval_set_size)?
    } else {
        Vec::new()
    };
    let mut log = TrainLog::default();
    let started = Instant::now();
    while state.next_iteration < cfg.iterations {
        let k = state.next_iteration;
        let lr = cfg.learning_rate(k);
        let outcome = iteration_batch(cfg, &state.model, k).and_then(|samples| {
            let mut total = AgentParams::zeros(&state.model.dims);
            let mut regret_sum = 0.0;
            for s in &samples {
                total.add_scaled(&s.grads, 1.0);
                regret_sum += s.regret;
            }
            total.scale(1.0 / samples.len() as f64);
            if cfg.grad_clip > 0.0 {
                let norm = total.l2_norm();
                if norm > cfg.grad_clip {
                    total.scale(cfg.grad_clip / norm);
                }
            }
            if let Some(name) = total.first_non_finite() {
                return Err(Error::Numerical {
                    tensor: format!("grad.{name}"),
                });
            }
            Ok((total, regret_sum / samples.len() as f64))
        });
        let (grads, mean_regret) = match outcome {
            Ok(v) => v,
            Err(e @ Error::Numerical { .. }) => {
                if let Some(dir) = out_dir {
                    write_checkpoint(checkpoint_path(dir, k), &state.checkpoint(cfg.seed))?;
                    log.write_csv(dir)?;
                }
                return Err(e);
            }
            Err(e) => return Err(e),
        };
        let previous = state.model.params.clone();
        state.optimizer.step(&mut state.model.params, &grads, lr);
        if let Some(name) = state.model.params.first_non_finite() {
            state.model.params = previous;
            if let Some(dir) = out_dir {
                write_checkpoint(checkpoint_path(dir, k), &state.checkpoint(cfg.seed))?;
                log.write_csv(dir)?;
            }
            return Err(Error::Numerical { tensor: name });
        }
        let ema = match state.ema {
            Some(e) => EMA_DECAY * e + (1.0 - EMA_DECAY) * mean_regret,
            None => mean_regret,
        };
        state.ema = Some(ema);
        state.next_iteration = k + 1;
        let iteration = k + 1;
        log.rows.push(TrainRow {
            iteration,
            mean_regret,
            moving_avg_regret: ema,
            lr,
            wall_seconds: started.elapsed().as_secs_f64(),
        });
        if cfg.eval_every > 0 && iteration.is_multiple_of(cfg.eval_every) {
            let eval_seed = rng::derive_seed(cfg.seed, "train-eval", &[iteration]);
            let result = evaluate_policy(
                &state.model,
                &eval_set,
                &cfg.environment,
                None,
                cfg.rollouts,
                eval_seed,
            )?;
            log.evals.push(EvalRow {
                iteration,
                eval_mean_regret: result.mean_regret,
            });
        }
        if let Some(dir) = out_dir {
            let periodic = cfg.checkpoint_every > 0 && iteration.is_multiple_of(cfg.checkpoint_every);
            if periodic || iteration == cfg.iterations {
                write_checkpoint(checkpoint_path(dir, iteration), &state.checkpoint(cfg.seed))?;
            }
        }
    }
    if let Some(dir) = out_dir {
        log.write_csv(dir)?;
    }
    Ok((state.model, log))
}

/// Writes a CSV of `(iteration, eval_mean_regret)` rows to any writer.
pub fn write_eval_rows<W: Write>(out: W, rows: &[EvalRow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(["iteration", "eval_mean_regret"])
        .map_err(|e| Error::Structural(format!("csv write failed: {e}")))?;
    for r in rows {
        w.serialize(r)
            .map_err(|e| Error::Structural(format!("csv write failed: {e}")))?;
    }
    w.flush()
        .map_err(|e| Error::Structural(format!("csv flush failed: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> TrainConfig {
        TrainConfig {
            iterations: 30,
            rollouts: 3,
            lr_decay_every: 10,
            eval_every: 10,
            eval_set_size: 3,
            checkpoint_every: 10,
            seed: 5,
            generator: InstanceGenerator {
                n_min: 2,
                n_max: 4,
                ..InstanceGenerator::default()
            },
            ..TrainConfig::default()
        }
    }

    #[test]
    fn schedule_is_monotone_and_bounded() {
        let cfg = TrainConfig {
            iterations: 1000,
            lr_decay_every: 90,
            lr_initial: 3e-3,
            lr_final: 1e-4,
            ..TrainConfig::default()
        };
        let mut prev = f64::INFINITY;
        for k in 0..1000 {
            let lr = cfg.learning_rate(k);
            assert!(lr <= prev && lr >= cfg.lr_final && lr <= cfg.lr_initial);
            prev = lr;
        }
        assert_eq!(cfg.learning_rate(0), 3e-3);
        assert_eq!(cfg.learning_rate(999), 1e-4);
    }

    #[test]
    fn zero_iterations_returns_the_initial_model() {
        let cfg = TrainConfig {
            iterations: 0,
            ..small()
        };
        let (model, log) = train(&cfg, None).unwrap();
        assert!(log.rows.is_empty() && log.evals.is_empty());
        let fresh = init_model(ModelDims::for_band(Band::Band2G4), cfg.environment, cfg.seed).unwrap();
        assert_eq!(model, fresh);
    }

    #[test]
    fn invalid_config_is_rejected() {
        let cfg = TrainConfig {
            lr_initial: 1e-5,
            lr_final: 1e-4,
            ..small()
        };
        assert!(train(&cfg, None).is_err());
        let cfg = TrainConfig {
            rollouts: 0,
            ..small()
        };
        assert!(train(&cfg, None).is_err());
    }

    #[test]
    fn training_is_reproducible_across_parallelism() {
        let (m1, l1) = train(&small(), None).unwrap();
        let (m2, l2) = train(&TrainConfig { parallel: true, ..small() }, None).unwrap();
        assert_eq!(l1.regret_columns(), l2.regret_columns());
        assert_eq!(l1.evals, l2.evals);
        assert_eq!(m1, m2);
        assert_eq!(l1.evals.iter().map(|e| e.iteration).collect::<Vec<_>>(), vec![10, 20, 30]);
    }

    #[test]
    fn resume_matches_uninterrupted_run() {
        for optimizer in [OptimizerKind::Adam, OptimizerKind::Sgd] {
            let cfg = TrainConfig { optimizer, ..small() };
            let dir = tempfile::tempdir().unwrap();
            let (full_model, full_log) = train(&cfg, Some(dir.path())).unwrap();
            let (resumed_model, resumed_log) =
                resume(&cfg, &checkpoint_path(dir.path(), 10), None).unwrap();
            assert_eq!(resumed_model, full_model);
            assert_eq!(resumed_log.evals, full_log.evals[1..].to_vec());
            assert_eq!(resumed_log.regret_columns(), full_log.regret_columns()[10..].to_vec());
            assert!(dir.path().join("train_log.csv").exists());
            assert!(checkpoint_path(dir.path(), 30).exists());
        }
    }

    #[test]
    fn noiseless_policy_eval_is_deterministic_and_zero_noise_is_clean() {
        let (model, _) = train(&small(), None).unwrap();
        let set = small().generator.eval_set(9, 4).unwrap();
        let env = NeighborhoodModel::default();
        let a = evaluate_policy(&model, &set, &env, None, 1, 3).unwrap();
        let b = evaluate_policy(&model, &set, &env, None, 1, 3).unwrap();
        assert_eq!(a, b);
        let zero = NoiseSpec::new(0.0, 0.0, 77).unwrap();
        assert_eq!(evaluate_policy(&model, &set, &env, Some(&zero), 1, 3).unwrap(), a);
        assert!(evaluate_policy(&model, &[], &env, None, 1, 3).is_err());
    }
}
