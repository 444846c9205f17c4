//! Closed-loop replay of load traces, policy comparison exports, run
//! configuration and run manifests.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::agent::AgentModel;
use crate::baselines::{greedy, random_policy, static_daily, StaticOptions};
use crate::calibration::ThresholdGrid;
use crate::environment::{evaluate, observe, NeighborhoodKind, NeighborhoodModel, NoiseSpec};
use crate::error::{Error, Result};
use crate::rng;
use crate::topology::{load_network, save_network, toml_error, ChannelConfig, Network};
use crate::trainer::{choose_config, TrainConfig};

pub const DEFAULT_CADENCE_MINUTES: u32 = 10;
pub const LOAD_BINS: usize = 10;

/// Per-AP offered loads over time on a fixed topology.
#[derive(Clone, Debug, PartialEq)]
pub struct LoadTrace {
    topology: Network,
    cadence_minutes: u32,
    slots: Vec<(u64, Vec<f64>)>,
}

impl LoadTrace {
    pub fn new(topology: Network, cadence_minutes: u32, slots: Vec<(u64, Vec<f64>)>) -> Result<Self> {
        if cadence_minutes == 0 {
            return Err(Error::Validation("cadence must be positive".into()));
        }
        let n = topology.n_aps();
        for (k, (slot, load)) in slots.iter().enumerate() {
            if k > 0 && *slot <= slots[k - 1].0 {
                return Err(Error::Validation(format!(
                    "slot {slot} does not follow slot {}",
                    slots[k - 1].0
                )));
            }
            if load.len() != n {
                return Err(Error::Structural(format!(
                    "slot {slot} has {} loads for {n} APs",
                    load.len()
                )));
            }
            if let Some(bad) = load.iter().find(|l| !(0.0..=1.0).contains(*l)) {
                return Err(Error::Validation(format!("slot {slot}: load {bad} outside [0, 1]")));
            }
        }
        Ok(LoadTrace {
            topology,
            cadence_minutes,
            slots,
        })
    }

    pub fn topology(&self) -> &Network {
        &self.topology
    }

    pub fn cadence_minutes(&self) -> u32 {
        self.cadence_minutes
    }

    pub fn slots(&self) -> &[(u64, Vec<f64>)] {
        &self.slots
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// The network as it looks during slot position `k`.
    pub fn network_at(&self, k: usize) -> Result<Network> {
        self.topology.with_load(self.slots[k].1.clone())
    }

    pub fn networks(&self) -> Result<Vec<Network>> {
        (0..self.len()).map(|k| self.network_at(k)).collect()
    }
}

/// `slot,ap,load`, one row per AP per slot.
pub fn write_trace<W: Write>(out: W, trace: &LoadTrace) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| Error::Structural(format!("csv write failed: {e}"));
    w.write_record(["slot", "ap", "load"]).map_err(err)?;
    for (slot, load) in &trace.slots {
        for (ap, l) in load.iter().enumerate() {
            w.write_record([slot.to_string(), ap.to_string(), l.to_string()])
                .map_err(err)?;
        }
    }
    w.flush()
        .map_err(|e| Error::Structural(format!("csv flush failed: {e}")))
}

pub fn save_trace(path: impl AsRef<Path>, trace: &LoadTrace) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_trace(file, trace)
}

#[derive(Debug, Deserialize)]
struct TraceRow {
    slot: u64,
    ap: usize,
    load: f64,
}

pub fn parse_trace(text: &str, origin: &str, topology: Network, cadence_minutes: u32) -> Result<LoadTrace> {
    let n = topology.n_aps();
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let mut slots: BTreeMap<u64, Vec<Option<f64>>> = BTreeMap::new();
    for (k, row) in reader.deserialize::<TraceRow>().enumerate() {
        let line = k + 2;
        let row = row.map_err(|e| Error::parse(format!("{origin}:{line}"), e.to_string()))?;
        if row.ap >= n {
            return Err(Error::Structural(format!(
                "{origin}:{line}: ap {} but the topology has {n} APs",
                row.ap
            )));
        }
        let entry = slots.entry(row.slot).or_insert_with(|| vec![None; n]);
        if entry[row.ap].replace(row.load).is_some() {
            return Err(Error::Validation(format!(
                "{origin}:{line}: duplicate load for slot {} ap {}",
                row.slot, row.ap
            )));
        }
    }
    let mut out = Vec::with_capacity(slots.len());
    for (slot, loads) in slots {
        let loads: Option<Vec<f64>> = loads.into_iter().collect();
        let loads = loads.ok_or_else(|| {
            Error::Structural(format!("{origin}: slot {slot} is missing loads for some APs"))
        })?;
        out.push((slot, loads));
    }
    LoadTrace::new(topology, cadence_minutes, out)
}

pub fn load_trace(path: impl AsRef<Path>, topology: Network, cadence_minutes: u32) -> Result<LoadTrace> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_trace(&text, &path.display().to_string(), topology, cadence_minutes)
}

/// Writes each network as `net_000.toml`, `net_001.toml`, ... into `dir`.
pub fn save_eval_set(dir: impl AsRef<Path>, nets: &[Network]) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (k, net) in nets.iter().enumerate() {
        save_network(net, dir.join(format!("net_{k:03}.toml")))?;
    }
    Ok(())
}

/// Every `*.toml` topology in `dir`, in file-name order.
pub fn load_eval_set(dir: impl AsRef<Path>) -> Result<Vec<Network>> {
    let dir = dir.as_ref();
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Usage(format!("{} holds no .toml topologies", dir.display())));
    }
    paths.iter().map(load_network).collect()
}

/// Shape of the synthetic daily load curve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiurnalParams {
    pub base: f64,
    pub amplitude: f64,
    /// Per-AP base offsets are uniform in `[-spread, spread]`.
    pub spread: f64,
    pub noise_std: f64,
}

impl Default for DiurnalParams {
    fn default() -> Self {
        DiurnalParams {
            base: 0.45,
            amplitude: 0.3,
            spread: 0.1,
            noise_std: 0.03,
        }
    }
}

/// A day-periodic sinusoid per AP with a random phase and offset plus
/// Gaussian jitter, clipped to `[0, 1]`.
pub fn diurnal_trace(
    topology: &Network,
    slots: usize,
    cadence_minutes: u32,
    params: &DiurnalParams,
    seed: u64,
) -> Result<LoadTrace> {
    if params.noise_std < 0.0 || !params.noise_std.is_finite() {
        return Err(Error::Validation(format!("noise_std {} must be >= 0", params.noise_std)));
    }
    let n = topology.n_aps();
    let mut rng = rng::stream(seed, "diurnal-trace", &[]);
    let shape: Vec<(f64, f64)> = (0..n)
        .map(|_| {
            let phase = rng.random_range(0.0..2.0 * PI);
            let offset = if params.spread > 0.0 {
                rng.random_range(-params.spread..=params.spread)
            } else {
                0.0
            };
            (phase, offset)
        })
        .collect();
    let jitter = Normal::new(0.0, params.noise_std)
        .map_err(|e| Error::Validation(format!("noise: {e}")))?;
    let slots_per_day = 1440.0 / cadence_minutes.max(1) as f64;
    let rows = (0..slots)
        .map(|t| {
            let angle = 2.0 * PI * t as f64 / slots_per_day;
            let load = shape
                .iter()
                .map(|&(phase, offset)| {
                    let l = params.base + offset + params.amplitude * (angle + phase).sin()
                        + jitter.sample(&mut rng);
                    l.clamp(0.0, 1.0)
                })
                .collect();
            (t as u64, load)
        })
        .collect();
    LoadTrace::new(topology.clone(), cadence_minutes, rows)
}

/// Loads alternate every slot: on even slots APs in `group` run at
/// `group_high` and the rest at `low`; on odd slots the rest run at
/// `other_high` and `group` at `low`.
pub fn two_phase_trace(
    topology: &Network,
    group: &[usize],
    group_high: f64,
    other_high: f64,
    low: f64,
    slots: usize,
    cadence_minutes: u32,
) -> Result<LoadTrace> {
    let n = topology.n_aps();
    if let Some(&bad) = group.iter().find(|&&i| i >= n) {
        return Err(Error::Structural(format!("group member {bad} but only {n} APs")));
    }
    let rows = (0..slots)
        .map(|t| {
            let load = (0..n)
                .map(|i| match (group.contains(&i), t % 2 == 0) {
                    (true, true) => group_high,
                    (false, false) => other_high,
                    _ => low,
                })
                .collect();
            (t as u64, load)
        })
        .collect();
    LoadTrace::new(topology.clone(), cadence_minutes, rows)
}

/// How the configuration for each slot is obtained.
#[derive(Clone, Copy, Debug)]
pub enum Policy<'a> {
    Drl { model: &'a AgentModel, rollouts: usize },
    Greedy,
    Static(StaticOptions),
    Random,
}

impl Policy<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            Policy::Drl { .. } => "drl",
            Policy::Greedy => "greedy",
            Policy::Static(_) => "static",
            Policy::Random => "random",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplayRow {
    pub slot: u64,
    pub ap: usize,
    pub policy: String,
    pub load: f64,
    pub block_start: usize,
    pub width: usize,
    pub utilization: f64,
    pub busy: f64,
    pub regret_contribution: f64,
}

/// Everything one policy did over one trace.
#[derive(Clone, Debug, PartialEq)]
pub struct ReplayReport {
    pub policy: String,
    pub rows: Vec<ReplayRow>,
    /// `(slot, network regret)` in trace order.
    pub slot_regret: Vec<(u64, f64)>,
    pub configs: Vec<ChannelConfig>,
}

impl ReplayReport {
    pub fn mean_regret(&self) -> f64 {
        if self.slot_regret.is_empty() {
            return 0.0;
        }
        self.slot_regret.iter().map(|(_, r)| r).sum::<f64>() / self.slot_regret.len() as f64
    }
}

/// Runs `policy` on every slot of `trace` and scores each configuration on
/// the slot's true network under `model_env`. Policies other than static see
/// the slot through `noise`, reseeded per slot.
pub fn replay(
    trace: &LoadTrace,
    policy: Policy<'_>,
    model_env: &NeighborhoodModel,
    noise: Option<&NoiseSpec>,
    seed: u64,
) -> Result<ReplayReport> {
    model_env.validate()?;
    if let Some(n) = noise {
        n.validate()?;
    }
    if let Policy::Drl { model, rollouts } = policy {
        model.dims.validate()?;
        if model.dims.band != trace.topology.band() {
            return Err(Error::Incompatible(format!(
                "model is trained for {} but the trace is on {}",
                model.dims.band,
                trace.topology.band()
            )));
        }
        if rollouts == 0 {
            return Err(Error::Usage("drl replay needs at least one rollout".into()));
        }
    }
    let networks = trace.networks()?;
    let fixed = match policy {
        Policy::Static(options) => Some(static_daily(&networks, model_env, options)?),
        _ => None,
    };
    let results: Vec<Result<(ChannelConfig, crate::environment::EvalRecord)>> = networks
        .par_iter()
        .zip(trace.slots.par_iter())
        .map(|(net, (slot, _))| {
            let slot_noise = noise.map(|n| NoiseSpec {
                seed: rng::derive_seed(n.seed, "slot-noise", &[*slot]),
                ..*n
            });
            let cfg = match policy {
                Policy::Static(_) => fixed.clone().expect("static config computed"),
                Policy::Greedy => greedy(&observe(net, slot_noise.as_ref()), model_env),
                Policy::Random => {
                    random_policy(net, rng::derive_seed(seed, "replay-random", &[*slot]))
                }
                Policy::Drl { model, rollouts } => {
                    let (best, mut candidates) =
                        choose_config(model, net, slot_noise.as_ref(), rollouts, seed, *slot)?;
                    candidates.swap_remove(best).config
                }
            };
            let record = evaluate(net, &cfg, model_env)?;
            Ok((cfg, record))
        })
        .collect();
    let name = policy.name().to_string();
    let mut report = ReplayReport {
        policy: name.clone(),
        rows: Vec::with_capacity(trace.len() * trace.topology.n_aps()),
        slot_regret: Vec::with_capacity(trace.len()),
        configs: Vec::with_capacity(trace.len()),
    };
    for ((result, net), (slot, _)) in results.into_iter().zip(&networks).zip(&trace.slots) {
        let (cfg, record) = result?;
        let contributions = record.regret_contributions(net.load(), net.band());
        for ap in 0..net.n_aps() {
            report.rows.push(ReplayRow {
                slot: *slot,
                ap,
                policy: name.clone(),
                load: net.load()[ap],
                block_start: cfg.assignments[ap].block_start,
                width: cfg.assignments[ap].width,
                utilization: record.utilization[ap],
                busy: record.busy_fraction[ap],
                regret_contribution: contributions[ap],
            });
        }
        report.slot_regret.push((*slot, record.regret));
        report.configs.push(cfg);
    }
    Ok(report)
}

pub fn write_report<W: Write>(out: W, rows: &[ReplayRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)
            .map_err(|e| Error::Structural(format!("csv write failed: {e}")))?;
    }
    if rows.is_empty() {
        w.write_record([
            "slot",
            "ap",
            "policy",
            "load",
            "block_start",
            "width",
            "utilization",
            "busy",
            "regret_contribution",
        ])
        .map_err(|e| Error::Structural(format!("csv write failed: {e}")))?;
    }
    w.flush()
        .map_err(|e| Error::Structural(format!("csv flush failed: {e}")))
}

pub fn save_report(path: impl AsRef<Path>, rows: &[ReplayRow]) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_report(file, rows)
}

pub fn parse_report(text: &str, origin: &str) -> Result<Vec<ReplayRow>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    reader
        .deserialize::<ReplayRow>()
        .enumerate()
        .map(|(k, r)| r.map_err(|e| Error::parse(format!("{origin}:{}", k + 2), e.to_string())))
        .collect()
}

pub fn load_report(path: impl AsRef<Path>) -> Result<Vec<ReplayRow>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_report(&text, &path.display().to_string())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScatterRow {
    pub slot: u64,
    pub ap: usize,
    pub mean_load: f64,
    pub utilization_a: f64,
    pub utilization_b: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub bin: usize,
    pub load_lo: f64,
    pub load_hi: f64,
    pub policy: String,
    pub count: usize,
    pub median: f64,
    pub p95: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    pub policy_a: String,
    pub policy_b: String,
    pub scatter: Vec<ScatterRow>,
    pub summary: Vec<SummaryRow>,
}

/// Linear interpolation between closest ranks, `q` in `[0, 1]`.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        n => {
            let pos = q.clamp(0.0, 1.0) * (n - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
        }
    }
}

/// Index of the equal-width bin over `[0, 1]` holding `mean_load`.
pub fn load_bin(mean_load: f64) -> usize {
    ((mean_load * LOAD_BINS as f64).floor().max(0.0) as usize).min(LOAD_BINS - 1)
}

fn slot_mean_loads(rows: &[ReplayRow]) -> BTreeMap<u64, f64> {
    let mut acc: BTreeMap<u64, (f64, usize)> = BTreeMap::new();
    for r in rows {
        let e = acc.entry(r.slot).or_insert((0.0, 0));
        e.0 += r.load;
        e.1 += 1;
    }
    acc.into_iter().map(|(s, (sum, n))| (s, sum / n as f64)).collect()
}

/// Median and 95th percentile of per-AP utilization in each network mean
/// load bin; bins without rows are omitted.
pub fn summarize(rows: &[ReplayRow]) -> Vec<SummaryRow> {
    let means = slot_mean_loads(rows);
    let mut bins: BTreeMap<(usize, String), Vec<f64>> = BTreeMap::new();
    for r in rows {
        bins.entry((load_bin(means[&r.slot]), r.policy.clone()))
            .or_default()
            .push(r.utilization);
    }
    bins.into_iter()
        .map(|((bin, policy), mut u)| {
            u.sort_by(f64::total_cmp);
            SummaryRow {
                bin,
                load_lo: bin as f64 / LOAD_BINS as f64,
                load_hi: (bin + 1) as f64 / LOAD_BINS as f64,
                policy,
                count: u.len(),
                median: percentile(&u, 0.5),
                p95: percentile(&u, 0.95),
            }
        })
        .collect()
}

/// Pairs two replays of the same trace by `(slot, ap)`.
pub fn compare(a: &[ReplayRow], b: &[ReplayRow]) -> Result<Comparison> {
    let policy_of = |rows: &[ReplayRow]| rows.first().map(|r| r.policy.clone()).unwrap_or_default();
    let keys_a: BTreeMap<(u64, usize), &ReplayRow> = a.iter().map(|r| ((r.slot, r.ap), r)).collect();
    let keys_b: BTreeMap<(u64, usize), &ReplayRow> = b.iter().map(|r| ((r.slot, r.ap), r)).collect();
    if keys_a.is_empty() || keys_b.is_empty() {
        return Err(Error::Structural("nothing to compare: a report is empty".into()));
    }
    let set_a: BTreeSet<_> = keys_a.keys().copied().collect();
    let set_b: BTreeSet<_> = keys_b.keys().copied().collect();
    if set_a != set_b {
        let fmt = |keys: Vec<&(u64, usize)>| {
            let shown: Vec<String> = keys.iter().take(10).map(|(s, ap)| format!("({s},{ap})")).collect();
            let more = if keys.len() > 10 { format!(" and {} more", keys.len() - 10) } else { String::new() };
            format!("{}{more}", shown.join(" "))
        };
        return Err(Error::Structural(format!(
            "(slot, ap) keys differ; missing from b: [{}]; missing from a: [{}]",
            fmt(set_a.difference(&set_b).collect()),
            fmt(set_b.difference(&set_a).collect()),
        )));
    }
    let means = slot_mean_loads(a);
    let scatter = keys_a
        .iter()
        .map(|(&(slot, ap), ra)| ScatterRow {
            slot,
            ap,
            mean_load: means[&slot],
            utilization_a: ra.utilization,
            utilization_b: keys_b[&(slot, ap)].utilization,
        })
        .collect();
    let mut policy_b = policy_of(b);
    let policy_a = policy_of(a);
    let mut b_rows: Vec<ReplayRow> = b.to_vec();
    if policy_b == policy_a {
        policy_b = format!("{policy_b}_b");
        for r in &mut b_rows {
            r.policy = policy_b.clone();
        }
    }
    // both sides are binned by the loads recorded in report a
    for r in &mut b_rows {
        r.load = keys_a[&(r.slot, r.ap)].load;
    }
    let mut summary = summarize(a);
    summary.extend(summarize(&b_rows));
    summary.sort_by(|x, y| (x.bin, &x.policy).cmp(&(y.bin, &y.policy)));
    Ok(Comparison {
        policy_a,
        policy_b,
        scatter,
        summary,
    })
}

/// Writes `scatter.csv` and `summary.csv` into `dir`.
pub fn write_comparison(dir: impl AsRef<Path>, cmp: &Comparison) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_rows(&dir.join("scatter.csv"), &cmp.scatter)?;
    write_rows(&dir.join("summary.csv"), &cmp.summary)
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)
        .map_err(|e| Error::Structural(format!("{}: {e}", path.display())))?;
    for row in rows {
        w.serialize(row)
            .map_err(|e| Error::Structural(format!("{}: {e}", path.display())))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn parse_summary(text: &str) -> Result<Vec<SummaryRow>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    reader
        .deserialize::<SummaryRow>()
        .enumerate()
        .map(|(k, r)| r.map_err(|e| Error::parse(format!("line {}", k + 2), e.to_string())))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceSource {
    pub topology: PathBuf,
    pub loads: PathBuf,
    #[serde(default = "default_cadence")]
    pub cadence_minutes: u32,
}

fn default_cadence() -> u32 {
    DEFAULT_CADENCE_MINUTES
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RobustnessSection {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    pub trials: usize,
    pub rollouts: usize,
    pub kind: NeighborhoodKind,
}

impl Default for RobustnessSection {
    fn default() -> Self {
        let spec = crate::robustness::SweepSpec::default();
        RobustnessSection {
            means: spec.means,
            stds: spec.stds,
            trials: spec.trials,
            rollouts: spec.rollouts,
            kind: NeighborhoodKind::Threshold,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReplaySection {
    pub rollouts: usize,
    #[serde(rename = "static")]
    pub static_options: StaticOptions,
}

impl Default for ReplaySection {
    fn default() -> Self {
        ReplaySection {
            rollouts: 8,
            static_options: StaticOptions::default(),
        }
    }
}

/// Everything a run needs, read from one TOML document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub out: PathBuf,
    pub environment: NeighborhoodModel,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseSpec>,
    pub train: TrainConfig,
    pub calibration: ThresholdGrid,
    pub robustness: RobustnessSection,
    pub replay: ReplaySection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<TraceSource>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            out: PathBuf::from("out"),
            environment: NeighborhoodModel::default(),
            noise: None,
            train: TrainConfig::default(),
            calibration: ThresholdGrid::default(),
            robustness: RobustnessSection::default(),
            replay: ReplaySection::default(),
            trace: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.environment.validate()?;
        if let Some(n) = &self.noise {
            n.validate()?;
        }
        self.train.validate()?;
        self.calibration.points()?;
        if self.robustness.trials == 0 || self.robustness.rollouts == 0 || self.replay.rollouts == 0 {
            return Err(Error::Validation("trials and rollouts must be positive".into()));
        }
        Ok(())
    }

    /// The effective configuration as TOML; parsing it yields `self`.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Structural(format!("cannot emit config: {e}")))
    }

    /// Hex SHA-256 of the effective configuration.
    pub fn hash(&self) -> Result<String> {
        Ok(hex_digest(self.to_toml()?.as_bytes()))
    }
}

pub fn parse_run_config(text: &str, origin: &str) -> Result<RunConfig> {
    let de = toml::Deserializer::parse(text).map_err(|e| toml_error(origin, text, &e))?;
    let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let located = toml_error(origin, text, &inner);
        match located {
            Error::Parse { location, message } => Error::Parse {
                location: format!("{location} at `{path}`"),
                message,
            },
            other => other,
        }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn run_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_run_config(&text, &path.display().to_string())
}

fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Provenance written next to every output set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub model_format_version: u32,
    pub checkpoint_container_version: u32,
    pub command: String,
    pub seeds: BTreeMap<String, u64>,
    pub config_hash: String,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, config: &RunConfig) -> Result<Self> {
        let mut seeds = BTreeMap::new();
        seeds.insert("run".to_string(), config.seed);
        seeds.insert("train".to_string(), config.train.seed);
        if let Some(n) = &config.noise {
            seeds.insert("noise".to_string(), n.seed);
        }
        Ok(RunManifest {
            tool: "rrm".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            model_format_version: crate::agent::MODEL_FORMAT_VERSION,
            checkpoint_container_version: crate::checkpoint::CONTAINER_VERSION,
            command: command.into(),
            seeds,
            config_hash: config.hash()?,
            outputs: Vec::new(),
        })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Structural(format!("manifest: {e}")))?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{random_network, Band};

    #[test]
    fn percentile_interpolates_linearly() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(percentile(&v, 0.5), 3.0);
        assert_eq!(percentile(&v, 0.95), 4.8);
        assert_eq!(percentile(&[2.0, 4.0], 0.5), 3.0);
        assert_eq!(percentile(&[7.0], 0.95), 7.0);
        assert!(percentile(&[], 0.5).is_nan());
    }

    #[test]
    fn load_bins_cover_unit_interval() {
        assert_eq!(load_bin(0.0), 0);
        assert_eq!(load_bin(0.099), 0);
        assert_eq!(load_bin(0.1), 1);
        assert_eq!(load_bin(1.0), 9);
    }

    #[test]
    fn trace_validation() {
        let net = random_network(3, Band::Band2G4, 2.0, 1).unwrap();
        assert!(LoadTrace::new(net.clone(), 10, vec![(0, vec![0.1; 3]), (0, vec![0.1; 3])]).is_err());
        assert!(LoadTrace::new(net.clone(), 10, vec![(0, vec![0.1; 2])]).is_err());
        assert!(LoadTrace::new(net.clone(), 10, vec![(0, vec![1.2; 3])]).is_err());
        assert!(LoadTrace::new(net, 10, vec![(0, vec![0.1; 3]), (3, vec![0.2; 3])]).is_ok());
    }

    #[test]
    fn trace_csv_round_trips() {
        let net = random_network(4, Band::Band2G4, 2.0, 3).unwrap();
        let trace = diurnal_trace(&net, 12, 10, &DiurnalParams::default(), 5).unwrap();
        let mut buf = Vec::new();
        write_trace(&mut buf, &trace).unwrap();
        let back = parse_trace(std::str::from_utf8(&buf).unwrap(), "t.csv", net, 10).unwrap();
        assert_eq!(back, trace);
    }

    #[test]
    fn incomplete_trace_is_structural() {
        let net = random_network(2, Band::Band2G4, 2.0, 3).unwrap();
        let err = parse_trace("slot,ap,load\n0,0,0.5\n", "t.csv", net, 10).unwrap_err();
        assert!(matches!(err, Error::Structural(_)), "{err}");
    }

    #[test]
    fn constant_trace_greedy_equals_static() {
        let net = random_network(5, Band::Band2G4, 3.0, 8).unwrap();
        let trace = LoadTrace::new(net.clone(), 10, (0..6).map(|t| (t, net.load().to_vec())).collect()).unwrap();
        let env = NeighborhoodModel::default();
        let g = replay(&trace, Policy::Greedy, &env, None, 0).unwrap();
        let s = replay(&trace, Policy::Static(StaticOptions::default()), &env, None, 0).unwrap();
        assert!(g.configs.windows(2).all(|w| w[0] == w[1]));
        assert_eq!(g.configs, s.configs);
        assert_eq!(g.slot_regret, s.slot_regret);
        let strip = |rows: &[ReplayRow]| -> Vec<ReplayRow> {
            rows.iter().cloned().map(|mut r| { r.policy.clear(); r }).collect()
        };
        assert_eq!(strip(&g.rows), strip(&s.rows));
    }

    #[test]
    fn self_comparison_lies_on_the_diagonal() {
        let net = random_network(4, Band::Band2G4, 3.0, 2).unwrap();
        let trace = diurnal_trace(&net, 20, 10, &DiurnalParams::default(), 1).unwrap();
        let r = replay(&trace, Policy::Random, &NeighborhoodModel::default(), None, 3).unwrap();
        let cmp = compare(&r.rows, &r.rows).unwrap();
        assert!(cmp.scatter.iter().all(|p| p.utilization_a == p.utilization_b));
        let a: Vec<_> = cmp.summary.iter().filter(|s| s.policy == "random").collect();
        let b: Vec<_> = cmp.summary.iter().filter(|s| s.policy == "random_b").collect();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!((x.bin, x.count, x.median, x.p95), (y.bin, y.count, y.median, y.p95));
        }
    }

    #[test]
    fn key_mismatch_lists_missing_keys() {
        let net = random_network(3, Band::Band2G4, 3.0, 2).unwrap();
        let trace = diurnal_trace(&net, 4, 10, &DiurnalParams::default(), 1).unwrap();
        let r = replay(&trace, Policy::Greedy, &NeighborhoodModel::default(), None, 0).unwrap();
        let short = &r.rows[..r.rows.len() - 1];
        let msg = compare(&r.rows, short).unwrap_err().to_string();
        assert!(msg.contains("(3,2)"), "{msg}");
        assert!(compare(&r.rows, &[]).is_err());
    }

    #[test]
    fn report_csv_round_trips() {
        let net = random_network(3, Band::Band2G4, 3.0, 2).unwrap();
        let trace = diurnal_trace(&net, 5, 10, &DiurnalParams::default(), 1).unwrap();
        let r = replay(&trace, Policy::Random, &NeighborhoodModel::default(), None, 9).unwrap();
        let mut buf = Vec::new();
        write_report(&mut buf, &r.rows).unwrap();
        assert_eq!(parse_report(std::str::from_utf8(&buf).unwrap(), "r").unwrap(), r.rows);
    }

    #[test]
    fn minimal_run_config_fills_defaults() {
        let cfg = parse_run_config("seed = 3\n", "run.toml").unwrap();
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.train, TrainConfig::default());
        assert_eq!(cfg.environment, NeighborhoodModel::default());
    }

    #[test]
    fn misspelled_key_is_named_with_its_path() {
        let text = "seed = 1\n\n[train]\niterations = 10\nrolouts = 4\n";
        let err = parse_run_config(text, "run.toml").unwrap_err().to_string();
        assert!(err.contains("rolouts"), "{err}");
        assert!(err.contains("run.toml:5"), "{err}");
        assert!(err.contains("train"), "{err}");
    }

    #[test]
    fn type_mismatch_and_missing_field_are_reported() {
        let err = parse_run_config("[train]\niterations = \"ten\"\n", "run.toml").unwrap_err().to_string();
        assert!(err.contains("train.iterations"), "{err}");
        let err = parse_run_config("[trace]\nloads = \"l.csv\"\n", "run.toml").unwrap_err().to_string();
        assert!(err.contains("topology"), "{err}");
    }

    #[test]
    fn effective_config_round_trips() {
        let mut cfg = RunConfig::default();
        cfg.seed = 11;
        cfg.noise = Some(NoiseSpec::new(-3.0, 1.5, 4).unwrap());
        cfg.environment = NeighborhoodModel::sigmoid(-80.0, 5.0);
        cfg.trace = Some(TraceSource {
            topology: "net.toml".into(),
            loads: "loads.csv".into(),
            cadence_minutes: 10,
        });
        let text = cfg.to_toml().unwrap();
        assert_eq!(parse_run_config(&text, "effective").unwrap(), cfg);
        assert_eq!(cfg.hash().unwrap().len(), 64);
        assert_ne!(cfg.hash().unwrap(), RunConfig::default().hash().unwrap());
    }
}
