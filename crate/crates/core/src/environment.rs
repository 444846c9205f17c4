//! Airtime-interference replica: neighbor weights, busy fractions, regret
//! and noisy observations.

use std::io::Write;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::topology::{Band, ChannelConfig, Network};

pub const DEFAULT_THRESHOLD_DBM: f64 = -82.0;
pub const DEFAULT_SPREAD_DB: f64 = 6.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NeighborhoodKind {
    Threshold,
    Sigmoid,
}

impl std::str::FromStr for NeighborhoodKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "threshold" => Ok(NeighborhoodKind::Threshold),
            "sigmoid" => Ok(NeighborhoodKind::Sigmoid),
            other => Err(Error::Usage(format!("unknown neighborhood kind `{other}`"))),
        }
    }
}

impl std::fmt::Display for NeighborhoodKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            NeighborhoodKind::Threshold => "threshold",
            NeighborhoodKind::Sigmoid => "sigmoid",
        })
    }
}

/// Which pairs of APs hear each other, and how strongly.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NeighborhoodModel {
    pub kind: NeighborhoodKind,
    #[serde(default = "default_threshold")]
    pub threshold_dbm: f64,
    #[serde(default = "default_spread")]
    pub spread_db: f64,
}

fn default_threshold() -> f64 {
    DEFAULT_THRESHOLD_DBM
}

fn default_spread() -> f64 {
    DEFAULT_SPREAD_DB
}

impl Default for NeighborhoodModel {
    fn default() -> Self {
        NeighborhoodModel::threshold(DEFAULT_THRESHOLD_DBM)
    }
}

impl NeighborhoodModel {
    pub fn threshold(threshold_dbm: f64) -> Self {
        NeighborhoodModel {
            kind: NeighborhoodKind::Threshold,
            threshold_dbm,
            spread_db: DEFAULT_SPREAD_DB,
        }
    }

    pub fn sigmoid(threshold_dbm: f64, spread_db: f64) -> Self {
        NeighborhoodModel {
            kind: NeighborhoodKind::Sigmoid,
            threshold_dbm,
            spread_db,
        }
    }

    pub fn with_kind(self, kind: NeighborhoodKind) -> Self {
        NeighborhoodModel { kind, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.spread_db > 0.0) {
            return Err(Error::Validation(format!(
                "spread_db must be > 0, got {}",
                self.spread_db
            )));
        }
        if !(-110.0..=0.0).contains(&self.threshold_dbm) {
            return Err(Error::Validation(format!(
                "threshold_dbm {} outside [-110, 0]",
                self.threshold_dbm
            )));
        }
        Ok(())
    }

    /// Neighbor weight in `[0, 1]`. The threshold is inclusive; the sigmoid
    /// goes from 0.12 to 0.88 across one spread centred on the threshold.
    pub fn weight(&self, rssi_dbm: f64) -> f64 {
        match self.kind {
            NeighborhoodKind::Threshold => {
                if rssi_dbm >= self.threshold_dbm {
                    1.0
                } else {
                    0.0
                }
            }
            NeighborhoodKind::Sigmoid => {
                let x = -4.0 * (rssi_dbm - self.threshold_dbm) / self.spread_db;
                1.0 / (1.0 + x.exp())
            }
        }
    }
}

pub fn neighbor_weight(rssi_dbm: f64, model: &NeighborhoodModel) -> f64 {
    model.weight(rssi_dbm)
}

/// Read access shared by ground truth ([`Network`]) and what the agent sees
/// ([`Observation`]).
pub trait RadioView {
    fn band(&self) -> Band;
    fn n_aps(&self) -> usize;
    /// RSSI received by `i` from `j`.
    fn rssi(&self, i: usize, j: usize) -> f64;
    fn load(&self) -> &[f64];
}

impl RadioView for Network {
    fn band(&self) -> Band {
        Network::band(self)
    }
    fn n_aps(&self) -> usize {
        Network::n_aps(self)
    }
    fn rssi(&self, i: usize, j: usize) -> f64 {
        Network::rssi(self, i, j)
    }
    fn load(&self) -> &[f64] {
        Network::load(self)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub mean_db: f64,
    pub std_db: f64,
    #[serde(default)]
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(mean_db: f64, std_db: f64, seed: u64) -> Result<Self> {
        let spec = NoiseSpec {
            mean_db,
            std_db,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.std_db >= 0.0) || !self.mean_db.is_finite() || !self.std_db.is_finite() {
            return Err(Error::Validation(format!(
                "noise needs finite mean and std >= 0, got {self:?}"
            )));
        }
        Ok(())
    }
}

/// RSSIs and loads as seen by the agent. May be noisy; never used for
/// ground-truth evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    band: Band,
    n_aps: usize,
    observed_rssi: Vec<f64>,
    load: Vec<f64>,
}

impl Observation {
    pub fn new(band: Band, observed_rssi: Vec<f64>, load: Vec<f64>) -> Result<Self> {
        let n = load.len();
        if observed_rssi.len() != n * n {
            return Err(Error::Structural(format!(
                "observed rssi has {} entries, expected {n}x{n}",
                observed_rssi.len()
            )));
        }
        Ok(Observation {
            band,
            n_aps: n,
            observed_rssi,
            load,
        })
    }

    pub fn observed_rssi(&self) -> &[f64] {
        &self.observed_rssi
    }

    /// Copy with loads of undecided APs overwritten; used by masking tests
    /// and warm starts.
    pub fn with_load(&self, load: Vec<f64>) -> Result<Self> {
        Observation::new(self.band, self.observed_rssi.clone(), load)
    }
}

impl RadioView for Observation {
    fn band(&self) -> Band {
        self.band
    }
    fn n_aps(&self) -> usize {
        self.n_aps
    }
    fn rssi(&self, i: usize, j: usize) -> f64 {
        self.observed_rssi[i * self.n_aps + j]
    }
    fn load(&self) -> &[f64] {
        &self.load
    }
}

/// Perturbs every off-diagonal RSSI with independent Gaussian noise drawn
/// row-major from the noise seed's stream. Loads are copied as-is.
pub fn observe(net: &Network, noise: Option<&NoiseSpec>) -> Observation {
    let n = net.n_aps();
    let mut observed = net.rssi_matrix().to_vec();
    if let Some(spec) = noise {
        let dist = Normal::new(spec.mean_db, spec.std_db).expect("validated noise spec");
        let mut rng = rng::stream(spec.seed, "observe", &[]);
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    observed[i * n + j] += dist.sample(&mut rng);
                }
            }
        }
    }
    Observation {
        band: net.band(),
        n_aps: n,
        observed_rssi: observed,
        load: net.load().to_vec(),
    }
}

/// `B_i = min(1, sum_j w(rssi_ij) * overlap_ij * load_j)` on any view.
pub fn busy_fraction_on<V: RadioView + ?Sized>(
    view: &V,
    cfg: &ChannelConfig,
    model: &NeighborhoodModel,
) -> Vec<f64> {
    let n = view.n_aps();
    assert_eq!(cfg.len(), n, "config length must match the AP count");
    let load = view.load();
    (0..n)
        .map(|i| {
            let ai = cfg.assignments[i];
            let mut sum = 0.0;
            for j in 0..n {
                if j != i && ai.overlaps(cfg.assignments[j]) {
                    sum += model.weight(view.rssi(i, j)) * load[j];
                }
            }
            sum.min(1.0)
        })
        .collect()
}

pub fn busy_fraction(net: &Network, cfg: &ChannelConfig, model: &NeighborhoodModel) -> Vec<f64> {
    busy_fraction_on(net, cfg, model)
}

/// Outcome of applying one configuration to one network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub regret: f64,
    pub busy_fraction: Vec<f64>,
    pub utilization: Vec<f64>,
    pub achieved_airtime: Vec<f64>,
    pub config: ChannelConfig,
}

impl EvalRecord {
    /// Per-AP share of the regret; the shares sum to `regret`.
    pub fn regret_contributions(&self, load: &[f64], band: Band) -> Vec<f64> {
        let w_max = band.max_width() as f64;
        let bound: f64 = load.iter().map(|r| r * w_max).sum();
        if bound <= 0.0 {
            return vec![0.0; load.len()];
        }
        load.iter()
            .zip(&self.achieved_airtime)
            .zip(&self.config.assignments)
            .map(|((&rho, &a), asg)| (rho * w_max - a * asg.width as f64) / bound)
            .collect()
    }
}

/// Regret `1 - U/U_max` where `U = sum_i load_i (1 - B_i) width_i` and
/// `U_max = sum_i load_i * w_max`.
pub fn evaluate(
    net: &Network,
    cfg: &ChannelConfig,
    model: &NeighborhoodModel,
) -> Result<EvalRecord> {
    cfg.validate(net.band(), net.n_aps())?;
    Ok(evaluate_unchecked(net, cfg, model))
}

fn evaluate_unchecked(net: &Network, cfg: &ChannelConfig, model: &NeighborhoodModel) -> EvalRecord {
    let busy = busy_fraction(net, cfg, model);
    let load = net.load();
    let w_max = net.band().max_width() as f64;
    let mut utility = 0.0;
    let mut bound = 0.0;
    let mut achieved = Vec::with_capacity(load.len());
    let mut utilization = Vec::with_capacity(load.len());
    for i in 0..load.len() {
        let a = load[i] * (1.0 - busy[i]);
        utility += a * cfg.assignments[i].width as f64;
        bound += load[i] * w_max;
        achieved.push(a);
        utilization.push((load[i] + busy[i]).min(1.0));
    }
    let regret = if bound > 0.0 {
        (1.0 - utility / bound).clamp(0.0, 1.0)
    } else {
        0.0
    };
    EvalRecord {
        regret,
        busy_fraction: busy,
        utilization,
        achieved_airtime: achieved,
        config: cfg.clone(),
    }
}

/// Precomputed coupling `w(rssi_ij) * load_j` for fast repeated regret
/// evaluation (oracle enumeration, greedy search, features).
#[derive(Clone, Debug)]
pub struct CouplingTable {
    n: usize,
    coupling: Vec<f64>,
    load: Vec<f64>,
    w_max: f64,
    bound: f64,
}

impl CouplingTable {
    pub fn new<V: RadioView + ?Sized>(view: &V, model: &NeighborhoodModel) -> Self {
        let n = view.n_aps();
        let load = view.load().to_vec();
        let mut coupling = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    coupling[i * n + j] = model.weight(view.rssi(i, j)) * load[j];
                }
            }
        }
        let w_max = view.band().max_width() as f64;
        let bound = load.iter().map(|r| r * w_max).sum();
        CouplingTable {
            n,
            coupling,
            load,
            w_max,
            bound,
        }
    }

    pub fn n_aps(&self) -> usize {
        self.n
    }

    /// `w(rssi_ij) * load_j`.
    pub fn coupling(&self, i: usize, j: usize) -> f64 {
        self.coupling[i * self.n + j]
    }

    pub fn load(&self) -> &[f64] {
        &self.load
    }

    pub fn w_max(&self) -> f64 {
        self.w_max
    }

    /// Busy fraction of `i` given per-AP occupied-channel masks.
    pub fn busy(&self, i: usize, masks: &[u32]) -> f64 {
        let row = &self.coupling[i * self.n..(i + 1) * self.n];
        let mut sum = 0.0;
        for (j, &m) in masks.iter().enumerate() {
            if j != i && masks[i] & m != 0 {
                sum += row[j];
            }
        }
        sum.min(1.0)
    }

    /// Regret for per-AP masks and widths; matches [`evaluate`].
    pub fn regret(&self, masks: &[u32], widths: &[usize]) -> f64 {
        if self.bound <= 0.0 {
            return 0.0;
        }
        let mut utility = 0.0;
        for i in 0..self.n {
            utility += self.load[i] * (1.0 - self.busy(i, masks)) * widths[i] as f64;
        }
        (1.0 - utility / self.bound).clamp(0.0, 1.0)
    }
}

/// Writes one row per AP and a trailing summary row carrying the regret.
///
/// Columns: `kind,ap,block_start,width,load,busy,utilization,achieved_airtime,regret`.
pub fn write_eval_csv<W: Write>(
    out: W,
    net: &Network,
    record: &EvalRecord,
    label: &str,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Structural(format!("csv write failed: {e}"));
    w.write_record([
        "label",
        "kind",
        "ap",
        "block_start",
        "width",
        "load",
        "busy",
        "utilization",
        "achieved_airtime",
        "regret",
    ])
    .map_err(io)?;
    for i in 0..net.n_aps() {
        let a = record.config.assignments[i];
        w.write_record([
            label.to_string(),
            "ap".into(),
            i.to_string(),
            a.block_start.to_string(),
            a.width.to_string(),
            net.load()[i].to_string(),
            record.busy_fraction[i].to_string(),
            record.utilization[i].to_string(),
            record.achieved_airtime[i].to_string(),
            String::new(),
        ])
        .map_err(io)?;
    }
    w.write_record([
        label.to_string(),
        "summary".into(),
        String::new(),
        String::new(),
        String::new(),
        String::new(),
        String::new(),
        String::new(),
        String::new(),
        record.regret.to_string(),
    ])
    .map_err(io)?;
    w.flush().map_err(|e| Error::Structural(format!("csv flush failed: {e}")))?;
    Ok(())
}
