//! Bands, channel blocks, AP fleets and the topology file format.

use std::fmt;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Lowest RSSI the model represents, in dBm.
pub const RSSI_FLOOR_DBM: f64 = -110.0;
/// RSSI at (or below) the reference distance of the synthetic path-loss rule.
pub const RSSI_NEAR_DBM: f64 = -40.0;
const PATH_LOSS_SLOPE_DB: f64 = 35.0;
const REFERENCE_DISTANCE: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Band {
    #[serde(rename = "2g4")]
    Band2G4,
    #[serde(rename = "5g")]
    Band5G,
}

impl Band {
    /// Number of non-overlapping base channels.
    pub fn base_channels(self) -> usize {
        match self {
            Band::Band2G4 => 4,
            Band::Band5G => 20,
        }
    }

    pub fn allowed_widths(self) -> &'static [usize] {
        match self {
            Band::Band2G4 => &[1, 2],
            Band::Band5G => &[1, 2, 4],
        }
    }

    pub fn max_width(self) -> usize {
        *self.allowed_widths().iter().max().expect("non-empty widths")
    }

    pub fn action_space(self) -> Vec<ChannelAssignment> {
        action_space_for(self.base_channels(), self.allowed_widths())
    }

    pub fn action_count(self) -> usize {
        self.allowed_widths()
            .iter()
            .map(|w| self.base_channels() / w)
            .sum()
    }

    pub fn is_valid(self, a: ChannelAssignment) -> bool {
        a.width >= 1
            && self.allowed_widths().contains(&a.width)
            && a.block_start >= 1
            && (a.block_start - 1).is_multiple_of(a.width)
            && a.block_start + a.width - 1 <= self.base_channels()
    }
}

impl fmt::Display for Band {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Band::Band2G4 => write!(f, "2g4"),
            Band::Band5G => write!(f, "5g"),
        }
    }
}

impl std::str::FromStr for Band {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "2g4" | "2.4" | "2.4ghz" => Ok(Band::Band2G4),
            "5g" | "5" | "5ghz" => Ok(Band::Band5G),
            other => Err(Error::Usage(format!("unknown band `{other}`"))),
        }
    }
}

/// A width-aligned block of bonded base channels (1-based indices).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ChannelAssignment {
    pub block_start: usize,
    pub width: usize,
}

impl ChannelAssignment {
    pub const fn new(block_start: usize, width: usize) -> Self {
        ChannelAssignment { block_start, width }
    }

    pub fn occupied_set(self) -> std::ops::RangeInclusive<usize> {
        self.block_start..=self.block_start + self.width - 1
    }

    /// Occupied channels as a bit mask, bit `c - 1` for base channel `c`.
    pub fn mask(self) -> u32 {
        (((1u64 << self.width) - 1) << (self.block_start - 1)) as u32
    }

    pub fn overlaps(self, other: ChannelAssignment) -> bool {
        self.mask() & other.mask() != 0
    }
}

impl fmt::Display for ChannelAssignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.block_start, self.width)
    }
}

/// Every width-aligned block, ordered by `(width, block_start)`.
pub fn action_space_for(base_channels: usize, widths: &[usize]) -> Vec<ChannelAssignment> {
    let mut widths = widths.to_vec();
    widths.sort_unstable();
    widths.dedup();
    widths
        .into_iter()
        .filter(|&w| w >= 1 && w <= base_channels)
        .flat_map(|w| {
            (0..base_channels / w).map(move |k| ChannelAssignment::new(k * w + 1, w))
        })
        .collect()
}

/// Fleet of APs with pairwise RSSI (row = receiver) and offered load.
#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    band: Band,
    n_aps: usize,
    rssi: Vec<f64>,
    load: Vec<f64>,
    positions: Option<Vec<[f64; 2]>>,
}

impl Network {
    /// `rssi` is row-major `n x n`; the diagonal is ignored.
    pub fn new(
        band: Band,
        rssi: Vec<f64>,
        load: Vec<f64>,
        positions: Option<Vec<[f64; 2]>>,
    ) -> Result<Self> {
        let n = load.len();
        if rssi.len() != n * n {
            return Err(Error::Structural(format!(
                "rssi has {} entries, expected {n}x{n}",
                rssi.len()
            )));
        }
        if let Some(p) = &positions {
            if p.len() != n {
                return Err(Error::Structural(format!(
                    "{} positions for {n} APs",
                    p.len()
                )));
            }
        }
        for (i, &l) in load.iter().enumerate() {
            if !(0.0..=1.0).contains(&l) {
                return Err(Error::Validation(format!("load[{i}] = {l} outside [0, 1]")));
            }
        }
        for i in 0..n {
            for j in 0..n {
                let r = rssi[i * n + j];
                if i != j && !(RSSI_FLOOR_DBM..=0.0).contains(&r) {
                    return Err(Error::Validation(format!(
                        "rssi[{i}][{j}] = {r} outside [-110, 0] dBm"
                    )));
                }
                if !r.is_finite() {
                    return Err(Error::Validation(format!("rssi[{i}][{j}] is not finite")));
                }
            }
        }
        Ok(Network {
            band,
            n_aps: n,
            rssi,
            load,
            positions,
        })
    }

    pub fn band(&self) -> Band {
        self.band
    }

    pub fn n_aps(&self) -> usize {
        self.n_aps
    }

    /// RSSI received by `i` from `j`.
    pub fn rssi(&self, i: usize, j: usize) -> f64 {
        self.rssi[i * self.n_aps + j]
    }

    pub fn rssi_matrix(&self) -> &[f64] {
        &self.rssi
    }

    pub fn load(&self) -> &[f64] {
        &self.load
    }

    pub fn positions(&self) -> Option<&[[f64; 2]]> {
        self.positions.as_deref()
    }

    /// Same topology, different offered loads.
    pub fn with_load(&self, load: Vec<f64>) -> Result<Network> {
        if load.len() != self.n_aps {
            return Err(Error::Structural(format!(
                "{} loads for {} APs",
                load.len(),
                self.n_aps
            )));
        }
        Network::new(self.band, self.rssi.clone(), load, self.positions.clone())
    }

    /// Relabels APs so that new AP `k` is old AP `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Network {
        let n = self.n_aps;
        assert_eq!(perm.len(), n, "permutation length");
        let mut rssi = vec![0.0; n * n];
        for a in 0..n {
            for b in 0..n {
                rssi[a * n + b] = self.rssi(perm[a], perm[b]);
            }
        }
        Network {
            band: self.band,
            n_aps: n,
            rssi,
            load: perm.iter().map(|&p| self.load[p]).collect(),
            positions: self
                .positions
                .as_ref()
                .map(|ps| perm.iter().map(|&p| ps[p]).collect()),
        }
    }

    /// Whether `other` has the same band and RSSI matrix.
    pub fn same_topology(&self, other: &Network) -> bool {
        self.band == other.band && self.rssi == other.rssi
    }
}

/// One assignment per AP.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChannelConfig {
    pub assignments: Vec<ChannelAssignment>,
}

impl ChannelConfig {
    pub fn new(assignments: Vec<ChannelAssignment>) -> Self {
        ChannelConfig { assignments }
    }

    /// Builds a config from indices into `band.action_space()`.
    pub fn from_action_indices(band: Band, indices: &[usize]) -> Self {
        let space = band.action_space();
        ChannelConfig::new(indices.iter().map(|&k| space[k]).collect())
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    pub fn validate(&self, band: Band, n_aps: usize) -> Result<()> {
        if self.assignments.len() != n_aps {
            return Err(Error::Structural(format!(
                "config has {} assignments for {n_aps} APs",
                self.assignments.len()
            )));
        }
        for (i, a) in self.assignments.iter().enumerate() {
            if !band.is_valid(*a) {
                return Err(Error::Structural(format!(
                    "assignment {a} of AP {i} is not a valid block in band {band}"
                )));
            }
        }
        Ok(())
    }

    pub fn permuted(&self, perm: &[usize]) -> ChannelConfig {
        ChannelConfig::new(perm.iter().map(|&p| self.assignments[p]).collect())
    }
}

/// Knobs of the synthetic network generator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkGenParams {
    /// Distances in the unit square are divided by this factor.
    pub density: f64,
    /// Std-dev of symmetric log-normal shadowing added to each pair, dB.
    #[serde(default)]
    pub shadowing_db: f64,
}

impl Default for NetworkGenParams {
    fn default() -> Self {
        NetworkGenParams {
            density: 1.0,
            shadowing_db: 0.0,
        }
    }
}

/// Log-distance path loss at distance `d` (unit-square scale).
pub fn path_loss_rssi(d: f64) -> f64 {
    let r = RSSI_NEAR_DBM
        - PATH_LOSS_SLOPE_DB * (d.max(REFERENCE_DISTANCE) / REFERENCE_DISTANCE).log10();
    r.clamp(RSSI_FLOOR_DBM, RSSI_NEAR_DBM)
}

pub fn random_network(n_aps: usize, band: Band, density: f64, seed: u64) -> Result<Network> {
    random_network_with(
        n_aps,
        band,
        NetworkGenParams {
            density,
            shadowing_db: 0.0,
        },
        seed,
    )
}

/// APs uniform in the unit square, RSSI from the log-distance rule, loads
/// uniform in `[0.05, 0.9]`.
pub fn random_network_with(
    n_aps: usize,
    band: Band,
    params: NetworkGenParams,
    seed: u64,
) -> Result<Network> {
    if n_aps == 0 {
        return Err(Error::Usage("n_aps must be at least 1".into()));
    }
    if !(params.density > 0.0) || params.shadowing_db < 0.0 {
        return Err(Error::Usage(format!(
            "density must be > 0 and shadowing >= 0, got {params:?}"
        )));
    }
    let mut rng = rng::stream(seed, "network", &[n_aps as u64]);
    let positions: Vec<[f64; 2]> = (0..n_aps)
        .map(|_| [rng.random::<f64>(), rng.random::<f64>()])
        .collect();
    let load: Vec<f64> = (0..n_aps).map(|_| rng.random_range(0.05..=0.9)).collect();
    let shadow = Normal::new(0.0, params.shadowing_db).expect("finite std");
    let mut rssi = vec![0.0; n_aps * n_aps];
    for i in 0..n_aps {
        for j in (i + 1)..n_aps {
            let dx = positions[i][0] - positions[j][0];
            let dy = positions[i][1] - positions[j][1];
            let d = (dx * dx + dy * dy).sqrt() / params.density;
            let mut r = path_loss_rssi(d);
            if params.shadowing_db > 0.0 {
                r = (r + shadow.sample(&mut rng)).clamp(RSSI_FLOOR_DBM, RSSI_NEAR_DBM);
            }
            rssi[i * n_aps + j] = r;
            rssi[j * n_aps + i] = r;
        }
    }
    Network::new(band, rssi, load, Some(positions))
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TopologyFile {
    band: Band,
    n_aps: usize,
    load: Vec<f64>,
    rssi: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    positions: Option<Vec<[f64; 2]>>,
}

pub(crate) fn toml_error(origin: &str, text: &str, err: &toml::de::Error) -> Error {
    let location = match err.span() {
        Some(span) => {
            let line = text[..span.start.min(text.len())].matches('\n').count() + 1;
            format!("{origin}:{line}")
        }
        None => origin.to_string(),
    };
    Error::parse(location, err.message().to_string())
}

/// Parses a topology document (TOML, see the README for the schema).
pub fn parse_network(text: &str, origin: &str) -> Result<Network> {
    let file: TopologyFile = toml::from_str(text).map_err(|e| toml_error(origin, text, &e))?;
    if file.load.len() != file.n_aps {
        return Err(Error::Structural(format!(
            "{origin}: `load` has {} entries but n_aps = {}",
            file.load.len(),
            file.n_aps
        )));
    }
    if file.rssi.len() != file.n_aps {
        return Err(Error::Structural(format!(
            "{origin}: `rssi` has {} rows but n_aps = {}",
            file.rssi.len(),
            file.n_aps
        )));
    }
    let mut flat = Vec::with_capacity(file.n_aps * file.n_aps);
    for (i, row) in file.rssi.iter().enumerate() {
        if row.len() != file.n_aps {
            return Err(Error::Structural(format!(
                "{origin}: `rssi` row {i} has {} entries but n_aps = {}",
                row.len(),
                file.n_aps
            )));
        }
        flat.extend_from_slice(row);
    }
    Network::new(file.band, flat, file.load, file.positions)
}

pub fn network_to_string(net: &Network) -> String {
    let n = net.n_aps;
    let file = TopologyFile {
        band: net.band,
        n_aps: n,
        load: net.load.clone(),
        rssi: net.rssi.chunks(n.max(1)).map(<[f64]>::to_vec).collect(),
        positions: net.positions.clone(),
    };
    toml::to_string(&file).expect("topology serializes")
}

pub fn load_network(path: impl AsRef<Path>) -> Result<Network> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_network(&text, &path.display().to_string())
}

pub fn save_network(net: &Network, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, network_to_string(net)).map_err(|e| Error::io(path, e))
}
