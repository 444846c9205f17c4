//! Fitting the neighbor threshold of the replica to measured busy fractions.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::environment::{busy_fraction, NeighborhoodModel};
use crate::error::{Error, Result};
use crate::rng;
use crate::topology::{ChannelAssignment, ChannelConfig, Network};

/// One AP's report at one timestamp.
#[derive(Clone, Debug, PartialEq)]
pub struct TelemetryRecord {
    pub timestamp: u64,
    pub ap_id: usize,
    /// `(neighbor ap_id, rssi dBm)` as heard by this AP.
    pub neighbors: Vec<(usize, f64)>,
    pub measured_busy: f64,
    pub load: f64,
    pub assignment: ChannelAssignment,
}

impl TelemetryRecord {
    fn validate(&self) -> std::result::Result<(), String> {
        if !(0.0..=1.0).contains(&self.measured_busy) {
            return Err(format!("measured_busy {} outside [0, 1]", self.measured_busy));
        }
        if !(0.0..=1.0).contains(&self.load) {
            return Err(format!("load {} outside [0, 1]", self.load));
        }
        let a = self.assignment;
        if a.width == 0 || a.block_start == 0 || !(a.block_start - 1).is_multiple_of(a.width) || a.block_start + a.width > 33 {
            return Err(format!("assignment {a} is not a width-aligned block"));
        }
        if self.neighbors.iter().any(|(_, r)| !r.is_finite()) {
            return Err("non-finite neighbor rssi".into());
        }
        Ok(())
    }
}

/// Candidate thresholds `lo, lo + step, ..., <= hi`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdGrid {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl Default for ThresholdGrid {
    fn default() -> Self {
        ThresholdGrid {
            lo: -95.0,
            hi: -60.0,
            step: 0.5,
        }
    }
}

impl ThresholdGrid {
    pub fn points(&self) -> Result<Vec<f64>> {
        if !(self.lo < self.hi) || !(self.step > 0.0) {
            return Err(Error::Usage(format!(
                "grid needs lo < hi and step > 0, got {}:{}:{}",
                self.lo, self.hi, self.step
            )));
        }
        let count = ((self.hi - self.lo) / self.step + 1e-9).floor() as usize;
        Ok((0..=count).map(|k| self.lo + k as f64 * self.step).collect())
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

impl std::str::FromStr for ThresholdGrid {
    type Err = Error;

    /// `lo:hi:step`, e.g. `-95:-60:0.5`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::Usage(format!("grid `{s}` is not lo:hi:step")));
        }
        let num = |p: &str| {
            p.trim()
                .parse::<f64>()
                .map_err(|e| Error::Usage(format!("grid `{s}`: {e}")))
        };
        Ok(ThresholdGrid {
            lo: num(parts[0])?,
            hi: num(parts[1])?,
            step: num(parts[2])?,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CalibrationResult {
    pub best_threshold_dbm: f64,
    /// `(threshold, similarity)` with strictly increasing thresholds.
    pub curve: Vec<(f64, f64)>,
    pub n_records: usize,
    /// Records dropped because a neighbor's assignment was unknown.
    pub skipped: usize,
}

/// A record reduced to what the threshold sweep needs.
struct Prepared {
    key: (u64, usize),
    measured: f64,
    /// `(rssi, load)` of neighbors sharing spectrum with the reporting AP.
    overlapping: Vec<(f64, f64)>,
}

/// Grid search for the threshold that maximizes similarity
/// (negative mean squared error) between replica and measured busy
/// fractions. Ties go to the threshold nearest the grid midpoint, then the
/// lower one.
pub fn fit_threshold(records: &[TelemetryRecord], grid: ThresholdGrid) -> Result<CalibrationResult> {
    if records.is_empty() {
        return Err(Error::Usage("no telemetry records".into()));
    }
    let points = grid.points()?;
    let mut context: HashMap<(u64, usize), (f64, ChannelAssignment)> = HashMap::new();
    for r in records {
        if context
            .insert((r.timestamp, r.ap_id), (r.load, r.assignment))
            .is_some()
        {
            return Err(Error::Validation(format!(
                "duplicate record for AP {} at timestamp {}",
                r.ap_id, r.timestamp
            )));
        }
    }
    let mut prepared = Vec::with_capacity(records.len());
    let mut skipped = 0;
    'records: for r in records {
        let mut overlapping = Vec::with_capacity(r.neighbors.len());
        for &(j, rssi) in &r.neighbors {
            match context.get(&(r.timestamp, j)) {
                Some(&(load, asg)) => {
                    if asg.overlaps(r.assignment) {
                        overlapping.push((rssi, load));
                    }
                }
                None => {
                    skipped += 1;
                    continue 'records;
                }
            }
        }
        prepared.push(Prepared {
            key: (r.timestamp, r.ap_id),
            measured: r.measured_busy,
            overlapping,
        });
    }
    if prepared.is_empty() {
        return Err(Error::Usage(format!(
            "all {} records lack neighbor context",
            records.len()
        )));
    }
    // canonical order so the curve does not depend on input order
    prepared.sort_by_key(|p| p.key);

    let curve: Vec<(f64, f64)> = points
        .iter()
        .map(|&t| {
            let model = NeighborhoodModel::threshold(t);
            let sse: f64 = prepared
                .iter()
                .map(|p| {
                    let sim = p
                        .overlapping
                        .iter()
                        .map(|&(rssi, load)| model.weight(rssi) * load)
                        .sum::<f64>()
                        .min(1.0);
                    (sim - p.measured).powi(2)
                })
                .sum();
            (t, -sse / prepared.len() as f64)
        })
        .collect();

    let mid = grid.midpoint();
    let mut best = curve[0];
    for &(t, s) in &curve[1..] {
        let better = s > best.1
            || (s == best.1 && (t - mid).abs() < (best.0 - mid).abs());
        if better {
            best = (t, s);
        }
    }
    Ok(CalibrationResult {
        best_threshold_dbm: best.0,
        curve,
        n_records: prepared.len(),
        skipped,
    })
}

/// Records whose measured busy is the replica's busy fraction under
/// `true_model` plus clamped Gaussian noise. One record per AP per sample.
pub fn synth_telemetry(
    net: &Network,
    cfg: &ChannelConfig,
    true_model: &NeighborhoodModel,
    sigma_busy: f64,
    n_samples: usize,
    seed: u64,
) -> Result<Vec<TelemetryRecord>> {
    cfg.validate(net.band(), net.n_aps())?;
    if !(sigma_busy >= 0.0) {
        return Err(Error::Usage(format!("sigma_busy must be >= 0, got {sigma_busy}")));
    }
    let busy = busy_fraction(net, cfg, true_model);
    let noise = Normal::new(0.0, sigma_busy).expect("finite sigma");
    let mut r = rng::stream(seed, "telemetry", &[]);
    let n = net.n_aps();
    let mut out = Vec::with_capacity(n * n_samples);
    for s in 0..n_samples as u64 {
        for i in 0..n {
            let measured = if sigma_busy > 0.0 {
                (busy[i] + noise.sample(&mut r)).clamp(0.0, 1.0)
            } else {
                busy[i]
            };
            out.push(TelemetryRecord {
                timestamp: s,
                ap_id: i,
                neighbors: (0..n).filter(|&j| j != i).map(|j| (j, net.rssi(i, j))).collect(),
                measured_busy: measured,
                load: net.load()[i],
                assignment: cfg.assignments[i],
            });
        }
    }
    Ok(out)
}

pub const TELEMETRY_HEADER: [&str; 7] = [
    "timestamp",
    "ap_id",
    "load",
    "block_start",
    "width",
    "measured_busy",
    "neighbors",
];

/// Records plus non-fatal warnings.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TelemetryLoad {
    pub records: Vec<TelemetryRecord>,
    pub warnings: Vec<String>,
}

/// Parses telemetry CSV. Neighbors are encoded `id:rssi;id:rssi`.
pub fn parse_telemetry(text: &str, origin: &str) -> Result<TelemetryLoad> {
    let mut out = TelemetryLoad::default();
    if text.trim().is_empty() {
        out.warnings.push(format!("{origin}: empty telemetry file"));
        return Ok(out);
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::parse(format!("{origin}:1"), e.to_string()))?
        .clone();
    if headers.iter().collect::<Vec<_>>() != TELEMETRY_HEADER {
        return Err(Error::parse(
            format!("{origin}:1"),
            format!("expected header {}", TELEMETRY_HEADER.join(",")),
        ));
    }
    for row in reader.records() {
        let row = row.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            Error::parse(format!("{origin}:{line}"), e.to_string())
        })?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let at = |field: &str| format!("{origin}:{line} ({field})");
        let num = |idx: usize| -> Result<f64> {
            row[idx]
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::parse(at(TELEMETRY_HEADER[idx]), e.to_string()))
        };
        let int = |idx: usize| -> Result<u64> {
            row[idx]
                .trim()
                .parse::<u64>()
                .map_err(|e| Error::parse(at(TELEMETRY_HEADER[idx]), e.to_string()))
        };
        let mut neighbors = Vec::new();
        for item in row[6].split(';').filter(|s| !s.trim().is_empty()) {
            let (id, rssi) = item
                .split_once(':')
                .ok_or_else(|| Error::parse(at("neighbors"), format!("`{item}` is not id:rssi")))?;
            let id = id
                .trim()
                .parse::<usize>()
                .map_err(|e| Error::parse(at("neighbors"), e.to_string()))?;
            let rssi = rssi
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::parse(at("neighbors"), e.to_string()))?;
            neighbors.push((id, rssi));
        }
        let record = TelemetryRecord {
            timestamp: int(0)?,
            ap_id: int(1)? as usize,
            load: num(2)?,
            assignment: ChannelAssignment::new(int(3)? as usize, int(4)? as usize),
            measured_busy: num(5)?,
            neighbors,
        };
        record
            .validate()
            .map_err(|msg| Error::parse(format!("{origin}:{line}"), msg))?;
        out.records.push(record);
    }
    Ok(out)
}

pub fn load_telemetry(path: impl AsRef<Path>) -> Result<TelemetryLoad> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_telemetry(&text, &path.display().to_string())
}

pub fn write_telemetry<W: Write>(out: W, records: &[TelemetryRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| Error::Structural(format!("csv write failed: {e}"));
    w.write_record(TELEMETRY_HEADER).map_err(err)?;
    for r in records {
        let neighbors = r
            .neighbors
            .iter()
            .map(|(j, rssi)| format!("{j}:{rssi}"))
            .collect::<Vec<_>>()
            .join(";");
        w.write_record([
            r.timestamp.to_string(),
            r.ap_id.to_string(),
            r.load.to_string(),
            r.assignment.block_start.to_string(),
            r.assignment.width.to_string(),
            r.measured_busy.to_string(),
            neighbors,
        ])
        .map_err(err)?;
    }
    w.flush()
        .map_err(|e| Error::Structural(format!("csv flush failed: {e}")))
}

pub fn save_telemetry(records: &[TelemetryRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_telemetry(file, records)
}

/// `threshold_dbm,similarity` rows for plotting.
pub fn write_curve<W: Write>(out: W, result: &CalibrationResult) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| Error::Structural(format!("csv write failed: {e}"));
    w.write_record(["threshold_dbm", "similarity"]).map_err(err)?;
    for (t, s) in &result.curve {
        w.write_record([t.to_string(), s.to_string()]).map_err(err)?;
    }
    w.flush()
        .map_err(|e| Error::Structural(format!("csv flush failed: {e}")))
}
