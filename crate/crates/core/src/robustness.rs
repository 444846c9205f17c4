//! Sweeps of Gaussian noise on observed RSSIs for a noiselessly trained
//! agent, reported as relative regret degradation.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agent::AgentModel;
use crate::environment::{NeighborhoodModel, NoiseSpec};
use crate::error::{Error, Result};
use crate::rng;
use crate::topology::Network;
use crate::trainer::evaluate_policy;

pub const DEFAULT_MEANS_DB: [f64; 9] = [-12.0, -9.0, -6.0, -3.0, 0.0, 3.0, 6.0, 9.0, 12.0];
pub const DEFAULT_STDS_DB: [f64; 4] = [0.0, 1.5, 3.0, 6.0];
pub const DEFAULT_TRIALS: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellMetric {
    /// `100 * (regret - baseline) / baseline`.
    RelativePct,
    /// Baseline regret was zero; cells hold absolute regret.
    AbsoluteRegret,
}

impl CellMetric {
    pub fn for_baseline(baseline: f64) -> Self {
        if baseline > 0.0 {
            CellMetric::RelativePct
        } else {
            CellMetric::AbsoluteRegret
        }
    }
}

fn cell_value(metric: CellMetric, regret: f64, baseline: f64) -> f64 {
    match metric {
        CellMetric::RelativePct => 100.0 * (regret - baseline) / baseline,
        CellMetric::AbsoluteRegret => regret,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cell {
    pub mean_db: f64,
    pub std_db: f64,
    pub degradation: f64,
    pub stderr: f64,
    pub mean_regret: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RobustnessGrid {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    pub environment: NeighborhoodModel,
    /// Row-major: `cells[mean_index][std_index]`.
    pub cells: Vec<Vec<Cell>>,
    pub baseline_regret: f64,
    pub metric: CellMetric,
}

impl RobustnessGrid {
    pub fn cell(&self, mean_db: f64, std_db: f64) -> Option<&Cell> {
        let mi = self.means.iter().position(|&m| m == mean_db)?;
        let si = self.stds.iter().position(|&s| s == std_db)?;
        Some(&self.cells[mi][si])
    }

    pub fn mean_degradation(&self) -> f64 {
        let all: Vec<f64> = self.cells.iter().flatten().map(|c| c.degradation).collect();
        all.iter().sum::<f64>() / all.len() as f64
    }
}

#[derive(Clone, Debug)]
pub struct SweepSpec {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    pub trials: usize,
    /// Rollouts per instance handed to the selector.
    pub rollouts: usize,
    pub seed: u64,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            means: DEFAULT_MEANS_DB.to_vec(),
            stds: DEFAULT_STDS_DB.to_vec(),
            trials: DEFAULT_TRIALS,
            rollouts: 8,
            seed: 0,
        }
    }
}

/// Noise seed of one trial, a function of the cell's values only.
pub fn trial_noise(seed: u64, mean_db: f64, std_db: f64, trial: usize) -> NoiseSpec {
    NoiseSpec {
        mean_db,
        std_db,
        seed: rng::derive_seed(
            seed,
            "robustness-noise",
            &[mean_db.to_bits(), std_db.to_bits(), trial as u64],
        ),
    }
}

/// Degradation of the agent's regret, evaluated on the unperturbed ground
/// truth under `environment`, relative to its clean-observation regret on
/// the same set.
pub fn run_grid(
    model: &AgentModel,
    eval_set: &[Network],
    environment: &NeighborhoodModel,
    spec: &SweepSpec,
) -> Result<RobustnessGrid> {
    if eval_set.is_empty() {
        return Err(Error::Usage("evaluation set is empty".into()));
    }
    if spec.means.is_empty() || spec.stds.is_empty() || spec.trials == 0 {
        return Err(Error::Usage("sweep needs at least one mean, std and trial".into()));
    }
    for &s in &spec.stds {
        NoiseSpec::new(0.0, s, 0)?;
    }
    environment.validate()?;
    let policy_seed = rng::derive_seed(spec.seed, "robustness-policy", &[]);
    let baseline = evaluate_policy(model, eval_set, environment, None, spec.rollouts, policy_seed)?
        .mean_regret;
    let metric = CellMetric::for_baseline(baseline);
    let coords: Vec<(f64, f64)> = spec
        .means
        .iter()
        .flat_map(|&m| spec.stds.iter().map(move |&s| (m, s)))
        .collect();
    let flat: Vec<Result<Cell>> = coords
        .par_iter()
        .map(|&(mean_db, std_db)| {
            let mut values = Vec::with_capacity(spec.trials);
            let mut regrets = Vec::with_capacity(spec.trials);
            for t in 0..spec.trials {
                let noise = trial_noise(spec.seed, mean_db, std_db, t);
                let regret = evaluate_policy(
                    model,
                    eval_set,
                    environment,
                    Some(&noise),
                    spec.rollouts,
                    policy_seed,
                )?
                .mean_regret;
                regrets.push(regret);
                values.push(cell_value(metric, regret, baseline));
            }
            let (mean, stderr) = mean_and_stderr(&values);
            Ok(Cell {
                mean_db,
                std_db,
                degradation: mean,
                stderr,
                mean_regret: regrets.iter().sum::<f64>() / regrets.len() as f64,
            })
        })
        .collect();
    let mut cells = Vec::with_capacity(spec.means.len());
    let mut it = flat.into_iter();
    for _ in &spec.means {
        let mut row = Vec::with_capacity(spec.stds.len());
        for _ in &spec.stds {
            row.push(it.next().expect("one cell per coordinate")?);
        }
        cells.push(row);
    }
    Ok(RobustnessGrid {
        means: spec.means.clone(),
        stds: spec.stds.clone(),
        environment: *environment,
        cells,
        baseline_regret: baseline,
        metric,
    })
}

fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

const GRID_HEADER: [&str; 5] = ["mean_db", "std_db", "degradation_pct", "stderr", "metric"];

/// Long-format heatmap CSV, one row per cell, row-major by (mean, std).
/// `metric` is `relative_pct` unless the clean baseline regret was zero.
pub fn write_grid<W: Write>(out: W, grid: &RobustnessGrid) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| Error::Structural(format!("csv write failed: {e}"));
    w.write_record(GRID_HEADER).map_err(err)?;
    let metric = match grid.metric {
        CellMetric::RelativePct => "relative_pct",
        CellMetric::AbsoluteRegret => "absolute_regret",
    };
    for row in &grid.cells {
        for c in row {
            w.write_record([
                c.mean_db.to_string(),
                c.std_db.to_string(),
                c.degradation.to_string(),
                c.stderr.to_string(),
                metric.to_string(),
            ])
            .map_err(err)?;
        }
    }
    w.flush()
        .map_err(|e| Error::Structural(format!("csv flush failed: {e}")))
}

pub fn report_grid(grid: &RobustnessGrid, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_grid(file, grid)
}

/// `(mean_db, std_db, degradation_pct, stderr)` rows from a heatmap CSV.
pub fn parse_grid_csv(text: &str) -> Result<Vec<(f64, f64, f64, f64)>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (k, rec) in reader.records().enumerate() {
        let line = k + 2;
        let rec = rec.map_err(|e| Error::parse(format!("line {line}"), e.to_string()))?;
        let num = |i: usize| -> Result<f64> {
            rec.get(i)
                .ok_or_else(|| Error::parse(format!("line {line}"), "missing column"))?
                .parse::<f64>()
                .map_err(|e| Error::parse(format!("line {line} ({})", GRID_HEADER[i]), e.to_string()))
        };
        rows.push((num(0)?, num(1)?, num(2)?, num(3)?));
    }
    Ok(rows)
}
