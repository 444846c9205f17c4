//! Reference policies: exhaustive oracle, load-ordered greedy, daily static
//! optimization and uniform random.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::environment::{evaluate, CouplingTable, NeighborhoodModel, RadioView};
use crate::error::{Error, Result};
use crate::rng;
use crate::topology::{ChannelAssignment, ChannelConfig, Network};

/// Largest joint action space the oracle will enumerate.
pub const ORACLE_CAPACITY: u64 = 10_000_000;

/// Size of the joint action space, or `None` past `u64`.
pub fn joint_space_size(action_count: usize, n_aps: usize) -> Option<u64> {
    let mut total: u64 = 1;
    for _ in 0..n_aps {
        total = total.checked_mul(action_count as u64)?;
    }
    Some(total)
}

fn best_in_subtree(
    table: &CouplingTable,
    space: &[ChannelAssignment],
    first: usize,
) -> (f64, Vec<usize>) {
    let n = table.n_aps();
    let a = space.len();
    let mut idx = vec![0usize; n];
    idx[0] = first;
    let mut masks: Vec<u32> = idx.iter().map(|&k| space[k].mask()).collect();
    let mut widths: Vec<usize> = idx.iter().map(|&k| space[k].width).collect();
    let mut best = (f64::INFINITY, idx.clone());
    loop {
        let r = table.regret(&masks, &widths);
        if r < best.0 {
            best = (r, idx.clone());
        }
        // odometer over APs 1..n, last AP fastest
        let mut pos = n;
        loop {
            if pos <= 1 {
                return best;
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < a {
                masks[pos] = space[idx[pos]].mask();
                widths[pos] = space[idx[pos]].width;
                break;
            }
            idx[pos] = 0;
            masks[pos] = space[0].mask();
            widths[pos] = space[0].width;
        }
    }
}

/// Exhaustive minimum-regret configuration. Ties go to the lexicographically
/// smallest action-index vector.
pub fn oracle(net: &Network, model: &NeighborhoodModel) -> Result<(ChannelConfig, f64)> {
    let band = net.band();
    let space = band.action_space();
    let n = net.n_aps();
    match joint_space_size(space.len(), n) {
        Some(size) if size <= ORACLE_CAPACITY => {}
        _ => {
            return Err(Error::Capacity(format!(
                "{}^{n} joint configurations exceed the oracle limit of {ORACLE_CAPACITY}",
                space.len()
            )))
        }
    }
    if n == 0 {
        return Ok((ChannelConfig::new(vec![]), 0.0));
    }
    let table = CouplingTable::new(net, model);
    let partial: Vec<(f64, Vec<usize>)> = (0..space.len())
        .into_par_iter()
        .map(|first| best_in_subtree(&table, &space, first))
        .collect();
    let mut best = &partial[0];
    for cand in &partial[1..] {
        if cand.0 < best.0 {
            best = cand;
        }
    }
    let cfg = ChannelConfig::new(best.1.iter().map(|&k| space[k]).collect());
    let regret = evaluate(net, &cfg, model)?.regret;
    Ok((cfg, regret))
}

/// Heaviest AP first; each AP takes the block maximizing its own weighted
/// airtime `load_i (1 - B_i) width` against the APs already placed.
/// Ties prefer the wider block, then the lower channel.
pub fn greedy<V: RadioView + ?Sized>(view: &V, model: &NeighborhoodModel) -> ChannelConfig {
    let band = view.band();
    let mut candidates = band.action_space();
    candidates.sort_by(|a, b| b.width.cmp(&a.width).then(a.block_start.cmp(&b.block_start)));
    let table = CouplingTable::new(view, model);
    let n = view.n_aps();
    let load = view.load();
    let mut placed: Vec<Option<ChannelAssignment>> = vec![None; n];
    for i in crate::agent::decode_order(load) {
        let mut best = candidates[0];
        let mut best_score = f64::NEG_INFINITY;
        for &cand in &candidates {
            let mut busy = 0.0;
            for (j, p) in placed.iter().enumerate() {
                if let Some(a) = p {
                    if a.overlaps(cand) {
                        busy += table.coupling(i, j);
                    }
                }
            }
            let score = load[i] * (1.0 - f64::min(busy, 1.0)) * cand.width as f64;
            if score > best_score {
                best = cand;
                best_score = score;
            }
        }
        placed[i] = Some(best);
    }
    ChannelConfig::new(placed.into_iter().map(|p| p.expect("every AP placed")).collect())
}

/// Uniform independent block per AP.
pub fn random_policy(net: &Network, seed: u64) -> ChannelConfig {
    let space = net.band().action_space();
    let mut r = rng::stream(seed, "random-policy", &[]);
    ChannelConfig::new(
        (0..net.n_aps())
            .map(|_| space[r.random_range(0..space.len())])
            .collect(),
    )
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LoadAggregate {
    #[default]
    Mean,
    Max,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StaticSolver {
    #[default]
    Greedy,
    /// Falls back to greedy when the instance exceeds the oracle capacity.
    Oracle,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StaticOptions {
    #[serde(default)]
    pub aggregate: LoadAggregate,
    #[serde(default)]
    pub solver: StaticSolver,
}

/// One configuration for a whole day, optimized for the aggregated
/// (by default mean) per-AP load of the sequence.
pub fn static_daily(
    sequence: &[Network],
    model: &NeighborhoodModel,
    options: StaticOptions,
) -> Result<ChannelConfig> {
    let first = sequence
        .first()
        .ok_or_else(|| Error::Usage("static_daily needs at least one network".into()))?;
    let n = first.n_aps();
    let mut agg = vec![0.0; n];
    for (k, net) in sequence.iter().enumerate() {
        if !first.same_topology(net) {
            return Err(Error::Structural(format!(
                "network {k} does not share the topology of network 0"
            )));
        }
        for (a, l) in agg.iter_mut().zip(net.load()) {
            match options.aggregate {
                LoadAggregate::Mean => *a += l,
                LoadAggregate::Max => *a = f64::max(*a, *l),
            }
        }
    }
    if options.aggregate == LoadAggregate::Mean {
        for a in &mut agg {
            *a /= sequence.len() as f64;
        }
    }
    let forecast = first.with_load(agg)?;
    match options.solver {
        StaticSolver::Greedy => Ok(greedy(&forecast, model)),
        StaticSolver::Oracle => match oracle(&forecast, model) {
            Ok((cfg, _)) => Ok(cfg),
            Err(Error::Capacity(_)) => Ok(greedy(&forecast, model)),
            Err(e) => Err(e),
        },
    }
}
