//! Where selected candidates fall among the remaining pool by distance to
//! the current WA.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::metrics::{ext_real, DistanceKind};
use crate::soup::{Algorithm, Iteration, SoupTrajectory};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantileRecord {
    pub trial: u32,
    pub environment: u32,
    pub algorithm: Algorithm,
    pub kind: DistanceKind,
    /// Accepted-step index, from 1.
    pub t: usize,
    pub quantile: f64,
    #[serde(with = "ext_real")]
    pub distance: f64,
    pub num_remaining: usize,
}

/// Mid-rank of `value` among `pool` (ascending, 1 = smallest) divided by the
/// pool size. `value` must be one of the pool entries.
pub fn mid_rank_quantile(value: f64, pool: &[f64]) -> f64 {
    let below = pool.iter().filter(|d| d.total_cmp(&value).is_lt()).count();
    let ties = pool.iter().filter(|d| d.total_cmp(&value).is_eq()).count();
    (below as f64 + (ties as f64 + 1.0) / 2.0) / pool.len() as f64
}

/// Candidates still in play when `it` made its selection. Greedy's pool
/// shrinks during a step as it walks the pass; the others see the whole
/// remaining set.
fn selection_pool(algorithm: Algorithm, it: &Iteration) -> Vec<u32> {
    if algorithm != Algorithm::Greedy {
        return it.remaining_ids_before.clone();
    }
    let passed: Vec<u32> = it
        .evals
        .iter()
        .map(|e| e.candidate_id)
        .take_while(|&id| Some(id) != it.selected_id)
        .collect();
    it.remaining_ids_before.iter().copied().filter(|id| !passed.contains(id)).collect()
}

fn selections(traj: &SoupTrajectory, kind: DistanceKind) -> Result<Vec<(usize, f64, Vec<f64>)>, AnalysisError> {
    let mut out = Vec::new();
    for it in traj.iterations.iter().filter(|it| it.selected_id.is_some()) {
        let t = out.len() + 1;
        let sel = it.selected_id.unwrap();
        let chosen = it.distance_of(sel).ok_or(AnalysisError::NoDistances { t })?.get(kind);
        let pool: Vec<f64> = selection_pool(traj.algorithm, it)
            .into_iter()
            .map(|id| it.distance_of(id).map(|d| d.get(kind)).ok_or(AnalysisError::NoDistances { t }))
            .collect::<Result<_, _>>()?;
        out.push((t, chosen, pool));
    }
    Ok(out)
}

pub fn selection_quantile_series(trajectories: &[&SoupTrajectory], kind: DistanceKind) -> Result<Vec<QuantileRecord>, AnalysisError> {
    let mut out = Vec::new();
    for traj in trajectories {
        for (t, distance, pool) in selections(traj, kind)? {
            out.push(QuantileRecord {
                trial: traj.run.trial,
                environment: traj.run.environment,
                algorithm: traj.algorithm,
                kind,
                t,
                quantile: mid_rank_quantile(distance, &pool),
                distance,
                num_remaining: pool.len(),
            });
        }
    }
    Ok(out)
}

/// Five-number summary over the finite values; quartiles interpolate
/// linearly between order statistics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub mean: f64,
    pub n: usize,
}

fn interpolate(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn box_stats(values: &[f64]) -> Option<BoxStats> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    Some(BoxStats {
        min: v[0],
        q1: interpolate(&v, 0.25),
        median: interpolate(&v, 0.5),
        q3: interpolate(&v, 0.75),
        max: v[v.len() - 1],
        mean: v.iter().sum::<f64>() / v.len() as f64,
        n: v.len(),
    })
}

/// All values observed at one `t`, ascending with infinities last.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceBin {
    pub t: usize,
    pub values: Vec<f64>,
    pub infinite: usize,
    pub stats: Option<BoxStats>,
}

impl DistanceBin {
    pub fn from_values(t: usize, mut values: Vec<f64>) -> Self {
        values.sort_by(f64::total_cmp);
        let infinite = values.iter().filter(|v| v.is_infinite()).count();
        let stats = box_stats(&values);
        Self { t, values, infinite, stats }
    }
}

/// Raw distance of each selection, binned by `t = 1..=T_max`.
pub fn selection_distance_series(trajectories: &[&SoupTrajectory], kind: DistanceKind) -> Result<Vec<DistanceBin>, AnalysisError> {
    let mut bins: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for traj in trajectories {
        for (t, d, _) in selections(traj, kind)? {
            bins.entry(t).or_default().push(d);
        }
    }
    let t_max = bins.keys().next_back().copied().unwrap_or(0);
    Ok((1..=t_max).map(|t| DistanceBin::from_values(t, bins.remove(&t).unwrap_or_default())).collect())
}
