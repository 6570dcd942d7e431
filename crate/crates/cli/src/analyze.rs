//! Aggregate statistics over all runs.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use soupbench::analysis::{
    apd_series, benchmark_difference_series, error_dynamics_series, greedier_apd_quantiles, selection_quantile_series,
    summarize, ApdQuantile, QuantileRecord, RunSet, Series, SeriesBundle,
};
use soupbench::metrics::DistanceKind;
use soupbench::soup::{Algorithm, SoupTrajectory};
use soupbench::store::{Bundle, Split};

use crate::config::RunConfig;
use crate::layout::{read, stamped_csv, write, Layout};
use crate::stages::{load, load_trajectory};
use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesFile {
    pub config_hash: String,
    /// `{split}_accuracy` levels and `_diff` against greedier.
    pub accuracy: SeriesBundle,
    pub error_dynamics: SeriesBundle,
    pub apd: SeriesBundle,
    /// `quantile_{kind}` and `distance_{kind}` of the selected candidate.
    pub selection: SeriesBundle,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecordsFile {
    pub config_hash: String,
    pub selection: Vec<QuantileRecord>,
    pub apd_quantiles: Vec<ApdQuantile>,
}

fn failed(e: impl std::fmt::Display) -> CliError {
    CliError::Data(format!("analysis: {e}"))
}

fn to_json<T: Serialize>(v: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| CliError::Internal(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// One series per algorithm from per-run step values; steps after a run
/// ends stay undefined.
fn step_series(statistic: &str, per_algo: Vec<(Algorithm, Vec<Vec<Option<f64>>>)>) -> SeriesBundle {
    let max_t = per_algo.iter().flat_map(|(_, runs)| runs.iter().map(Vec::len)).max().unwrap_or(0);
    let series = per_algo
        .into_iter()
        .map(|(algorithm, mut runs)| {
            runs.iter_mut().for_each(|r| r.resize(max_t, None));
            let points = summarize(&runs, max_t);
            let carried = vec![vec![false; max_t]; runs.len()];
            Series { algorithm, statistic: statistic.to_string(), runs, carried, points }
        })
        .collect();
    SeriesBundle { max_t, series }
}

fn selection(cfg: &RunConfig, runs: &[RunSet]) -> Result<(SeriesBundle, Vec<QuantileRecord>), CliError> {
    let mut bundle = SeriesBundle::default();
    let mut records = Vec::new();
    for &kind in &cfg.distance_kinds {
        let mut quantiles = Vec::new();
        let mut distances = Vec::new();
        for &algo in &cfg.algorithms {
            let (mut q, mut d) = (Vec::new(), Vec::new());
            for run in runs {
                let traj: &SoupTrajectory = &run[&algo];
                let recs = selection_quantile_series(&[traj], kind).map_err(failed)?;
                let mut qv = Vec::new();
                let mut dv = Vec::new();
                for r in &recs {
                    qv.resize(r.t, None);
                    dv.resize(r.t, None);
                    qv[r.t - 1] = Some(r.quantile);
                    dv[r.t - 1] = Some(r.distance);
                }
                q.push(qv);
                d.push(dv);
                records.extend(recs);
            }
            quantiles.push((algo, q));
            distances.push((algo, d));
        }
        bundle.extend(step_series(&format!("quantile_{}", kind.name()), quantiles));
        bundle.extend(step_series(&format!("distance_{}", kind.name()), distances));
    }
    Ok((bundle, records))
}

pub fn load_runs(cfg: &RunConfig, layout: &Layout) -> Result<(Vec<RunSet>, Vec<Bundle>), CliError> {
    let mut runs = Vec::new();
    let mut bundles = Vec::new();
    for (t, e) in cfg.runs() {
        bundles.push(load(layout, t, e)?);
        let set: RunSet = cfg
            .algorithms
            .iter()
            .map(|&a| Ok((a, load_trajectory(layout, t, e, a)?)))
            .collect::<Result<_, CliError>>()?;
        runs.push(set);
    }
    Ok((runs, bundles))
}

pub fn analyze(cfg: &RunConfig, layout: &Layout) -> Result<Vec<PathBuf>, CliError> {
    if !cfg.algorithms.contains(&Algorithm::Greedier) {
        return Err(CliError::Usage("analysis compares against greedier; include it in --algo".into()));
    }
    let hash = cfg.hash();
    let (runs, bundles) = load_runs(cfg, layout)?;
    let refs: Vec<&Bundle> = bundles.iter().collect();

    let mut accuracy = SeriesBundle::default();
    let mut dynamics = SeriesBundle::default();
    for split in Split::ALL {
        let (level, diff) = benchmark_difference_series(&runs, split).map_err(failed)?;
        accuracy.extend(level);
        accuracy.extend(diff);
        let (level, diff) = error_dynamics_series(&runs, &refs, split).map_err(failed)?;
        dynamics.extend(level);
        dynamics.extend(diff);
    }
    let apd = apd_series(&runs, &refs).map_err(failed)?;
    let (sel, records) = selection(cfg, &runs)?;
    let mut apd_quantiles = Vec::new();
    for (run, bundle) in runs.iter().zip(&bundles) {
        apd_quantiles.extend(greedier_apd_quantiles(&run[&Algorithm::Greedier], bundle).map_err(failed)?);
    }

    let dir = layout.analysis();
    let mut out = Vec::new();
    let mut emit = |name: &str, text: String| -> Result<(), CliError> {
        let path = dir.join(name);
        write(&path, text.as_bytes())?;
        out.push(path);
        Ok(())
    };
    emit("accuracy.csv", stamped_csv(&hash, &accuracy.to_csv()))?;
    emit("error_dynamics.csv", stamped_csv(&hash, &dynamics.to_csv()))?;
    emit("apd.csv", stamped_csv(&hash, &apd.to_csv()))?;
    emit("selection.csv", stamped_csv(&hash, &sel.to_csv()))?;
    emit("selection_quantiles.csv", stamped_csv(&hash, &records_csv(&records)?))?;
    emit("apd_quantiles.csv", stamped_csv(&hash, &records_csv(&apd_quantiles)?))?;

    let records = RecordsFile { config_hash: hash.clone(), selection: records, apd_quantiles };
    let series = SeriesFile { config_hash: hash, accuracy, error_dynamics: dynamics, apd, selection: sel };
    emit("series.json", to_json(&series)?)?;
    emit("records.json", to_json(&records)?)?;
    Ok(out)
}

fn records_csv<T: Serialize>(rows: &[T]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| CliError::Internal(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Internal(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Internal(e.to_string()))
}

pub fn load_series(layout: &Layout) -> Result<SeriesFile, CliError> {
    let path = layout.analysis().join("series.json");
    serde_json::from_str(&read(&path)?).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

pub fn load_records(layout: &Layout) -> Result<RecordsFile, CliError> {
    let path = layout.analysis().join("records.json");
    serde_json::from_str(&read(&path)?).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

/// Distance kinds present in the records, in canonical order.
pub fn kinds_in(records: &[QuantileRecord]) -> Vec<DistanceKind> {
    DistanceKind::ALL.into_iter().filter(|k| records.iter().any(|r| r.kind == *k)).collect()
}
