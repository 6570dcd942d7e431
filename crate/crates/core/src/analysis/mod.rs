//! Statistics over soup trajectories.
//!
//! Time index `t` counts accepted steps: the value at `t` describes the WA
//! after its `t`-th accepted ingredient (so `t + 1` ingredients), and `t = 0`
//! is the initial single model. Runs that stop early carry their terminal
//! value forward so that every run contributes at every `t`.

mod dynamics;
mod selection;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::MetricError;
use crate::soup::{Algorithm, SoupTrajectory};
use crate::store::Split;

pub use dynamics::{apd_series, error_dynamics, error_dynamics_series, greedier_apd_quantiles, ApdQuantile, ErrorDynamicsStep, ErrorSet};
pub use selection::{box_stats, mid_rank_quantile, selection_distance_series, selection_quantile_series, BoxStats, DistanceBin, QuantileRecord};

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("runs disagree: {0}")]
    RunMismatch(String),
    #[error("step {t} has no recorded distances")]
    NoDistances { t: usize },
    #[error("model {0} is missing from the bundle")]
    MissingModel(u32),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

/// The trajectories of every algorithm on one bundle.
pub type RunSet = BTreeMap<Algorithm, SoupTrajectory>;

/// Mean and 95% normal-approximation interval at one `t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub t: usize,
    /// `None` when no run has a finite value at `t`.
    pub mean: Option<f64>,
    pub ci_half_width: f64,
    /// Runs contributing a finite value.
    pub n: usize,
    /// Runs whose value is undefined at `t`.
    pub missing: usize,
    /// Runs whose value is infinite at `t` (left out of the mean).
    pub infinite: usize,
}

impl SeriesPoint {
    /// A single contributing run gives a zero-width interval; flag it.
    pub fn single_run(&self) -> bool {
        self.n == 1
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub algorithm: Algorithm,
    pub statistic: String,
    /// `runs[r][t - 1]` for `t = 1..=max_t`.
    #[serde(with = "crate::metrics::ext_real_runs")]
    pub runs: Vec<Vec<Option<f64>>>,
    /// Whether `runs[r][t - 1]` was carried forward past the run's end.
    pub carried: Vec<Vec<bool>>,
    pub points: Vec<SeriesPoint>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SeriesBundle {
    pub max_t: usize,
    pub series: Vec<Series>,
}

impl SeriesBundle {
    pub fn get(&self, algorithm: Algorithm, statistic: &str) -> Option<&Series> {
        self.series.iter().find(|s| s.algorithm == algorithm && s.statistic == statistic)
    }

    pub fn extend(&mut self, other: SeriesBundle) {
        self.max_t = self.max_t.max(other.max_t);
        self.series.extend(other.series);
    }

    /// Columns `algorithm,statistic,t,mean,ci_lo,ci_hi,n,single_run`;
    /// undefined means leave the value columns empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("algorithm,statistic,t,mean,ci_lo,ci_hi,n,single_run\n");
        for s in &self.series {
            for p in &s.points {
                let _ = write!(out, "{},{},{},", s.algorithm, s.statistic, p.t);
                match p.mean {
                    Some(m) => {
                        let _ = write!(out, "{},{},{}", m, m - p.ci_half_width, m + p.ci_half_width);
                    }
                    None => out.push_str(",,"),
                }
                let _ = writeln!(out, ",{},{}", p.n, p.single_run());
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("series serialize");
        s.push('\n');
        s
    }
}

/// Per-`t` mean and CI half-width `1.96 · sd / √n` (sample sd) over the
/// finite values present.
pub fn summarize(runs: &[Vec<Option<f64>>], max_t: usize) -> Vec<SeriesPoint> {
    (1..=max_t)
        .map(|t| {
            let column: Vec<Option<f64>> = runs.iter().map(|r| r.get(t - 1).copied().flatten()).collect();
            let finite: Vec<f64> = column.iter().flatten().copied().filter(|v| v.is_finite()).collect();
            let infinite = column.iter().flatten().filter(|v| v.is_infinite()).count();
            let missing = column.iter().filter(|v| v.is_none_or(|x| x.is_nan())).count();
            let n = finite.len();
            let constant = finite.windows(2).all(|w| w[0] == w[1]);
            let mean = match finite.first() {
                // summing then dividing can miss a constant column by an ulp
                Some(&v) if constant => Some(v),
                _ => (n > 0).then(|| finite.iter().sum::<f64>() / n as f64),
            };
            let ci_half_width = match mean {
                Some(m) if n > 1 && !constant => {
                    let var = finite.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64;
                    1.96 * var.sqrt() / (n as f64).sqrt()
                }
                _ => 0.0,
            };
            SeriesPoint { t, mean, ci_half_width, n, missing, infinite }
        })
        .collect()
}

/// Value at each `t = 1..=max_t`, holding the last entry past the end.
/// `values[0]` is the initial state.
pub fn carry_forward(values: &[Option<f64>], max_t: usize) -> (Vec<Option<f64>>, Vec<bool>) {
    (1..=max_t)
        .map(|t| match values.len() {
            0 => (None, true),
            len if t < len => (values[t], false),
            len => (values[len - 1], true),
        })
        .unzip()
}

/// Builds one series per algorithm from per-run raw series (index = `t`,
/// carried forward). With a `benchmark`, each value is the algorithm's
/// minus the benchmark's on the same run.
pub fn series_from_runs(
    statistic: &str,
    runs: &[BTreeMap<Algorithm, Vec<Option<f64>>>],
    benchmark: Option<Algorithm>,
) -> Result<SeriesBundle, AnalysisError> {
    let Some(first) = runs.first() else {
        return Ok(SeriesBundle::default());
    };
    let algorithms: Vec<Algorithm> = first.keys().copied().collect();
    for (r, run) in runs.iter().enumerate() {
        if run.keys().copied().collect::<Vec<_>>() != algorithms {
            return Err(AnalysisError::RunMismatch(format!("run {r} covers a different set of algorithms")));
        }
    }
    if let Some(b) = benchmark {
        if !first.contains_key(&b) {
            return Err(AnalysisError::RunMismatch(format!("benchmark {b} missing")));
        }
    }
    let max_t = runs.iter().flat_map(|r| r.values()).map(|v| v.len().saturating_sub(1)).max().unwrap_or(0);

    let series = algorithms
        .iter()
        .map(|&algo| {
            let (values, carried): (Vec<_>, Vec<_>) = runs
                .iter()
                .map(|run| {
                    let (own, own_c) = carry_forward(&run[&algo], max_t);
                    match benchmark {
                        None => (own, own_c),
                        Some(b) => {
                            let (base, base_c) = carry_forward(&run[&b], max_t);
                            let diff = own.iter().zip(&base).map(|(a, b)| Some(a.as_ref()? - b.as_ref()?)).collect();
                            let c = own_c.iter().zip(&base_c).map(|(a, b)| *a || *b).collect();
                            (diff, c)
                        }
                    }
                })
                .unzip();
            let points = summarize(&values, max_t);
            Series { algorithm: algo, statistic: statistic.to_string(), runs: values, carried, points }
        })
        .collect();
    Ok(SeriesBundle { max_t, series })
}

/// ID-val or OOD accuracy of each run's WA, per `t`, as `(level, difference
/// to greedier)` bundles.
pub fn benchmark_difference_series(runs: &[RunSet], split: Split) -> Result<(SeriesBundle, SeriesBundle), AnalysisError> {
    let raw: Vec<BTreeMap<Algorithm, Vec<Option<f64>>>> = runs
        .iter()
        .map(|run| {
            run.iter()
                .map(|(&a, traj)| {
                    let (id, ood) = traj.accuracy_series();
                    let v = if split == Split::IdVal { id } else { ood };
                    (a, v.into_iter().map(Some).collect())
                })
                .collect()
        })
        .collect();
    let name = format!("{}_accuracy", split.name());
    let level = series_from_runs(&name, &raw, None)?;
    let diff = series_from_runs(&format!("{name}_diff"), &raw, Some(Algorithm::Greedier))?;
    Ok((level, diff))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(pairs: &[(Algorithm, &[f64])]) -> BTreeMap<Algorithm, Vec<Option<f64>>> {
        pairs.iter().map(|(a, v)| (*a, v.iter().copied().map(Some).collect())).collect()
    }

    #[test]
    fn carry_forward_holds_the_terminal_value() {
        let (v, c) = carry_forward(&[Some(0.5), Some(0.6)], 3);
        assert_eq!(v, vec![Some(0.6), Some(0.6), Some(0.6)]);
        assert_eq!(c, vec![false, true, true]);
        let (v, c) = carry_forward(&[Some(0.1), Some(0.2), Some(0.3), Some(0.4)], 3);
        assert_eq!(v, vec![Some(0.2), Some(0.3), Some(0.4)]);
        assert_eq!(c, vec![false; 3]);
    }

    #[test]
    fn hand_computed_differences() {
        // greedier: 0.50 → 0.60 → 0.70 → 0.75; greedy stops after one step at 0.62
        let r = run(&[(Algorithm::Greedier, &[0.5, 0.6, 0.7, 0.75]), (Algorithm::Greedy, &[0.5, 0.62])]);
        let b = series_from_runs("acc", &[r], Some(Algorithm::Greedier)).unwrap();
        assert_eq!(b.max_t, 3);
        let g = b.get(Algorithm::Greedy, "acc").unwrap();
        let expect = [0.62 - 0.6, 0.62 - 0.7, 0.62 - 0.75];
        for (got, want) in g.runs[0].iter().zip(expect) {
            assert!((got.unwrap() - want).abs() < 1e-12);
        }
        assert_eq!(g.carried[0], vec![false, true, true]);
        let own = b.get(Algorithm::Greedier, "acc").unwrap();
        assert!(own.runs[0].iter().all(|v| *v == Some(0.0)));
    }

    #[test]
    fn self_difference_is_zero_with_zero_width() {
        let runs: Vec<_> = (0..5)
            .map(|i| run(&[(Algorithm::Greedier, &[0.5, 0.5 + 0.01 * i as f64, 0.7])]))
            .collect();
        let b = series_from_runs("acc", &runs, Some(Algorithm::Greedier)).unwrap();
        for p in &b.series[0].points {
            assert_eq!((p.mean, p.ci_half_width, p.n), (Some(0.0), 0.0, 5));
        }
    }

    #[test]
    fn constant_series_has_zero_width() {
        for v in [0.3, 0.7, 0.1, 1.0 / 3.0] {
            for n in 2..8 {
                let runs = vec![vec![Some(v); 4]; n];
                for p in summarize(&runs, 4) {
                    assert_eq!((p.mean, p.ci_half_width), (Some(v), 0.0), "{v} x {n}");
                }
            }
        }
    }

    #[test]
    fn ci_uses_sample_sd() {
        let runs = vec![vec![Some(1.0)], vec![Some(2.0)], vec![Some(3.0)]];
        let p = &summarize(&runs, 1)[0];
        assert_eq!(p.mean, Some(2.0));
        assert!((p.ci_half_width - 1.96 / 3f64.sqrt()).abs() < 1e-12);
        let one = &summarize(&runs[..1], 1)[0];
        assert!(one.single_run() && one.ci_half_width == 0.0);
    }

    #[test]
    fn missing_and_infinite_values_leave_the_mean() {
        let runs = vec![vec![Some(1.0)], vec![None], vec![Some(f64::INFINITY)], vec![Some(3.0)]];
        let p = &summarize(&runs, 1)[0];
        assert_eq!((p.mean, p.n, p.missing, p.infinite), (Some(2.0), 2, 1, 1));
    }

    #[test]
    fn mismatched_runs_are_rejected() {
        let a = run(&[(Algorithm::Greedier, &[0.5]), (Algorithm::Greedy, &[0.5])]);
        let b = run(&[(Algorithm::Greedier, &[0.5])]);
        assert!(matches!(series_from_runs("x", &[a, b], None), Err(AnalysisError::RunMismatch(_))));
        let c = run(&[(Algorithm::Greedy, &[0.5])]);
        assert!(series_from_runs("x", &[c], Some(Algorithm::Greedier)).is_err());
    }

    #[test]
    fn csv_layout() {
        let r = run(&[(Algorithm::Greedier, &[0.5, 0.75])]);
        let csv = series_from_runs("acc", &[r], None).unwrap().to_csv();
        assert_eq!(csv, "algorithm,statistic,t,mean,ci_lo,ci_hi,n,single_run\ngreedier,acc,1,0.75,0.75,0.75,1,true\n");
    }

    #[test]
    fn infinite_run_values_survive_json() {
        let runs = vec![vec![Some(f64::INFINITY), None, Some(0.5)]];
        let s = Series { algorithm: Algorithm::Greedy, statistic: "apd".into(), points: summarize(&runs, 3), carried: vec![], runs };
        let b = SeriesBundle { max_t: 3, series: vec![s] };
        let back: SeriesBundle = serde_json::from_str(&b.to_json()).unwrap();
        assert_eq!(back, b);
    }
}
