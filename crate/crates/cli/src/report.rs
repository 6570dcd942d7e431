//! SVG figures from the analysis and MDS outputs.
//!
//! Files are named `<family>_<environment|all>_<t|all>.svg`.

use std::collections::BTreeMap;
use std::path::PathBuf;

use log::warn;
use soupbench::analysis::{DistanceBin, ErrorSet, QuantileRecord, Series, SeriesBundle};
use soupbench::mds::triangulated_backdrop;
use soupbench::metrics::DistanceKind;
use soupbench::soup::Algorithm;
use soupbench::store::Split;
use soupbench::viz::{render_boxplots, render_ci_lines, render_mds_frames, BoxGroup, CiPanel, MdsScene, PlotKind, PlotSpec, RefLine, VizError};

use crate::analyze::{kinds_in, load_records, load_series};
use crate::config::RunConfig;
use crate::embed::load_mds;
use crate::layout::{write, Layout};
use crate::stages::load_trajectory;
use crate::CliError;

struct Figures<'a> {
    layout: &'a Layout,
    hash: String,
    written: Vec<PathBuf>,
}

impl Figures<'_> {
    fn spec(&self, kind: PlotKind, title: &str, x: &str, y: &str) -> PlotSpec {
        PlotSpec::new(kind, title, x, y).with_comment(Some(format!("config_hash: {}", self.hash)))
    }

    fn stamp(&self, spec: PlotSpec) -> PlotSpec {
        spec.with_comment(Some(format!("config_hash: {}", self.hash)))
    }

    /// Empty figures are skipped with a warning; other failures are errors.
    fn save(&mut self, name: &str, svg: Result<String, VizError>) -> Result<(), CliError> {
        match svg {
            Ok(text) => {
                let path = self.layout.report().join(format!("{name}.svg"));
                write(&path, text.as_bytes())?;
                self.written.push(path);
                Ok(())
            }
            Err(VizError::Empty(what)) => {
                warn!("{name}: skipped, {what}");
                Ok(())
            }
            Err(e) => Err(CliError::Data(format!("{name}: {e}"))),
        }
    }
}

fn head(s: &Series, max_t: usize) -> Series {
    let mut out = s.clone();
    out.points.retain(|p| p.t <= max_t);
    out
}

fn split_title(split: Split) -> &'static str {
    match split {
        Split::IdVal => "ID-val",
        Split::OodTest => "OOD",
    }
}

/// Series of `statistic` for each algorithm, leaving greedier out of
/// difference plots unless it is alone.
fn pick<'a>(bundle: &'a SeriesBundle, algos: &[Algorithm], statistic: &str, drop_greedier: bool) -> Vec<&'a Series> {
    let all: Vec<&Series> = algos.iter().filter_map(|&a| bundle.get(a, statistic)).collect();
    if drop_greedier && all.len() > 1 {
        all.into_iter().filter(|s| s.algorithm != Algorithm::Greedier).collect()
    } else {
        all
    }
}

fn split_panels(fig: &mut Figures<'_>, name: &str, bundle: &SeriesBundle, algos: &[Algorithm], stat: impl Fn(Split) -> String, diff: bool, y: &str) -> Result<(), CliError> {
    let panels: Vec<CiPanel<'_>> = Split::ALL
        .iter()
        .map(|&s| CiPanel { title: split_title(s).into(), series: pick(bundle, algos, &stat(s), diff) })
        .collect();
    let mut spec = fig.spec(PlotKind::CiLines, name, "t", y);
    if diff {
        spec.reference_lines.push(RefLine { value: 0.0, dashed: true });
    }
    let svg = render_ci_lines(&panels, &spec);
    fig.save(&format!("{name}_all_all"), svg)
}

fn bins(values: impl Iterator<Item = (usize, f64)>) -> Vec<DistanceBin> {
    let mut by_t: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for (t, v) in values {
        by_t.entry(t).or_default().push(v);
    }
    by_t.into_iter().map(|(t, v)| DistanceBin::from_values(t, v)).collect()
}

fn selection_boxplots(fig: &mut Figures<'_>, cfg: &RunConfig, records: &[QuantileRecord], kind: DistanceKind, env: Option<usize>) -> Result<(), CliError> {
    let scope = env.map_or("all".to_string(), |e| e.to_string());
    let chosen = |r: &&QuantileRecord| r.kind == kind && env.is_none_or(|e| r.environment as usize == e);
    let group = |algo: Algorithm, value: fn(&QuantileRecord) -> f64| BoxGroup {
        algorithm: algo,
        bins: bins(records.iter().filter(chosen).filter(|r| r.algorithm == algo).map(|r| (r.t, value(r)))),
    };
    let q: Vec<BoxGroup> = cfg.algorithms.iter().map(|&a| group(a, |r| r.quantile)).collect();
    let title = format!("selected-candidate quantile ({})", kind.name());
    let spec = fig.stamp(PlotSpec::quantile_boxplot(&title, "t"));
    let svg = render_boxplots(&q, &spec);
    fig.save(&format!("quantile-boxplot-{}_{scope}_all", kind.name()), svg)?;

    let d: Vec<BoxGroup> = cfg.algorithms.iter().map(|&a| group(a, |r| r.distance)).collect();
    let spec = fig.spec(PlotKind::Boxplot, &format!("selected-candidate distance ({})", kind.name()), "t", "distance");
    let svg = render_boxplots(&d, &spec);
    fig.save(&format!("distance-boxplot-{}_{scope}_all", kind.name()), svg)
}

pub fn report(cfg: &RunConfig, layout: &Layout) -> Result<Vec<PathBuf>, CliError> {
    let series = load_series(layout)?;
    let records = load_records(layout)?;
    let mut fig = Figures { layout, hash: cfg.hash(), written: Vec::new() };
    let algos = &cfg.algorithms;

    split_panels(&mut fig, "accuracy-diff", &series.accuracy, algos, |s| format!("{}_accuracy_diff", s.name()), true, "accuracy - greedier")?;
    split_panels(&mut fig, "accuracy", &series.accuracy, algos, |s| format!("{}_accuracy", s.name()), false, "accuracy")?;
    for set in ErrorSet::ALL {
        let name = format!("error-dynamics-{}", set.name().replace('_', "-"));
        split_panels(&mut fig, &name, &series.error_dynamics, algos, |s| format!("{}_{}_diff", s.name(), set.name()), true, "agreement - greedier")?;
    }
    let apd = CiPanel { title: String::new(), series: pick(&series.apd, algos, "apd", false) };
    let svg = render_ci_lines(&[apd], &fig.spec(PlotKind::CiLines, "ingredient APD", "t", "APD"));
    fig.save("apd_all_all", svg)?;

    for kind in kinds_in(&records.selection) {
        let k = kind.name();
        for (stat, y) in [("quantile", "quantile"), ("distance", "distance")] {
            let trimmed: Vec<Series> =
                pick(&series.selection, algos, &format!("{stat}_{k}"), false).into_iter().map(|s| head(s, cfg.max_plot_t)).collect();
            let mut spec = fig.spec(PlotKind::CiLines, &format!("selected-candidate {stat} ({k})"), "t", y);
            if stat == "quantile" {
                spec.reference_lines.push(RefLine { value: 0.5, dashed: true });
                spec.y_range = Some((0.0, 1.0));
            }
            let panel = CiPanel { title: String::new(), series: trimmed.iter().collect() };
            let svg = render_ci_lines(&[panel], &spec);
            fig.save(&format!("{stat}-ci-{k}_all_all"), svg)?;
        }
        selection_boxplots(&mut fig, cfg, &records.selection, kind, None)?;
        if cfg.per_environment {
            for e in 0..cfg.environments {
                selection_boxplots(&mut fig, cfg, &records.selection, kind, Some(e))?;
            }
        }
    }

    let apd_q = BoxGroup { algorithm: Algorithm::Greedier, bins: bins(records.apd_quantiles.iter().map(|r| (r.t, r.quantile))) };
    let svg = render_boxplots(&[apd_q], &fig.stamp(PlotSpec::quantile_boxplot("selected-candidate APD quantile", "t")));
    fig.save("apd-quantile_all_all", svg)?;

    mds_frames(&mut fig, cfg)?;
    Ok(fig.written)
}

fn mds_frames(fig: &mut Figures<'_>, cfg: &RunConfig) -> Result<(), CliError> {
    for &t in &cfg.mds_trials {
        for e in 0..cfg.environments {
            let traj = load_trajectory(fig.layout, t, e, cfg.mds_algorithm)?;
            for &kind in &cfg.distance_kinds {
                let file = load_mds(fig.layout, t, e, kind)?;
                let acc: Vec<f64> = file.nodes.iter().map(|n| n.id_val_accuracy).collect();
                let backdrop = match triangulated_backdrop(&file.embedding.points, &acc) {
                    Ok(tri) => Some(tri),
                    Err(err) => {
                        warn!("trial {t} env {e} {}: no backdrop, {err}", kind.name());
                        None
                    }
                };
                let scene = MdsScene { nodes: &file.nodes, embedding: &file.embedding, backdrop: backdrop.as_ref() };
                let title = format!("{} trajectory, {} MDS", cfg.mds_algorithm, kind.name());
                let spec = fig.spec(PlotKind::MdsFrame, &title, "", "");
                let frames = render_mds_frames(&scene, &traj, &spec).map_err(|err| CliError::Data(err.to_string()))?;
                for (i, svg) in frames.into_iter().enumerate() {
                    fig.save(&format!("mds-{}-trial{t}_{e}_{}", kind.name(), i + 1), Ok(svg))?;
                }
            }
        }
    }
    Ok(())
}
