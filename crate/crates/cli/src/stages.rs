//! generate, soup and verify.

use std::path::PathBuf;

use log::info;
use rayon::prelude::*;
use soupbench::bench::{build_population, SynthEvaluator};
use soupbench::soup::{self, verify_trajectory, Algorithm, SoupTrajectory, Violation};
use soupbench::store::{load_bundle, save_bundle, Bundle};

use crate::config::RunConfig;
use crate::layout::{read, write, Layout};
use crate::CliError;

/// Builds one bundle per (trial, environment).
pub fn generate(cfg: &RunConfig, layout: &Layout) -> Result<Vec<PathBuf>, CliError> {
    let hash = cfg.hash();
    let runs = cfg.runs();
    info!("generating {} bundles of {} models", runs.len(), cfg.bench.n_models);
    let bundles = runs
        .par_iter()
        .map(|&(t, e)| {
            let mut b = build_population(&cfg.bench, t, e).map_err(|err| CliError::Data(format!("trial {t} env {e}: {err}")))?;
            b.manifest.config_hash = Some(hash.clone());
            Ok(b)
        })
        .collect::<Result<Vec<Bundle>, CliError>>()?;
    let mut out = Vec::new();
    for (&(t, e), b) in runs.iter().zip(&bundles) {
        let dir = layout.bundle(t, e);
        save_bundle(b, &dir).map_err(|err| CliError::Internal(format!("{}: {err}", dir.display())))?;
        out.push(dir);
    }
    Ok(out)
}

pub fn load(layout: &Layout, trial: u32, env: usize) -> Result<Bundle, CliError> {
    let dir = layout.bundle(trial, env);
    load_bundle(&dir).map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))
}

pub fn evaluator(bundle: &Bundle) -> Result<SynthEvaluator, CliError> {
    SynthEvaluator::from_manifest(&bundle.manifest).map_err(|e| CliError::Data(format!("evaluator: {e}")))
}

pub fn load_trajectory(layout: &Layout, trial: u32, env: usize, algo: Algorithm) -> Result<SoupTrajectory, CliError> {
    let path = layout.trajectory(trial, env, algo);
    SoupTrajectory::from_json(&read(&path)?).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

/// Runs every configured algorithm on every bundle.
pub fn soup(cfg: &RunConfig, layout: &Layout) -> Result<Vec<PathBuf>, CliError> {
    let hash = cfg.hash();
    let runs = cfg.runs();
    let done = runs
        .par_iter()
        .map(|&(t, e)| {
            let bundle = load(layout, t, e)?;
            let eval = evaluator(&bundle)?;
            cfg.algorithms
                .iter()
                .map(|&algo| {
                    let mut traj = soup::run(algo, &bundle, &eval, cfg.acceptance_for(algo))
                        .map_err(|err| CliError::Data(format!("{algo} on trial {t} env {e}: {err}")))?;
                    traj.run.config_hash = Some(hash.clone());
                    Ok((layout.trajectory(t, e, algo), traj))
                })
                .collect::<Result<Vec<_>, CliError>>()
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let mut out = Vec::new();
    for (path, traj) in done.into_iter().flatten() {
        let text = traj.to_json().map_err(|e| CliError::Internal(e.to_string()))?;
        write(&path, text.as_bytes())?;
        out.push(path);
    }
    Ok(out)
}

#[derive(Debug, Default)]
pub struct VerifyReport {
    pub checked: usize,
    pub violations: Vec<(PathBuf, Violation)>,
}

/// Checks every trajectory against its bundle.
pub fn verify(cfg: &RunConfig, layout: &Layout) -> Result<VerifyReport, CliError> {
    let mut report = VerifyReport::default();
    for (t, e) in cfg.runs() {
        let bundle = load(layout, t, e)?;
        let ids: Vec<u32> = bundle.models.iter().map(|m| m.id).collect();
        for &algo in &cfg.algorithms {
            let traj = load_trajectory(layout, t, e, algo)?;
            report.checked += 1;
            let path = layout.trajectory(t, e, algo);
            report.violations.extend(verify_trajectory(&traj, &ids).into_iter().map(|v| (path.clone(), v)));
        }
    }
    Ok(report)
}
