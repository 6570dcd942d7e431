//! 2-D embeddings of the models and WAs one trajectory visited.

use std::path::PathBuf;

use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use soupbench::mds::{embed_distance_matrix, labeled_points_csv, Embedding, MdsNode, TrajectoryPoints};
use soupbench::metrics::DistanceKind;
use soupbench::soup::Algorithm;

use crate::config::RunConfig;
use crate::layout::{read, stamped_csv, write, Layout};
use crate::stages::{evaluator, load, load_trajectory};
use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MdsFile {
    pub config_hash: String,
    pub trial: u32,
    pub environment: usize,
    pub algorithm: Algorithm,
    pub kind: DistanceKind,
    pub nodes: Vec<MdsNode>,
    pub embedding: Embedding,
}

pub fn mds(cfg: &RunConfig, layout: &Layout) -> Result<Vec<PathBuf>, CliError> {
    let hash = cfg.hash();
    let runs: Vec<(u32, usize)> = cfg.mds_trials.iter().flat_map(|&t| (0..cfg.environments).map(move |e| (t, e))).collect();
    let files = runs
        .par_iter()
        .map(|&(t, e)| {
            let bundle = load(layout, t, e)?;
            let eval = evaluator(&bundle)?;
            let traj = load_trajectory(layout, t, e, cfg.mds_algorithm)?;
            let points = TrajectoryPoints::collect(&traj, &bundle, &eval).map_err(|err| CliError::Data(err.to_string()))?;
            info!("trial {t} env {e}: embedding {} points", points.len());
            cfg.distance_kinds
                .iter()
                .map(|&kind| {
                    let matrix = points.distance_matrix(kind).map_err(|err| CliError::Data(err.to_string()))?;
                    let mut mcfg = cfg.mds.clone();
                    mcfg.seed = cfg.mds_seed(t, e, kind);
                    let embedding = embed_distance_matrix(&matrix, &mcfg)
                        .map_err(|err| CliError::Data(format!("trial {t} env {e} {}: {err}", kind.name())))?;
                    let csv = labeled_points_csv(&points.labeled(&embedding));
                    let file = MdsFile {
                        config_hash: hash.clone(),
                        trial: t,
                        environment: e,
                        algorithm: cfg.mds_algorithm,
                        kind,
                        nodes: points.nodes.clone(),
                        embedding,
                    };
                    Ok((t, e, kind, csv, file))
                })
                .collect::<Result<Vec<_>, CliError>>()
        })
        .collect::<Result<Vec<_>, CliError>>()?;

    let mut out = Vec::new();
    for (t, e, kind, csv, file) in files.into_iter().flatten() {
        let csv_path = layout.mds(t, e, kind, "csv");
        write(&csv_path, stamped_csv(&hash, &csv).as_bytes())?;
        let json_path = layout.mds(t, e, kind, "json");
        let mut text = serde_json::to_string_pretty(&file).map_err(|err| CliError::Internal(err.to_string()))?;
        text.push('\n');
        write(&json_path, text.as_bytes())?;
        out.push(csv_path);
        out.push(json_path);
    }
    Ok(out)
}

pub fn load_mds(layout: &Layout, trial: u32, env: usize, kind: DistanceKind) -> Result<MdsFile, CliError> {
    let path = layout.mds(trial, env, kind, "json");
    serde_json::from_str(&read(&path)?).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}
