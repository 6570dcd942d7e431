//! Ingredient selection: greedy, greedier and ranked weight-ensembling.
//!
//! Every run starts from the model with the highest ID-validation accuracy
//! (ties to the lowest id) and records a [`SoupTrajectory`]: for each step
//! `t` (the current WA holds `t` ingredients for greedier/ranked; greedy
//! advances `t` only on acceptance) the remaining pool, the distance of every
//! remaining model to the current WA, every candidate WA that was evaluated,
//! and the selection.
//!
//! Selection only ever consults ID-validation accuracy. OOD accuracy is
//! recorded alongside for analysis.

mod algos;
pub mod toy;
mod verify;

use std::error::Error as StdError;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{ext_real, DistanceKind, MetricError};
use crate::store::{CorrectnessRecord, StoreError, WeightVector};

pub use algos::{evaluate_candidate, run, run_greedier, run_greedy, run_ranked};
pub use verify::{verify_trajectory, Violation};

pub const TRAJECTORY_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum SoupError {
    #[error("empty bundle")]
    EmptyBundle,
    #[error("candidate {0} is already an ingredient")]
    AlreadyIngredient(u32),
    #[error("evaluator failed: {0}")]
    Evaluator(#[source] Box<dyn StdError + Send + Sync>),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("trajectory schema version {found} is not supported (expected {expected})")]
    Schema { found: u32, expected: u32 },
    #[error("malformed trajectory: {0}")]
    Json(#[from] serde_json::Error),
}

/// Accuracy oracle: per-example correctness of a weight vector on the
/// ID-validation and OOD splits.
pub trait Evaluator: Sync {
    fn evaluate(&self, weights: &WeightVector) -> Result<CorrectnessRecord, Box<dyn StdError + Send + Sync>>;
}

impl<F> Evaluator for F
where
    F: Fn(&WeightVector) -> Result<CorrectnessRecord, Box<dyn StdError + Send + Sync>> + Sync,
{
    fn evaluate(&self, weights: &WeightVector) -> Result<CorrectnessRecord, Box<dyn StdError + Send + Sync>> {
        self(weights)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "greedy")]
    Greedy,
    #[serde(rename = "greedier")]
    Greedier,
    #[serde(rename = "ranked-diversity")]
    RankedDiversity,
    #[serde(rename = "ranked-euclidean")]
    RankedEuclidean,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] =
        [Algorithm::Greedy, Algorithm::Greedier, Algorithm::RankedDiversity, Algorithm::RankedEuclidean];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Greedy => "greedy",
            Algorithm::Greedier => "greedier",
            Algorithm::RankedDiversity => "ranked-diversity",
            Algorithm::RankedEuclidean => "ranked-euclidean",
        }
    }

    pub fn ranking_kind(self) -> Option<DistanceKind> {
        match self {
            Algorithm::RankedDiversity => Some(DistanceKind::Diversity),
            Algorithm::RankedEuclidean => Some(DistanceKind::Euclidean),
            _ => None,
        }
    }

    /// Default acceptance rule: greedy keeps the non-strict `>=` of the
    /// original greedy soup, greedier and ranked require strict improvement.
    pub fn default_acceptance(self) -> Acceptance {
        match self {
            Algorithm::Greedy => Acceptance::NonStrict,
            _ => Acceptance::Strict,
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| format!("unknown algorithm {s:?}"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Acceptance {
    /// Candidate WA must beat the current accuracy.
    Strict,
    /// Candidate WA may tie the current accuracy.
    NonStrict,
}

impl Acceptance {
    pub fn passes(self, candidate: f64, current: f64) -> bool {
        match self {
            Acceptance::Strict => candidate > current,
            Acceptance::NonStrict => candidate >= current,
        }
    }
}

impl FromStr for Acceptance {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "strict" => Ok(Acceptance::Strict),
            "nonstrict" | "non-strict" => Ok(Acceptance::NonStrict),
            _ => Err(format!("unknown acceptance rule {s:?}")),
        }
    }
}

/// Distance from the current WA to one remaining model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateDistance {
    pub id: u32,
    /// Ratio-error on the ID-validation split.
    #[serde(with = "ext_real")]
    pub diversity: f64,
    /// Squared Euclidean distance in weight space.
    pub euclidean: f64,
}

impl CandidateDistance {
    pub fn get(&self, kind: DistanceKind) -> f64 {
        match kind {
            DistanceKind::Diversity => self.diversity,
            DistanceKind::Euclidean => self.euclidean,
        }
    }
}

/// Evaluation of the WA formed by adding one candidate to the ingredients.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateEval {
    pub candidate_id: u32,
    pub wa_id_val_accuracy: f64,
    pub wa_ood_accuracy: f64,
    pub distance_to_current_wa: CandidateDistance,
}

/// State of a weight-average.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WaSnapshot {
    /// Ingredient ids in ascending order.
    pub ingredients: Vec<u32>,
    pub id_val_accuracy: f64,
    pub ood_accuracy: f64,
    pub correctness: CorrectnessRecord,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Iteration {
    pub t: usize,
    /// Pool at the start of the step. For greedy this is the unvisited tail
    /// of the pass, in pass order; otherwise ascending ids.
    pub remaining_ids_before: Vec<u32>,
    /// Distance of every model in `remaining_ids_before` to the current WA.
    pub distances: Vec<CandidateDistance>,
    /// Candidate WAs in evaluation order.
    pub evals: Vec<CandidateEval>,
    pub selected_id: Option<u32>,
    pub wa_after: Option<WaSnapshot>,
}

impl Iteration {
    pub fn distance_of(&self, id: u32) -> Option<&CandidateDistance> {
        self.distances.iter().find(|d| d.id == id)
    }

    pub fn selected_eval(&self) -> Option<&CandidateEval> {
        let id = self.selected_id?;
        self.evals.iter().find(|e| e.candidate_id == id)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunLabel {
    pub trial: u32,
    pub environment: u32,
    #[serde(default)]
    pub config_hash: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SoupTrajectory {
    pub schema_version: u32,
    pub algorithm: Algorithm,
    pub acceptance: Acceptance,
    pub run: RunLabel,
    pub initial_model_id: u32,
    pub initial: WaSnapshot,
    pub iterations: Vec<Iteration>,
    /// Step at which the run stopped: accepted steps + 1.
    pub terminated_at: usize,
    /// Models greedy rejected and threw out (always empty for the others).
    pub discarded_ids: Vec<u32>,
}

impl SoupTrajectory {
    /// Current WA at the start of step `t` (1-based).
    pub fn wa_before(&self, t: usize) -> Option<&WaSnapshot> {
        match t {
            0 => None,
            1 => Some(&self.initial),
            _ => self.iterations.get(t - 2)?.wa_after.as_ref(),
        }
    }

    /// Final WA.
    pub fn final_wa(&self) -> &WaSnapshot {
        self.iterations
            .iter()
            .rev()
            .find_map(|it| it.wa_after.as_ref())
            .unwrap_or(&self.initial)
    }

    pub fn accepted(&self) -> impl Iterator<Item = &Iteration> {
        self.iterations.iter().filter(|it| it.selected_id.is_some())
    }

    /// ID-val / OOD accuracy of the WA after each accepted step, preceded by
    /// the initial model's (index 0).
    pub fn accuracy_series(&self) -> (Vec<f64>, Vec<f64>) {
        let mut id = vec![self.initial.id_val_accuracy];
        let mut ood = vec![self.initial.ood_accuracy];
        for wa in self.iterations.iter().filter_map(|it| it.wa_after.as_ref()) {
            id.push(wa.id_val_accuracy);
            ood.push(wa.ood_accuracy);
        }
        (id, ood)
    }

    pub fn to_json(&self) -> Result<String, SoupError> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self, SoupError> {
        #[derive(Deserialize)]
        struct Probe {
            schema_version: u32,
        }
        let probe: Probe = serde_json::from_str(text)?;
        if probe.schema_version != TRAJECTORY_SCHEMA_VERSION {
            return Err(SoupError::Schema { found: probe.schema_version, expected: TRAJECTORY_SCHEMA_VERSION });
        }
        Ok(serde_json::from_str(text)?)
    }
}

