//! Per-example outcome changes when an ingredient joins, and diversity of
//! the ingredient set.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{mid_rank_quantile, series_from_runs, AnalysisError, RunSet, SeriesBundle};
use crate::metrics::{avg_pairwise_diversity, ext_real, PairwiseDiversity};
use crate::soup::{Algorithm, SoupTrajectory};
use crate::store::{Bundle, CorrectBits, Split};

/// Joint outcome of the current WA (at step `t`) and the joining ingredient.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorSet {
    TIncorrectIngredientCorrect,
    TCorrectIngredientIncorrect,
    TCorrectIngredientCorrect,
    TIncorrectIngredientIncorrect,
}

impl ErrorSet {
    pub const ALL: [ErrorSet; 4] = [
        ErrorSet::TIncorrectIngredientCorrect,
        ErrorSet::TCorrectIngredientIncorrect,
        ErrorSet::TCorrectIngredientCorrect,
        ErrorSet::TIncorrectIngredientIncorrect,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ErrorSet::TIncorrectIngredientCorrect => "t_incorrect_ingredient_correct",
            ErrorSet::TCorrectIngredientIncorrect => "t_correct_ingredient_incorrect",
            ErrorSet::TCorrectIngredientCorrect => "t_correct_ingredient_correct",
            ErrorSet::TIncorrectIngredientIncorrect => "t_incorrect_ingredient_incorrect",
        }
    }

    pub fn classify(wa_correct: bool, ingredient_correct: bool) -> Self {
        match (wa_correct, ingredient_correct) {
            (false, true) => ErrorSet::TIncorrectIngredientCorrect,
            (true, false) => ErrorSet::TCorrectIngredientIncorrect,
            (true, true) => ErrorSet::TCorrectIngredientCorrect,
            (false, false) => ErrorSet::TIncorrectIngredientIncorrect,
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorDynamicsStep {
    pub t: usize,
    pub ingredient: u32,
    /// Examples per set, in [`ErrorSet::ALL`] order.
    pub set_sizes: [usize; 4],
    /// Probability that the next WA's outcome agrees with the ingredient's,
    /// per set; `None` for an empty set.
    pub agreement: [Option<f64>; 4],
}

fn bits(rec: &crate::store::CorrectnessRecord, split: Split) -> &CorrectBits {
    rec.split(split)
}

/// One entry per accepted step.
pub fn error_dynamics(traj: &SoupTrajectory, bundle: &Bundle, split: Split) -> Result<Vec<ErrorDynamicsStep>, AnalysisError> {
    let mut out = Vec::new();
    let mut current = &traj.initial;
    for it in &traj.iterations {
        let (Some(id), Some(next)) = (it.selected_id, it.wa_after.as_ref()) else { continue };
        let model = bundle.model(id).ok_or(AnalysisError::MissingModel(id))?;
        let (cur, ing, nxt) = (bits(&current.correctness, split), bits(&model.correctness, split), bits(&next.correctness, split));
        if cur.len() != ing.len() || cur.len() != nxt.len() {
            return Err(AnalysisError::RunMismatch(format!("correctness lengths differ at model {id}")));
        }
        let mut sizes = [0usize; 4];
        let mut agree = [0usize; 4];
        for i in 0..cur.len() {
            let set = ErrorSet::classify(cur.get(i), ing.get(i));
            sizes[set.index()] += 1;
            agree[set.index()] += usize::from(nxt.get(i) == ing.get(i));
        }
        let agreement = std::array::from_fn(|k| (sizes[k] > 0).then(|| agree[k] as f64 / sizes[k] as f64));
        out.push(ErrorDynamicsStep { t: out.len() + 1, ingredient: id, set_sizes: sizes, agreement });
        current = next;
    }
    Ok(out)
}

fn check_pairing(runs: &[RunSet], bundles: &[&Bundle]) -> Result<(), AnalysisError> {
    if runs.len() != bundles.len() {
        return Err(AnalysisError::RunMismatch(format!("{} runs but {} bundles", runs.len(), bundles.len())));
    }
    Ok(())
}

/// Per-set agreement series, as `(level, difference to greedier)`.
pub fn error_dynamics_series(runs: &[RunSet], bundles: &[&Bundle], split: Split) -> Result<(SeriesBundle, SeriesBundle), AnalysisError> {
    check_pairing(runs, bundles)?;
    let steps: Vec<BTreeMap<Algorithm, Vec<ErrorDynamicsStep>>> = runs
        .iter()
        .zip(bundles)
        .map(|(run, bundle)| run.iter().map(|(&a, traj)| Ok((a, error_dynamics(traj, bundle, split)?))).collect())
        .collect::<Result<_, AnalysisError>>()?;

    let mut level = SeriesBundle::default();
    let mut diff = SeriesBundle::default();
    for set in ErrorSet::ALL {
        let raw: Vec<BTreeMap<Algorithm, Vec<Option<f64>>>> = steps
            .iter()
            .map(|run| {
                run.iter()
                    .map(|(&a, s)| (a, std::iter::once(None).chain(s.iter().map(|st| st.agreement[set.index()])).collect()))
                    .collect()
            })
            .collect();
        let name = format!("{}_{}", split.name(), set.name());
        level.extend(series_from_runs(&name, &raw, None)?);
        diff.extend(series_from_runs(&format!("{name}_diff"), &raw, Some(Algorithm::Greedier))?);
    }
    let missing: usize = diff.series.iter().flat_map(|s| &s.points).map(|p| p.missing).sum();
    if missing > 0 {
        log::info!("error dynamics on {}: {missing} undefined (empty-set) values left out of means", split.name());
    }
    Ok((level, diff))
}

fn set_apd(bundle: &Bundle, ids: &[u32]) -> Result<PairwiseDiversity, AnalysisError> {
    let bits: Vec<&CorrectBits> = ids
        .iter()
        .map(|&id| bundle.model(id).map(|m| &m.correctness.id_val).ok_or(AnalysisError::MissingModel(id)))
        .collect::<Result<_, _>>()?;
    Ok(avg_pairwise_diversity(&bits)?)
}

/// APD (ID-val ratio-error) of the ingredient set after each accepted step,
/// one series per algorithm; starts at two ingredients.
pub fn apd_series(runs: &[RunSet], bundles: &[&Bundle]) -> Result<SeriesBundle, AnalysisError> {
    check_pairing(runs, bundles)?;
    let raw: Vec<BTreeMap<Algorithm, Vec<Option<f64>>>> = runs
        .iter()
        .zip(bundles)
        .map(|(run, bundle)| {
            run.iter()
                .map(|(&a, traj)| {
                    let mut v = vec![None];
                    for wa in traj.iterations.iter().filter_map(|it| it.wa_after.as_ref()) {
                        v.push(Some(set_apd(bundle, &wa.ingredients)?.mean));
                    }
                    Ok((a, v))
                })
                .collect()
        })
        .collect::<Result<_, AnalysisError>>()?;
    series_from_runs("apd", &raw, None)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApdQuantile {
    pub trial: u32,
    pub environment: u32,
    pub t: usize,
    pub quantile: f64,
    #[serde(with = "ext_real")]
    pub apd: f64,
    pub candidates: usize,
}

/// For each accepted step, where the selected candidate set's APD ranks
/// among the APDs of every candidate set evaluated at that step.
pub fn greedier_apd_quantiles(traj: &SoupTrajectory, bundle: &Bundle) -> Result<Vec<ApdQuantile>, AnalysisError> {
    let mut out = Vec::new();
    let mut ingredients = traj.initial.ingredients.clone();
    for it in &traj.iterations {
        let Some(sel) = it.selected_id else { continue };
        let apds: Vec<(u32, f64)> = it
            .evals
            .iter()
            .map(|e| {
                let mut set = ingredients.clone();
                set.push(e.candidate_id);
                Ok((e.candidate_id, set_apd(bundle, &set)?.mean))
            })
            .collect::<Result<_, AnalysisError>>()?;
        let pool: Vec<f64> = apds.iter().map(|(_, a)| *a).collect();
        let chosen = apds.iter().find(|(id, _)| *id == sel).map(|(_, a)| *a).ok_or(AnalysisError::MissingModel(sel))?;
        out.push(ApdQuantile {
            trial: traj.run.trial,
            environment: traj.run.environment,
            t: out.len() + 1,
            quantile: mid_rank_quantile(chosen, &pool),
            apd: chosen,
            candidates: pool.len(),
        });
        ingredients.push(sel);
        ingredients.sort_unstable();
    }
    Ok(out)
}
