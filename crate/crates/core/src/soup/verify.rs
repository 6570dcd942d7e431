//! Invariant checker over recorded trajectories.

use std::collections::BTreeSet;
use std::fmt;

use super::{Acceptance, Algorithm, CandidateDistance, SoupTrajectory};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub t: usize,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t={}: {}", self.t, self.message)
    }
}

/// Checks a trajectory against the bundle's model ids. Returns every
/// violation found; an empty list means the log is consistent.
pub fn verify_trajectory(traj: &SoupTrajectory, model_ids: &[u32]) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut fail = |t: usize, message: String| out.push(Violation { t, message });

    let all: BTreeSet<u32> = model_ids.iter().copied().collect();
    let accept = traj.acceptance;
    let mut ingredients: BTreeSet<u32> = BTreeSet::from([traj.initial_model_id]);
    let mut discarded: BTreeSet<u32> = BTreeSet::new();
    let mut selected_ever: BTreeSet<u32> = BTreeSet::new();
    let mut current_acc = traj.initial.id_val_accuracy;

    if traj.initial.ingredients != [traj.initial_model_id] {
        fail(0, "initial WA must hold exactly the initial model".into());
    }
    if !all.contains(&traj.initial_model_id) {
        fail(0, format!("initial model {} is not in the bundle", traj.initial_model_id));
    }

    let n_iter = traj.iterations.len();
    for (k, it) in traj.iterations.iter().enumerate() {
        let t = k + 1;
        if it.t != t {
            fail(t, format!("step index {} out of sequence", it.t));
        }
        let remaining: BTreeSet<u32> = it.remaining_ids_before.iter().copied().collect();
        if remaining.len() != it.remaining_ids_before.len() {
            fail(t, "duplicate ids in remaining set".into());
        }

        // conservation: ingredients, remaining and discarded partition the bundle
        let overlap = ingredients.intersection(&remaining).count()
            + ingredients.intersection(&discarded).count()
            + remaining.intersection(&discarded).count();
        let union: BTreeSet<u32> = ingredients.union(&remaining).chain(discarded.iter()).copied().collect();
        if overlap != 0 || union != all {
            fail(t, "ingredients, remaining and discarded do not partition the model set".into());
        }
        if let Some(&again) = remaining.intersection(&selected_ever).next() {
            fail(t, format!("previously selected model {again} reappears in the remaining set"));
        }

        let dist_ids: Vec<u32> = it.distances.iter().map(|d| d.id).collect();
        if dist_ids != it.remaining_ids_before {
            fail(t, "distances do not cover the remaining set".into());
        }
        for d in &it.distances {
            if d.diversity.is_nan() || d.diversity < 0.0 || d.euclidean.is_nan() || d.euclidean < 0.0 {
                fail(t, format!("negative or NaN distance for model {}", d.id));
            }
        }

        let eval_ids: Vec<u32> = it.evals.iter().map(|e| e.candidate_id).collect();
        if eval_ids.iter().collect::<BTreeSet<_>>().len() != eval_ids.len() {
            fail(t, "candidate evaluated twice in one step".into());
        }
        if eval_ids.iter().any(|id| !remaining.contains(id)) {
            fail(t, "evaluated candidate is not in the remaining set".into());
        }
        for e in &it.evals {
            let in_range = |a: f64| (0.0..=1.0).contains(&a);
            if !in_range(e.wa_id_val_accuracy) || !in_range(e.wa_ood_accuracy) {
                fail(t, format!("accuracy out of range for candidate {}", e.candidate_id));
            }
            if it.distance_of(e.candidate_id).map(|d| (d.diversity, d.euclidean))
                != Some((e.distance_to_current_wa.diversity, e.distance_to_current_wa.euclidean))
            {
                fail(t, format!("eval distance for {} disagrees with the step's distance table", e.candidate_id));
            }
        }

        // everything evaluated before the selection (or everything, when
        // nothing was selected) must fail the acceptance rule
        let sel_pos = it.selected_id.and_then(|s| eval_ids.iter().position(|&id| id == s));
        let failing_prefix = match (it.selected_id, sel_pos) {
            (Some(s), None) => {
                fail(t, format!("selected model {s} has no recorded evaluation"));
                &it.evals[..]
            }
            (_, Some(p)) => &it.evals[..p],
            (None, None) => &it.evals[..],
        };
        let must_fail = traj.algorithm != Algorithm::Greedier;
        for e in failing_prefix {
            if must_fail && accept.passes(e.wa_id_val_accuracy, current_acc) {
                fail(t, format!("candidate {} passed acceptance but was not selected", e.candidate_id));
            }
        }

        match traj.algorithm {
            Algorithm::Greedy => {
                if !it.remaining_ids_before.starts_with(&eval_ids) {
                    fail(t, "greedy evaluations do not follow the pass order".into());
                }
            }
            Algorithm::Greedier => {
                if eval_ids.iter().copied().collect::<BTreeSet<_>>() != remaining {
                    fail(t, "greedier must evaluate every remaining candidate".into());
                }
                let max = it.evals.iter().map(|e| e.wa_id_val_accuracy).fold(f64::NEG_INFINITY, f64::max);
                match it.selected_eval() {
                    Some(sel) => {
                        if sel.wa_id_val_accuracy != max {
                            fail(t, "greedier selection is not the step maximum".into());
                        }
                        let lowest = it.evals.iter().filter(|e| e.wa_id_val_accuracy == max).map(|e| e.candidate_id).min();
                        if lowest != Some(sel.candidate_id) {
                            fail(t, "greedier tie not broken by lowest id".into());
                        }
                    }
                    None => {
                        if accept.passes(max, current_acc) {
                            fail(t, "greedier stopped although the best candidate passes".into());
                        }
                    }
                }
            }
            Algorithm::RankedDiversity | Algorithm::RankedEuclidean => {
                let kind = traj.algorithm.ranking_kind().unwrap();
                let mut order: Vec<&CandidateDistance> = it.distances.iter().collect();
                order.sort_by(|a, b| b.get(kind).total_cmp(&a.get(kind)).then(a.id.cmp(&b.id)));
                let expected: Vec<u32> = order.iter().map(|d| d.id).take(eval_ids.len()).collect();
                if expected != eval_ids {
                    fail(t, "ranked evaluations do not follow decreasing distance".into());
                }
                if it.selected_id.is_none() && eval_ids.len() != remaining.len() {
                    fail(t, "ranked stopped before a full pass".into());
                }
            }
        }

        match (it.selected_id, &it.wa_after) {
            (Some(sel), Some(after)) => {
                if !selected_ever.insert(sel) {
                    fail(t, format!("model {sel} selected twice"));
                }
                if let Some(e) = it.selected_eval() {
                    if !accept.passes(e.wa_id_val_accuracy, current_acc) {
                        fail(t, format!("selected candidate {sel} fails the acceptance rule"));
                    }
                    if e.wa_id_val_accuracy != after.id_val_accuracy || e.wa_ood_accuracy != after.ood_accuracy {
                        fail(t, "WA after selection disagrees with the selected evaluation".into());
                    }
                }
                let ok = match accept {
                    Acceptance::Strict => after.id_val_accuracy > current_acc,
                    Acceptance::NonStrict => after.id_val_accuracy >= current_acc,
                };
                if !ok {
                    fail(t, "WA accuracy is not monotone".into());
                }
                ingredients.insert(sel);
                if after.ingredients != ingredients.iter().copied().collect::<Vec<_>>() {
                    fail(t, "WA after selection lists the wrong ingredients".into());
                }
                current_acc = after.id_val_accuracy;
            }
            (None, None) => {
                if t != n_iter {
                    fail(t, "step without selection must be the last".into());
                }
            }
            _ => fail(t, "selection and WA-after must be recorded together".into()),
        }

        if traj.algorithm == Algorithm::Greedy {
            for e in &it.evals {
                if Some(e.candidate_id) != it.selected_id {
                    discarded.insert(e.candidate_id);
                }
            }
        }
    }

    let expected_discards: BTreeSet<u32> = traj.discarded_ids.iter().copied().collect();
    if expected_discards != discarded {
        fail(traj.terminated_at, "discarded ids do not match the evaluation log".into());
    }
    if traj.terminated_at != ingredients.len() {
        fail(traj.terminated_at, format!("terminated_at should be {}", ingredients.len()));
    }
    if traj.final_wa().ingredients != ingredients.iter().copied().collect::<Vec<_>>() {
        fail(traj.terminated_at, "final WA lists the wrong ingredients".into());
    }
    out
}
