//! The set of models and weight averages a soup run touched, ready for
//! embedding.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Embedding, LabeledPoint, MdsError, PointRole};
use crate::metrics::{pairwise_distance_matrix, DistanceKind, DistanceMatrix, MetricItem};
use crate::soup::{Evaluator, SoupTrajectory};
use crate::store::{average_weights, Bundle, CorrectBits, WeightVector};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MdsNode {
    /// `m<id>` for a model, `wa<id>-<id>-...` for a weight average.
    pub label: String,
    /// Ascending. A one-element set is the model itself.
    pub ingredients: Vec<u32>,
    pub id_val_accuracy: f64,
    pub ood_accuracy: f64,
    /// Step at which the point first appears; models are there from 0.
    pub first_t: usize,
    /// Role at the end of the run.
    pub role: PointRole,
}

pub struct TrajectoryPoints {
    pub nodes: Vec<MdsNode>,
    weights: Vec<WeightVector>,
    correct: Vec<CorrectBits>,
    index: BTreeMap<Vec<u32>, usize>,
}

fn label_of(set: &[u32]) -> String {
    match set {
        [id] => format!("m{id}"),
        _ => format!("wa{}", set.iter().map(u32::to_string).collect::<Vec<_>>().join("-")),
    }
}

fn with(set: &[u32], id: u32) -> Vec<u32> {
    let mut s = set.to_vec();
    s.push(id);
    s.sort_unstable();
    s
}

impl TrajectoryPoints {
    /// Every model of the bundle plus every candidate WA the run evaluated.
    /// WA correctness on ID-val comes from `evaluator`.
    pub fn collect(traj: &SoupTrajectory, bundle: &Bundle, evaluator: &dyn Evaluator) -> Result<Self, MdsError> {
        let mut nodes = Vec::new();
        let mut index = BTreeMap::new();
        for m in &bundle.models {
            index.insert(vec![m.id], nodes.len());
            nodes.push(MdsNode {
                label: label_of(&[m.id]),
                ingredients: vec![m.id],
                id_val_accuracy: m.id_val_accuracy,
                ood_accuracy: m.ood_accuracy(),
                first_t: 0,
                role: PointRole::Ingredient,
            });
        }
        let mut soups = Vec::new();
        for (k, it) in traj.iterations.iter().enumerate() {
            let t = k + 1;
            let current = traj.wa_before(t).ok_or_else(|| MdsError::Source(format!("no WA before step {t}")))?;
            soups.push(current.ingredients.clone());
            for e in &it.evals {
                let set = with(&current.ingredients, e.candidate_id);
                if index.contains_key(&set) {
                    continue;
                }
                index.insert(set.clone(), nodes.len());
                nodes.push(MdsNode {
                    label: label_of(&set),
                    ingredients: set,
                    id_val_accuracy: e.wa_id_val_accuracy,
                    ood_accuracy: e.wa_ood_accuracy,
                    first_t: t,
                    role: PointRole::CandidateWa,
                });
            }
        }
        let final_set = traj.final_wa().ingredients.clone();
        for node in nodes.iter_mut().filter(|n| n.ingredients.len() > 1) {
            if node.ingredients == final_set {
                node.role = PointRole::CurrentWa;
            } else if soups.contains(&node.ingredients) {
                node.role = PointRole::PastWa;
            }
        }

        let built: Vec<(WeightVector, CorrectBits)> = nodes
            .par_iter()
            .map(|n| {
                if let [id] = n.ingredients[..] {
                    let m = bundle.model(id).ok_or_else(|| MdsError::Source(format!("model {id} missing from bundle")))?;
                    return Ok((m.weights.clone(), m.correctness.id_val.clone()));
                }
                let members = n
                    .ingredients
                    .iter()
                    .map(|&id| bundle.model(id).map(|m| &m.weights))
                    .collect::<Option<Vec<_>>>()
                    .ok_or_else(|| MdsError::Source(format!("{} names a model missing from the bundle", n.label)))?;
                let w = average_weights(members).map_err(|e| MdsError::Source(e.to_string()))?;
                let c = evaluator.evaluate(&w).map_err(|e| MdsError::Source(format!("{}: {e}", n.label)))?;
                Ok((w, c.id_val))
            })
            .collect::<Result<_, MdsError>>()?;
        let (weights, correct) = built.into_iter().unzip();
        Ok(Self { nodes, weights, correct, index })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Node of an ingredient set given in any order.
    pub fn find(&self, set: &[u32]) -> Option<usize> {
        let mut key = set.to_vec();
        key.sort_unstable();
        self.index.get(&key).copied()
    }

    pub fn distance_matrix(&self, kind: DistanceKind) -> Result<DistanceMatrix, MdsError> {
        let labels: Vec<String> = self.nodes.iter().map(|n| n.label.clone()).collect();
        if labels.len() < 2 {
            // a lone model: nothing to compare, but still a valid 1x1 (or empty) matrix
            let entries = vec![0.0; labels.len()];
            return DistanceMatrix::from_entries(kind, labels, entries).map_err(|e| MdsError::Source(e.to_string()));
        }
        let items: Vec<MetricItem<'_>> =
            self.weights.iter().zip(&self.correct).map(|(weights, correct)| MetricItem { weights, correct }).collect();
        let m = pairwise_distance_matrix(&items, kind).map_err(|e| MdsError::Source(e.to_string()))?;
        m.with_labels(labels).map_err(|e| MdsError::Source(e.to_string()))
    }

    /// One row per node, accuracy on ID-val.
    pub fn labeled(&self, embedding: &Embedding) -> Vec<LabeledPoint> {
        self.nodes
            .iter()
            .zip(&embedding.points)
            .map(|(n, p)| LabeledPoint { id: n.label.clone(), x: p[0], y: p[1], accuracy: n.id_val_accuracy, role: n.role })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::soup::toy::{one_hot_bundle, SetTable};
    use crate::soup::{run, Acceptance, Algorithm};

    #[test]
    fn greedier_run_lists_every_evaluated_set_once() {
        let table = SetTable::random(6, 50, 8);
        let bundle = one_hot_bundle(&table);
        let traj = run(Algorithm::Greedier, &bundle, &table, Acceptance::Strict).unwrap();
        let pts = TrajectoryPoints::collect(&traj, &bundle, &table).unwrap();
        let evaluated: usize = traj.iterations.iter().map(|it| it.evals.len()).sum();
        assert_eq!(pts.len(), 6 + evaluated);
        let final_wa = &traj.final_wa().ingredients;
        if final_wa.len() > 1 {
            assert_eq!(pts.nodes[pts.find(final_wa).unwrap()].role, PointRole::CurrentWa);
        }
        for n in &pts.nodes {
            assert_eq!(pts.nodes[pts.find(&n.ingredients).unwrap()].label, n.label);
        }
    }

    #[test]
    fn distances_use_the_averaged_members() {
        let table = SetTable::random(4, 30, 2);
        let bundle = one_hot_bundle(&table);
        let traj = run(Algorithm::Greedier, &bundle, &table, Acceptance::Strict).unwrap();
        let pts = TrajectoryPoints::collect(&traj, &bundle, &table).unwrap();
        let m = pts.distance_matrix(DistanceKind::Euclidean).unwrap();
        let wa = pts.find(&with(&[traj.initial_model_id], traj.iterations[0].evals[0].candidate_id)).unwrap();
        // one-hot members: the pair average sits at 1/2 on two axes
        let other = pts.find(&[traj.initial_model_id]).unwrap();
        assert!((m.get(wa, other) - 0.5).abs() < 1e-12);
        assert_eq!(m.labels()[wa], pts.nodes[wa].label);
    }

    #[test]
    fn lone_model_embeds_at_a_single_point() {
        let table = SetTable::random(1, 20, 3);
        let bundle = one_hot_bundle(&table);
        let traj = run(Algorithm::Greedier, &bundle, &table, Acceptance::Strict).unwrap();
        let pts = TrajectoryPoints::collect(&traj, &bundle, &table).unwrap();
        for kind in DistanceKind::ALL {
            let m = pts.distance_matrix(kind).unwrap();
            assert_eq!((m.len(), m.get(0, 0)), (1, 0.0));
            let e = crate::mds::embed_distance_matrix(&m, &crate::mds::MdsConfig::default()).unwrap();
            assert_eq!(e.points.len(), 1);
        }
    }
}
