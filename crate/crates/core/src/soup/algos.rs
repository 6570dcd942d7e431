use rayon::prelude::*;

use super::{
    Acceptance, Algorithm, CandidateDistance, CandidateEval, Evaluator, Iteration, RunLabel, SoupError,
    SoupTrajectory, WaSnapshot, TRAJECTORY_SCHEMA_VERSION,
};
use crate::metrics::{euclidean_sq, ratio_error, DistanceKind};
use crate::store::{average_weights, Bundle, CorrectnessRecord, ModelEntry, WeightVector};

/// The WA currently being grown.
struct CurrentWa {
    weights: WeightVector,
    snapshot: WaSnapshot,
}

struct Evaluated {
    eval: CandidateEval,
    weights: WeightVector,
    correctness: CorrectnessRecord,
}

fn average_of(models: &[&ModelEntry]) -> Result<WeightVector, SoupError> {
    // canonical (ascending id) order so a WA depends only on its ingredient set
    let mut sorted: Vec<&ModelEntry> = models.to_vec();
    sorted.sort_by_key(|m| m.id);
    Ok(average_weights(sorted.iter().map(|m| &m.weights))?)
}

fn snapshot(mut ingredients: Vec<u32>, correctness: CorrectnessRecord) -> WaSnapshot {
    ingredients.sort_unstable();
    WaSnapshot {
        ingredients,
        id_val_accuracy: correctness.id_val.accuracy(),
        ood_accuracy: correctness.ood_test.accuracy(),
        correctness,
    }
}

fn evaluate(evaluator: &dyn Evaluator, weights: &WeightVector) -> Result<CorrectnessRecord, SoupError> {
    evaluator.evaluate(weights).map_err(SoupError::Evaluator)
}

fn distance_to(current: &CurrentWa, candidate: &ModelEntry) -> Result<CandidateDistance, SoupError> {
    Ok(CandidateDistance {
        id: candidate.id,
        diversity: ratio_error(&current.snapshot.correctness.id_val, &candidate.correctness.id_val)?,
        euclidean: euclidean_sq(&current.weights, &candidate.weights)?,
    })
}

fn evaluate_against(
    current: &CurrentWa,
    ingredients: &[&ModelEntry],
    candidate: &ModelEntry,
    evaluator: &dyn Evaluator,
) -> Result<Evaluated, SoupError> {
    if ingredients.iter().any(|m| m.id == candidate.id) {
        return Err(SoupError::AlreadyIngredient(candidate.id));
    }
    let mut members = ingredients.to_vec();
    members.push(candidate);
    let weights = average_of(&members)?;
    let correctness = evaluate(evaluator, &weights)?;
    let eval = CandidateEval {
        candidate_id: candidate.id,
        wa_id_val_accuracy: correctness.id_val.accuracy(),
        wa_ood_accuracy: correctness.ood_test.accuracy(),
        distance_to_current_wa: distance_to(current, candidate)?,
    };
    Ok(Evaluated { eval, weights, correctness })
}

/// Evaluates the WA of `ingredients ∪ {candidate}` and the candidate's
/// distances to the WA of `ingredients` alone.
pub fn evaluate_candidate(
    ingredients: &[&ModelEntry],
    candidate: &ModelEntry,
    evaluator: &dyn Evaluator,
) -> Result<CandidateEval, SoupError> {
    if ingredients.is_empty() {
        return Err(SoupError::Store(crate::store::StoreError::EmptyIngredients));
    }
    let weights = average_of(ingredients)?;
    let correctness = evaluate(evaluator, &weights)?;
    let current = CurrentWa {
        weights,
        snapshot: snapshot(ingredients.iter().map(|m| m.id).collect(), correctness),
    };
    Ok(evaluate_against(&current, ingredients, candidate, evaluator)?.eval)
}

/// Models by decreasing ID-val accuracy, ties to the lower id.
fn accuracy_order(bundle: &Bundle) -> Vec<&ModelEntry> {
    let mut order: Vec<&ModelEntry> = bundle.models.iter().collect();
    order.sort_by(|a, b| b.id_val_accuracy.total_cmp(&a.id_val_accuracy).then(a.id.cmp(&b.id)));
    order
}

struct Run<'a> {
    evaluator: &'a dyn Evaluator,
    ingredients: Vec<&'a ModelEntry>,
    current: CurrentWa,
    trajectory: SoupTrajectory,
}

impl<'a> Run<'a> {
    fn start(
        bundle: &'a Bundle,
        evaluator: &'a dyn Evaluator,
        algorithm: Algorithm,
        acceptance: Acceptance,
    ) -> Result<(Self, Vec<&'a ModelEntry>), SoupError> {
        let order = accuracy_order(bundle);
        let top = *order.first().ok_or(SoupError::EmptyBundle)?;
        let correctness = evaluate(evaluator, &top.weights)?;
        let current = CurrentWa { weights: top.weights.clone(), snapshot: snapshot(vec![top.id], correctness) };
        let trajectory = SoupTrajectory {
            schema_version: TRAJECTORY_SCHEMA_VERSION,
            algorithm,
            acceptance,
            run: RunLabel {
                trial: bundle.manifest.trial,
                environment: bundle.manifest.environment,
                config_hash: bundle.manifest.config_hash.clone(),
            },
            initial_model_id: top.id,
            initial: current.snapshot.clone(),
            iterations: Vec::new(),
            terminated_at: 1,
            discarded_ids: Vec::new(),
        };
        let run = Run { evaluator, ingredients: vec![top], current, trajectory };
        Ok((run, order[1..].to_vec()))
    }

    fn t(&self) -> usize {
        self.ingredients.len()
    }

    fn open_iteration(&self, remaining: &[&ModelEntry]) -> Result<Iteration, SoupError> {
        let distances = remaining.iter().map(|m| distance_to(&self.current, m)).collect::<Result<_, _>>()?;
        Ok(Iteration {
            t: self.trajectory.iterations.len() + 1,
            remaining_ids_before: remaining.iter().map(|m| m.id).collect(),
            distances,
            evals: Vec::new(),
            selected_id: None,
            wa_after: None,
        })
    }

    fn evaluate(&self, candidate: &ModelEntry) -> Result<Evaluated, SoupError> {
        evaluate_against(&self.current, &self.ingredients, candidate, self.evaluator)
    }

    fn passes(&self, eval: &CandidateEval) -> bool {
        self.trajectory
            .acceptance
            .passes(eval.wa_id_val_accuracy, self.current.snapshot.id_val_accuracy)
    }

    fn accept(&mut self, mut iteration: Iteration, model: &'a ModelEntry, evaluated: Evaluated) {
        self.ingredients.push(model);
        let snap = snapshot(self.ingredients.iter().map(|m| m.id).collect(), evaluated.correctness);
        iteration.selected_id = Some(model.id);
        iteration.wa_after = Some(snap.clone());
        self.trajectory.iterations.push(iteration);
        self.current = CurrentWa { weights: evaluated.weights, snapshot: snap };
    }

    fn finish(mut self) -> SoupTrajectory {
        self.trajectory.terminated_at = self.t();
        self.trajectory
    }
}

/// Single pass in decreasing-accuracy order; rejected candidates are discarded.
pub fn run_greedy(
    bundle: &Bundle,
    evaluator: &dyn Evaluator,
    acceptance: Acceptance,
) -> Result<SoupTrajectory, SoupError> {
    let (mut run, pass) = Run::start(bundle, evaluator, Algorithm::Greedy, acceptance)?;
    let mut open: Option<Iteration> = None;
    for (pos, &candidate) in pass.iter().enumerate() {
        let mut iteration = match open.take() {
            Some(it) => it,
            None => run.open_iteration(&pass[pos..])?,
        };
        let evaluated = run.evaluate(candidate)?;
        iteration.evals.push(evaluated.eval);
        if run.passes(&evaluated.eval) {
            run.accept(iteration, candidate, evaluated);
        } else {
            run.trajectory.discarded_ids.push(candidate.id);
            open = Some(iteration);
        }
    }
    if let Some(iteration) = open {
        run.trajectory.iterations.push(iteration);
    }
    Ok(run.finish())
}

/// At each step evaluates every remaining candidate and keeps the best one
/// if it passes `acceptance`; ties go to the lowest id.
pub fn run_greedier(
    bundle: &Bundle,
    evaluator: &dyn Evaluator,
    acceptance: Acceptance,
) -> Result<SoupTrajectory, SoupError> {
    let (mut run, mut remaining) = Run::start(bundle, evaluator, Algorithm::Greedier, acceptance)?;
    remaining.sort_by_key(|m| m.id);
    while !remaining.is_empty() {
        let mut iteration = run.open_iteration(&remaining)?;
        let mut evaluated = remaining
            .par_iter()
            .map(|m| run.evaluate(m))
            .collect::<Result<Vec<_>, _>>()?;
        iteration.evals = evaluated.iter().map(|e| e.eval).collect();

        let mut best = 0;
        for (i, e) in evaluated.iter().enumerate().skip(1) {
            if e.eval.wa_id_val_accuracy > evaluated[best].eval.wa_id_val_accuracy {
                best = i;
            }
        }
        if run.passes(&evaluated[best].eval) {
            let model = remaining.remove(best);
            run.accept(iteration, model, evaluated.swap_remove(best));
        } else {
            run.trajectory.iterations.push(iteration);
            break;
        }
    }
    Ok(run.finish())
}

/// Candidates in decreasing distance from the current WA (infinite first,
/// ties to the lower id).
fn ranked_order(distances: &[CandidateDistance], kind: DistanceKind) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..distances.len()).collect();
    idx.sort_by(|&a, &b| {
        let (da, db) = (&distances[a], &distances[b]);
        db.get(kind).total_cmp(&da.get(kind)).then(da.id.cmp(&db.id))
    });
    idx
}

/// At each step walks the remaining pool by decreasing distance from the
/// current WA and accepts the first candidate that passes; rejected ones stay
/// in the pool.
pub fn run_ranked(
    bundle: &Bundle,
    evaluator: &dyn Evaluator,
    kind: DistanceKind,
    acceptance: Acceptance,
) -> Result<SoupTrajectory, SoupError> {
    let algorithm = match kind {
        DistanceKind::Diversity => Algorithm::RankedDiversity,
        DistanceKind::Euclidean => Algorithm::RankedEuclidean,
    };
    let (mut run, mut remaining) = Run::start(bundle, evaluator, algorithm, acceptance)?;
    remaining.sort_by_key(|m| m.id);
    while !remaining.is_empty() {
        let mut iteration = run.open_iteration(&remaining)?;
        let mut chosen = None;
        for pos in ranked_order(&iteration.distances, kind) {
            let evaluated = run.evaluate(remaining[pos])?;
            iteration.evals.push(evaluated.eval);
            if run.passes(&evaluated.eval) {
                chosen = Some((pos, evaluated));
                break;
            }
        }
        match chosen {
            Some((pos, evaluated)) => {
                let model = remaining.remove(pos);
                run.accept(iteration, model, evaluated);
            }
            None => {
                run.trajectory.iterations.push(iteration);
                break;
            }
        }
    }
    Ok(run.finish())
}

pub fn run(
    algorithm: Algorithm,
    bundle: &Bundle,
    evaluator: &dyn Evaluator,
    acceptance: Acceptance,
) -> Result<SoupTrajectory, SoupError> {
    match algorithm {
        Algorithm::Greedy => run_greedy(bundle, evaluator, acceptance),
        Algorithm::Greedier => run_greedier(bundle, evaluator, acceptance),
        Algorithm::RankedDiversity => run_ranked(bundle, evaluator, DistanceKind::Diversity, acceptance),
        Algorithm::RankedEuclidean => run_ranked(bundle, evaluator, DistanceKind::Euclidean, acceptance),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::soup::toy::{one_hot_bundle, SetTable};
    use crate::soup::verify_trajectory;
    use crate::store::{CorrectBits, WeightVector};

    fn acc_bits(correct: usize, total: usize) -> CorrectBits {
        CorrectBits::from_bools((0..total).map(|i| i < correct))
    }

    #[test]
    fn evaluate_identical_candidate_reproduces_accuracy() {
        let table = SetTable::new(2, |set| {
            let _ = set;
            CorrectnessRecord { id_val: acc_bits(3, 4), ood_test: acc_bits(1, 4) }
        });
        let theta = WeightVector::new(vec![0.3, -0.2]).unwrap();
        let m1 = ModelEntry::new(1, theta.clone(), table.record(&[1]), Default::default());
        let m2 = ModelEntry::new(2, theta.clone(), table.record(&[1]), Default::default());
        let linear = crate::soup::toy::linear_evaluator();
        let eval = evaluate_candidate(&[&m1], &m2, &linear).unwrap();
        let alone = linear.evaluate(&theta).unwrap();
        assert_eq!(eval.wa_id_val_accuracy, alone.id_val.accuracy());
        assert_eq!(eval.distance_to_current_wa.euclidean, 0.0);
    }

    #[test]
    fn evaluate_linear_model_by_hand() {
        // 4 points, label = 1 iff w.x > 0
        // points: (1,0)->1, (0,1)->1, (-1,0)->0, (0,-1)->0 ; ood mirrored labels
        let linear = crate::soup::toy::linear_evaluator();
        let a = WeightVector::new(vec![1.0, -3.0]).unwrap();
        let b = WeightVector::new(vec![1.0, 1.0]).unwrap();
        let ma = ModelEntry::new(1, a.clone(), linear.evaluate(&a).unwrap(), Default::default());
        let mb = ModelEntry::new(2, b.clone(), linear.evaluate(&b).unwrap(), Default::default());
        let eval = evaluate_candidate(&[&ma], &mb, &linear).unwrap();
        // WA = (1, -1): (1,0)->1 ok, (0,1)->0 wrong, (-1,0)->0 ok, (0,-1)->1 wrong => 2/4
        assert_eq!(eval.wa_id_val_accuracy, 0.5);
        // OOD labels are flipped => 2/4
        assert_eq!(eval.wa_ood_accuracy, 0.5);
        // distances against direct metric calls
        assert_eq!(eval.distance_to_current_wa.euclidean, euclidean_sq(&a, &b).unwrap());
        assert_eq!(
            eval.distance_to_current_wa.diversity,
            ratio_error(&ma.correctness.id_val, &mb.correctness.id_val).unwrap()
        );
    }

    #[test]
    fn evaluate_rejects_existing_ingredient() {
        let linear = crate::soup::toy::linear_evaluator();
        let a = WeightVector::new(vec![1.0, 0.0]).unwrap();
        let m = ModelEntry::new(1, a.clone(), linear.evaluate(&a).unwrap(), Default::default());
        assert!(matches!(evaluate_candidate(&[&m], &m, &linear), Err(SoupError::AlreadyIngredient(1))));
    }

    #[test]
    fn empty_bundle_is_an_error() {
        let table = SetTable::new(0, |_| CorrectnessRecord::default());
        let bundle = one_hot_bundle(&table);
        for algo in Algorithm::ALL {
            assert!(matches!(run(algo, &bundle, &table, Acceptance::Strict), Err(SoupError::EmptyBundle)));
        }
    }

    #[test]
    fn singleton_bundle_is_initialization_only() {
        let table = SetTable::new(1, |_| CorrectnessRecord { id_val: acc_bits(2, 3), ood_test: acc_bits(1, 3) });
        let bundle = one_hot_bundle(&table);
        for algo in Algorithm::ALL {
            let traj = run(algo, &bundle, &table, algo.default_acceptance()).unwrap();
            assert!(traj.iterations.is_empty());
            assert_eq!(traj.terminated_at, 1);
            assert_eq!(traj.final_wa().ingredients, vec![1]);
        }
    }

    /// Accuracy (out of 10) of each ingredient set, keyed by sorted ids.
    fn table_from(n: usize, scores: &'static [(&'static [u32], usize)]) -> SetTable {
        SetTable::new(n, move |set| {
            let score = scores.iter().find(|(s, _)| *s == set).map(|(_, v)| *v).unwrap_or(0);
            CorrectnessRecord { id_val: acc_bits(score, 10), ood_test: acc_bits(score / 2, 10) }
        })
    }

    #[test]
    fn greedy_hand_simulated_pass() {
        // individual accuracies 9 > 8 > 7; adding 2 hurts, adding 3 helps
        let table = table_from(3, &[(&[1], 9), (&[2], 8), (&[3], 7), (&[1, 2], 6), (&[1, 3], 10), (&[1, 2, 3], 5)]);
        let bundle = one_hot_bundle(&table);
        let traj = run_greedy(&bundle, &table, Acceptance::NonStrict).unwrap();
        assert_eq!(traj.final_wa().ingredients, vec![1, 3]);
        assert_eq!(traj.discarded_ids, vec![2]);
        assert_eq!(traj.iterations.len(), 1);
        let it = &traj.iterations[0];
        assert_eq!(it.remaining_ids_before, vec![2, 3]);
        assert_eq!(it.evals.iter().map(|e| e.candidate_id).collect::<Vec<_>>(), vec![2, 3]);
        assert_eq!(it.selected_id, Some(3));
        assert_eq!(traj.terminated_at, 2);
        assert!(verify_trajectory(&traj, &[1, 2, 3]).is_empty());
    }

    #[test]
    fn greedy_accepts_ties_on_identical_models() {
        let table = SetTable::new(4, |_| CorrectnessRecord { id_val: acc_bits(6, 10), ood_test: acc_bits(5, 10) });
        let bundle = one_hot_bundle(&table);
        let traj = run_greedy(&bundle, &table, Acceptance::NonStrict).unwrap();
        assert_eq!(traj.final_wa().ingredients, vec![1, 2, 3, 4]);
        let (id, _) = traj.accuracy_series();
        assert!(id.iter().all(|&a| a == 0.6));
    }

    #[test]
    fn greedier_terminates_when_everything_degrades() {
        let table = table_from(3, &[(&[1], 9), (&[2], 8), (&[3], 7), (&[1, 2], 8), (&[1, 3], 9)]);
        let bundle = one_hot_bundle(&table);
        let traj = run_greedier(&bundle, &table, Acceptance::Strict).unwrap();
        assert_eq!(traj.terminated_at, 1);
        assert_eq!(traj.final_wa().ingredients, vec![1]);
        assert_eq!(traj.iterations.len(), 1);
        assert_eq!(traj.iterations[0].selected_id, None);
        assert_eq!(traj.iterations[0].evals.len(), 2);
    }

    #[test]
    fn greedier_finds_pairing_greedy_cannot() {
        // model 2 is second best individually, but 1+4 is the best pair
        let table = table_from(
            4,
            &[
                (&[1], 7),
                (&[2], 6),
                (&[3], 5),
                (&[4], 4),
                (&[1, 2], 6),
                (&[1, 3], 8),
                (&[1, 4], 9),
                (&[1, 3, 4], 8),
                (&[1, 2, 4], 8),
            ],
        );
        let bundle = one_hot_bundle(&table);
        // exhaustive oracle over the three candidate WAs at step 1
        let oracle = [2u32, 3, 4]
            .into_iter()
            .max_by_key(|&c| {
                let mut set = vec![1, c];
                set.sort();
                (table.record(&set).id_val.count_correct(), std::cmp::Reverse(c))
            })
            .unwrap();
        assert_eq!(oracle, 4);
        let greedier = run_greedier(&bundle, &table, Acceptance::Strict).unwrap();
        assert_eq!(greedier.iterations[0].selected_id, Some(oracle));
        let greedy = run_greedy(&bundle, &table, Acceptance::NonStrict).unwrap();
        assert_ne!(greedy.accepted().next().and_then(|it| it.selected_id), Some(4));
        assert!(greedy.final_wa().id_val_accuracy < greedier.final_wa().id_val_accuracy);
    }

    #[test]
    fn greedier_selection_is_step_max() {
        let table = SetTable::random(7, 40, 17);
        let bundle = one_hot_bundle(&table);
        let traj = run_greedier(&bundle, &table, Acceptance::Strict).unwrap();
        for it in traj.accepted() {
            let max = it.evals.iter().map(|e| e.wa_id_val_accuracy).fold(f64::MIN, f64::max);
            assert_eq!(it.selected_eval().unwrap().wa_id_val_accuracy, max);
        }
    }

    #[test]
    fn ranked_only_candidate_is_selected() {
        let table = table_from(2, &[(&[1], 5), (&[2], 4), (&[1, 2], 7)]);
        let bundle = one_hot_bundle(&table);
        for kind in DistanceKind::ALL {
            let traj = run_ranked(&bundle, &table, kind, Acceptance::Strict).unwrap();
            assert_eq!(traj.iterations[0].selected_id, Some(2));
        }
    }

    #[test]
    fn ranked_stashes_rejected_candidates() {
        // one-hot weights put every model at the same distance, so place them
        // explicitly at squared distances 5, 3, 1 from model 1
        let table = table_from(
            4,
            &[(&[1], 9), (&[2], 8), (&[3], 7), (&[4], 6), (&[1, 2], 8), (&[1, 3], 10), (&[1, 2, 3], 10)],
        );
        let mut bundle = one_hot_bundle(&table);
        bundle.models[0].weights = WeightVector::new(vec![0.0, 0.0]).unwrap();
        bundle.models[1].weights = WeightVector::new(vec![5f32.sqrt(), 0.0]).unwrap();
        bundle.models[2].weights = WeightVector::new(vec![0.0, 3f32.sqrt()]).unwrap();
        bundle.models[3].weights = WeightVector::new(vec![-1.0, 0.0]).unwrap();
        bundle.manifest.dim = 2;
        // the table evaluator decodes sets from weights; use a position lookup instead
        let lookup = crate::soup::toy::PositionTable::new(&bundle, table);
        let traj = run_ranked(&bundle, &lookup, DistanceKind::Euclidean, Acceptance::Strict).unwrap();
        let first = &traj.iterations[0];
        let order: Vec<u32> = first.evals.iter().map(|e| e.candidate_id).collect();
        assert_eq!(order, vec![2, 3]);
        assert_eq!(first.selected_id, Some(3));
        let second = &traj.iterations[1];
        assert!(second.remaining_ids_before.contains(&2));
        assert!(verify_trajectory(&traj, &[1, 2, 3, 4]).is_empty());
    }

    #[test]
    fn ranked_kinds_can_disagree() {
        // diversity favours model 3, weight distance favours model 2
        let table = SetTable::new(3, |set| {
            let id_val = match set {
                [1] => CorrectBits::from_bools([true, true, true, true, false, false, true, true]),
                [2] => CorrectBits::from_bools([true, true, true, true, false, false, true, false]),
                [3] => CorrectBits::from_bools([false, false, true, true, true, false, true, true]),
                _ => CorrectBits::from_bools([true; 8]),
            };
            CorrectnessRecord { ood_test: id_val.clone(), id_val }
        });
        let mut bundle = one_hot_bundle(&table);
        let weights = [vec![0.0f32, 0.0], vec![4.0, 0.0], vec![0.0, 1.0]];
        for (m, w) in bundle.models.iter_mut().zip(weights) {
            m.weights = WeightVector::new(w).unwrap();
        }
        bundle.manifest.dim = 2;
        let lookup = crate::soup::toy::PositionTable::new(&bundle, table);
        let by_div = run_ranked(&bundle, &lookup, DistanceKind::Diversity, Acceptance::Strict).unwrap();
        let by_euc = run_ranked(&bundle, &lookup, DistanceKind::Euclidean, Acceptance::Strict).unwrap();
        assert_eq!(by_div.iterations[0].evals[0].candidate_id, 3);
        assert_eq!(by_euc.iterations[0].evals[0].candidate_id, 2);
        assert_ne!(by_div.iterations[0].selected_id, by_euc.iterations[0].selected_id);
    }

    #[test]
    fn runs_are_deterministic() {
        let table = SetTable::random(8, 50, 3);
        let bundle = one_hot_bundle(&table);
        for algo in Algorithm::ALL {
            let a = run(algo, &bundle, &table, Acceptance::Strict).unwrap();
            let b = run(algo, &bundle, &table, Acceptance::Strict).unwrap();
            assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        }
    }

    #[test]
    fn trajectory_json_round_trip_and_schema_check() {
        let table = SetTable::random(5, 30, 9);
        let bundle = one_hot_bundle(&table);
        let traj = run_greedier(&bundle, &table, Acceptance::Strict).unwrap();
        let text = traj.to_json().unwrap();
        assert_eq!(SoupTrajectory::from_json(&text).unwrap(), traj);
        let bumped = text.replacen("\"schema_version\": 1", "\"schema_version\": 99", 1);
        assert!(matches!(
            SoupTrajectory::from_json(&bumped),
            Err(SoupError::Schema { found: 99, expected: 1 })
        ));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]

            #[test]
            fn invariants_hold_on_random_tables(seed in any::<u64>(), n in 1usize..9, strict in any::<bool>()) {
                let table = SetTable::random(n, 24, seed);
                let bundle = one_hot_bundle(&table);
                let ids: Vec<u32> = (1..=n as u32).collect();
                let acceptance = if strict { Acceptance::Strict } else { Acceptance::NonStrict };
                for algo in Algorithm::ALL {
                    let traj = run(algo, &bundle, &table, acceptance).unwrap();
                    let violations = verify_trajectory(&traj, &ids);
                    prop_assert!(violations.is_empty(), "{algo}: {violations:?}");
                }
            }
        }
    }
}
