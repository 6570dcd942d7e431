//! Small hand-checkable evaluators for exercising the selection algorithms
//! without training anything.

use std::collections::BTreeMap;
use std::error::Error as StdError;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Evaluator;
use crate::store::{average_weights, Bundle, CorrectBits, CorrectnessRecord, Manifest, ModelEntry, SplitSizes, WeightVector};

type EvalResult = Result<CorrectnessRecord, Box<dyn StdError + Send + Sync>>;
type TableFn = dyn Fn(&[u32]) -> CorrectnessRecord + Send + Sync;

/// Correctness as an arbitrary function of the ingredient set.
///
/// Paired with [`one_hot_bundle`], model `i` has weight vector `e_i`, so any
/// WA's support identifies its ingredient set exactly.
#[derive(Clone)]
pub struct SetTable {
    n: usize,
    table: Arc<TableFn>,
}

impl SetTable {
    pub fn new<F>(n: usize, table: F) -> Self
    where
        F: Fn(&[u32]) -> CorrectnessRecord + Send + Sync + 'static,
    {
        Self { n, table: Arc::new(table) }
    }

    /// Every ingredient set gets pseudo-random correctness on `len` examples
    /// per split, derived from `(seed, set)`.
    pub fn random(n: usize, len: usize, seed: u64) -> Self {
        Self::new(n, move |set| {
            let mut key = seed ^ 0x9E37_79B9_7F4A_7C15;
            for &id in set {
                key = key.rotate_left(7) ^ u64::from(id).wrapping_mul(0xBF58_476D_1CE4_E5B9);
            }
            let mut rng = ChaCha8Rng::seed_from_u64(key);
            let p = rng.random_range(0.3..0.9);
            CorrectnessRecord {
                id_val: CorrectBits::from_bools((0..len).map(|_| rng.random_bool(p))),
                ood_test: CorrectBits::from_bools((0..len).map(|_| rng.random_bool(p * 0.8))),
            }
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Correctness of the WA of `set` (ids ascending).
    pub fn record(&self, set: &[u32]) -> CorrectnessRecord {
        (self.table)(set)
    }
}

impl Evaluator for SetTable {
    fn evaluate(&self, weights: &WeightVector) -> EvalResult {
        let set: Vec<u32> = weights
            .as_slice()
            .iter()
            .enumerate()
            .filter(|(_, &w)| w > 0.0)
            .map(|(i, _)| i as u32 + 1)
            .collect();
        if set.is_empty() {
            return Err("weight vector has empty support".into());
        }
        Ok(self.record(&set))
    }
}

/// Bundle of `table.len()` models with one-hot weights.
pub fn one_hot_bundle(table: &SetTable) -> Bundle {
    let n = table.len();
    let first = table.record(&[1]);
    let sizes = SplitSizes { id_val: first.id_val.len(), ood_test: first.ood_test.len() };
    let models = (1..=n as u32)
        .map(|id| {
            let mut w = vec![0.0f32; n];
            w[id as usize - 1] = 1.0;
            ModelEntry::new(id, WeightVector::new(w).unwrap(), table.record(&[id]), BTreeMap::new())
        })
        .collect();
    Bundle { manifest: Manifest::new(n.max(1), sizes), models }
}

/// Table lookup for bundles with arbitrary weights: the WA is matched
/// against every subset average (canonical order), so keep `n` small.
pub struct PositionTable {
    subsets: Vec<(WeightVector, Vec<u32>)>,
    table: SetTable,
}

impl PositionTable {
    pub fn new(bundle: &Bundle, table: SetTable) -> Self {
        let n = bundle.models.len();
        assert!(n <= 12, "subset enumeration is exponential");
        let subsets = (1u32..(1 << n))
            .map(|mask| {
                let members: Vec<&ModelEntry> =
                    bundle.models.iter().enumerate().filter(|(i, _)| mask & (1 << i) != 0).map(|(_, m)| m).collect();
                let ids = members.iter().map(|m| m.id).collect();
                (average_weights(members.iter().map(|m| &m.weights)).unwrap(), ids)
            })
            .collect();
        Self { subsets, table }
    }
}

impl Evaluator for PositionTable {
    fn evaluate(&self, weights: &WeightVector) -> EvalResult {
        let (_, ids) = self
            .subsets
            .iter()
            .find(|(w, _)| w == weights)
            .ok_or("weight vector is not an average of bundle members")?;
        Ok(self.table.record(ids))
    }
}

/// Linear classifier `label = [w · x > 0]` over fixed point sets.
#[derive(Clone, Debug)]
pub struct LinearToy {
    pub id_points: Vec<(Vec<f32>, bool)>,
    pub ood_points: Vec<(Vec<f32>, bool)>,
}

impl LinearToy {
    /// Labels come from a random reference direction; the OOD split uses a
    /// rotated reference.
    pub fn random(dim: usize, n_points: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let reference: Vec<f32> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut shifted = reference.clone();
        shifted.rotate_left(1);
        let sample = |r: &[f32], rng: &mut ChaCha8Rng| {
            (0..n_points)
                .map(|_| {
                    let x: Vec<f32> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
                    let label = dot(r, &x) > 0.0;
                    (x, label)
                })
                .collect::<Vec<_>>()
        };
        let id_points = sample(&reference, &mut rng);
        let ood_points = sample(&shifted, &mut rng);
        Self { id_points, ood_points }
    }

    fn split(points: &[(Vec<f32>, bool)], w: &[f32]) -> CorrectBits {
        CorrectBits::from_bools(points.iter().map(|(x, y)| (dot(w, x) > 0.0) == *y))
    }
}

fn dot(a: &[f32], b: &[f32]) -> f32 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl Evaluator for LinearToy {
    fn evaluate(&self, weights: &WeightVector) -> EvalResult {
        let w = weights.as_slice();
        if self.id_points.first().is_some_and(|(x, _)| x.len() != w.len()) {
            return Err(format!("expected {} weights, got {}", self.id_points[0].0.len(), w.len()).into());
        }
        Ok(CorrectnessRecord { id_val: Self::split(&self.id_points, w), ood_test: Self::split(&self.ood_points, w) })
    }
}

/// The four-point example: `(1,0)`, `(0,1)` labelled 1, `(-1,0)`, `(0,-1)`
/// labelled 0 in-distribution; labels flipped out of distribution.
pub fn linear_evaluator() -> LinearToy {
    let pts = [(vec![1.0, 0.0], true), (vec![0.0, 1.0], true), (vec![-1.0, 0.0], false), (vec![0.0, -1.0], false)];
    LinearToy {
        id_points: pts.to_vec(),
        ood_points: pts.iter().map(|(x, y)| (x.clone(), !y)).collect(),
    }
}

/// Micro-population for the toy linear evaluator: `n` perturbations of a
/// shared base vector.
pub fn linear_population(toy: &LinearToy, n: usize, seed: u64) -> Bundle {
    let dim = toy.id_points[0].0.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base: Vec<f32> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    let models = (1..=n as u32)
        .map(|id| {
            let scale = rng.random_range(0.2..1.5);
            let w: Vec<f32> = base.iter().map(|b| b + scale * rng.random_range(-1.0f32..1.0)).collect();
            let weights = WeightVector::new(w).unwrap();
            let correctness = toy.evaluate(&weights).unwrap();
            ModelEntry::new(id, weights, correctness, BTreeMap::new())
        })
        .collect();
    let sizes = SplitSizes { id_val: toy.id_points.len(), ood_test: toy.ood_points.len() };
    Bundle { manifest: Manifest::new(dim, sizes), models }
}
