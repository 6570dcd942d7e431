//! Gaussian-mixture domains.
//!
//! Class prototypes sit evenly on a circle. A domain rotates the prototypes,
//! shifts them, and flips a fraction of labels to another class.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{derive_seed, BenchError};

/// Flat feature matrix plus labels.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub dim: usize,
    pub x: Vec<f64>,
    pub y: Vec<u32>,
}

impl Dataset {
    pub fn empty(dim: usize) -> Self {
        Self { dim, x: Vec::new(), y: Vec::new() }
    }

    pub fn push(&mut self, x: &[f64], y: u32) {
        assert_eq!(x.len(), self.dim);
        self.x.extend_from_slice(x);
        self.y.push(y);
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.x[i * self.dim..(i + 1) * self.dim]
    }

    pub fn concat<'a>(dim: usize, parts: impl IntoIterator<Item = &'a Dataset>) -> Self {
        let mut out = Self::empty(dim);
        for p in parts {
            out.x.extend_from_slice(&p.x);
            out.y.extend_from_slice(&p.y);
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainTransform {
    pub rotation_deg: f64,
    pub shift: [f64; 2],
    pub label_noise: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PointsPerSplit {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DomainSpec {
    pub n_classes: usize,
    /// With one prototype per class the prototypes sit evenly on a circle of
    /// this radius; with more they are scattered uniformly in the square of
    /// half-width `prototype_radius`.
    pub prototype_radius: f64,
    pub prototypes_per_class: usize,
    pub cluster_std: f64,
    pub points: PointsPerSplit,
    /// One entry per domain.
    pub domains: Vec<DomainTransform>,
    pub seed: u64,
}

impl Default for DomainSpec {
    fn default() -> Self {
        let t = |rotation_deg, shift, label_noise| DomainTransform { rotation_deg, shift, label_noise };
        Self {
            n_classes: 4,
            prototype_radius: 3.0,
            prototypes_per_class: 3,
            cluster_std: 0.6,
            points: PointsPerSplit { train: 250, val: 500, test: 300 },
            domains: vec![
                t(0.0, [0.0, 0.0], 0.05),
                t(25.0, [0.4, -0.2], 0.08),
                t(-30.0, [-0.3, 0.5], 0.05),
                t(55.0, [0.6, 0.6], 0.10),
            ],
            seed: 2024,
        }
    }
}

impl DomainSpec {
    pub fn n_domains(&self) -> usize {
        self.domains.len()
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let p = self.points;
        if self.n_classes < 2 || self.prototypes_per_class == 0 {
            return Err(BenchError::Degenerate(format!("{} classes", self.n_classes)));
        }
        if self.domains.len() < 2 {
            return Err(BenchError::Degenerate("need at least 2 domains".into()));
        }
        if p.train == 0 || p.val == 0 || p.test == 0 {
            return Err(BenchError::Degenerate("zero points in a split".into()));
        }
        let bad_noise = self.domains.iter().any(|d| !(0.0..=1.0).contains(&d.label_noise));
        if bad_noise || !(self.cluster_std >= 0.0) || !self.prototype_radius.is_finite() {
            return Err(BenchError::Degenerate("noise rate or cluster scale out of range".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DomainData {
    pub train: Dataset,
    pub val: Dataset,
    pub test: Dataset,
}

/// The three splits a population sees.
#[derive(Clone, Debug, PartialEq)]
pub struct Splits {
    /// Pooled training data of the ID domains.
    pub train: Dataset,
    pub id_val: Dataset,
    /// Test split of the held-out domain.
    pub ood_test: Dataset,
}

const SPLIT_TRAIN: u64 = 0;
const SPLIT_VAL: u64 = 1;
const SPLIT_TEST: u64 = 2;

const PROTOTYPES: u64 = u64::MAX;

/// Cluster centres shared by every domain, indexed `[class][k]`.
pub fn prototypes(spec: &DomainSpec) -> Vec<Vec<[f64; 2]>> {
    let c = spec.n_classes;
    let r = spec.prototype_radius;
    if spec.prototypes_per_class == 1 {
        return (0..c)
            .map(|k| {
                let angle = std::f64::consts::TAU * k as f64 / c as f64;
                vec![[r * angle.cos(), r * angle.sin()]]
            })
            .collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, &[PROTOTYPES]));
    (0..c)
        .map(|_| (0..spec.prototypes_per_class).map(|_| [rng.random_range(-r..=r), rng.random_range(-r..=r)]).collect())
        .collect()
}

fn sample(spec: &DomainSpec, protos: &[Vec<[f64; 2]>], t: &DomainTransform, n: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = spec.n_classes;
    let (sin, cos) = t.rotation_deg.to_radians().sin_cos();
    let mut out = Dataset::empty(2);
    for i in 0..n {
        let label = (i % c) as u32;
        let options = &protos[label as usize];
        let [cx, cy] = options[rng.random_range(0..options.len())];
        let px = cx + spec.cluster_std * rng.sample::<f64, _>(StandardNormal);
        let py = cy + spec.cluster_std * rng.sample::<f64, _>(StandardNormal);
        let x = cos * px - sin * py + t.shift[0];
        let y = sin * px + cos * py + t.shift[1];
        let noisy = rng.random_bool(t.label_noise);
        let label = if noisy { (label + rng.random_range(1..c as u32)) % c as u32 } else { label };
        out.push(&[x, y], label);
    }
    out
}

/// Deterministic in `spec` alone.
pub fn generate_domains(spec: &DomainSpec) -> Result<Vec<DomainData>, BenchError> {
    spec.validate()?;
    let protos = prototypes(spec);
    Ok(spec
        .domains
        .iter()
        .enumerate()
        .map(|(d, t)| {
            let seed = |split| derive_seed(spec.seed, &[d as u64, split]);
            DomainData {
                train: sample(spec, &protos, t, spec.points.train, seed(SPLIT_TRAIN)),
                val: sample(spec, &protos, t, spec.points.val, seed(SPLIT_VAL)),
                test: sample(spec, &protos, t, spec.points.test, seed(SPLIT_TEST)),
            }
        })
        .collect())
}

pub fn splits(domains: &[DomainData], held_out: usize) -> Result<Splits, BenchError> {
    if held_out >= domains.len() {
        return Err(BenchError::Degenerate(format!("held-out domain {held_out} of {}", domains.len())));
    }
    let id = || domains.iter().enumerate().filter(|(d, _)| *d != held_out).map(|(_, data)| data);
    Ok(Splits {
        train: Dataset::concat(2, id().map(|d| &d.train)),
        id_val: Dataset::concat(2, id().map(|d| &d.val)),
        ood_test: domains[held_out].test.clone(),
    })
}
