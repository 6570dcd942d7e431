//! Two-dimensional SMACOF embeddings of dissimilarity matrices and the
//! triangulated accuracy backdrop drawn under them.

mod delaunay;
mod pava;
mod points;

use std::fmt;

use nalgebra::{DMatrix, Matrix2, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bench::derive_seed;
use crate::metrics::{DistanceKind, DistanceMatrix};

pub use delaunay::{triangulated_backdrop, Triangulation, DUPLICATE_NUDGE};
pub use pava::{pava, pava_unit};
pub use points::{MdsNode, TrajectoryPoints};

pub type Point = [f64; 2];

#[derive(Debug, Error, PartialEq)]
pub enum MdsError {
    #[error("expected {expected} values, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("weight {0} is not positive")]
    BadWeight(f64),
    #[error("dissimilarity ({i}, {j}) = {value} is not allowed here")]
    BadEntry { i: usize, j: usize, value: f64 },
    #[error("dissimilarity matrix is not symmetric at ({i}, {j})")]
    NotSymmetric { i: usize, j: usize },
    #[error("diagonal entry {i} is not zero")]
    Diagonal { i: usize },
    #[error("degenerate configuration: {0}")]
    Degenerate(String),
    #[error("{0}")]
    Source(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MdsKind {
    Metric,
    Nonmetric,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MdsConfig {
    pub max_iters: usize,
    pub tol: f64,
    pub seed: u64,
    pub restarts: usize,
}

impl Default for MdsConfig {
    fn default() -> Self {
        Self { max_iters: 3000, tol: 1e-10, seed: 0, restarts: 4 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    pub points: Vec<Point>,
    /// Raw stress for metric runs, Kruskal stress-1 for non-metric ones.
    pub stress: f64,
    pub kind: MdsKind,
    pub iterations_used: usize,
    pub converged: bool,
    /// Objective after each iteration, starting with the initial
    /// configuration. Non-metric runs track raw stress against normalized
    /// disparities.
    pub stress_history: Vec<f64>,
    pub restart: usize,
}

impl Embedding {
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        dist(self.points[i], self.points[j])
    }

    /// Row-major n×n matrix of embedded distances.
    pub fn distances(&self) -> Vec<f64> {
        let n = self.points.len();
        (0..n * n).map(|k| self.distance(k / n, k % n)).collect()
    }

    /// Number of steps where the tracked objective went up by more than
    /// rounding (relative 1e-12).
    pub fn stress_increases(&self) -> usize {
        self.stress_history.windows(2).filter(|w| w[1] > w[0] + 1e-12 * w[0].max(f64::MIN_POSITIVE)).count()
    }
}

fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Checks shape, symmetry, diagonal and sign. Positive infinity passes only
/// when `allow_inf`.
fn validate(delta: &[f64], n: usize, allow_inf: bool) -> Result<(), MdsError> {
    if delta.len() != n * n {
        return Err(MdsError::LengthMismatch { expected: n * n, found: delta.len() });
    }
    for i in 0..n {
        if delta[i * n + i] != 0.0 {
            return Err(MdsError::Diagonal { i });
        }
        for j in i + 1..n {
            let (a, b) = (delta[i * n + j], delta[j * n + i]);
            let ok = |v: f64| v >= 0.0 && (v.is_finite() || (allow_inf && v == f64::INFINITY));
            if !ok(a) {
                return Err(MdsError::BadEntry { i, j, value: a });
            }
            if !ok(b) {
                return Err(MdsError::BadEntry { i: j, j: i, value: b });
            }
            let same = a == b || (a - b).abs() <= 1e-9 * a.abs().max(b.abs());
            if !same {
                return Err(MdsError::NotSymmetric { i, j });
            }
        }
    }
    Ok(())
}

fn pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |i| (i + 1..n).map(move |j| (i, j)))
}

fn raw_stress(x: &[Point], targets: &[f64]) -> f64 {
    let n = x.len();
    pairs(n).zip(targets).map(|((i, j), t)| (dist(x[i], x[j]) - t).powi(2)).sum()
}

/// Guttman transform with unit weights; `targets` lists pairs i<j in order.
fn guttman(x: &[Point], targets: &[f64]) -> Vec<Point> {
    let n = x.len();
    let mut out = vec![[0.0; 2]; n];
    for ((i, j), &t) in pairs(n).zip(targets) {
        let d = dist(x[i], x[j]);
        if d <= 0.0 {
            continue;
        }
        let r = t / d;
        for k in 0..2 {
            let v = r * (x[i][k] - x[j][k]);
            out[i][k] += v;
            out[j][k] -= v;
        }
    }
    for p in &mut out {
        p[0] /= n as f64;
        p[1] /= n as f64;
    }
    out
}

/// Classical scaling: top two eigenvectors of the double-centred squared
/// dissimilarities.
fn torgerson(delta: &[f64], n: usize) -> Vec<Point> {
    if n == 0 {
        return Vec::new();
    }
    let sq = DMatrix::from_fn(n, n, |i, j| delta[i * n + j].powi(2));
    let row: Vec<f64> = (0..n).map(|i| sq.row(i).mean()).collect();
    let all = sq.mean();
    let b = DMatrix::from_fn(n, n, |i, j| -0.5 * (sq[(i, j)] - row[i] - row[j] + all));
    let eig = SymmetricEigen::new(b);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let mut x = vec![[0.0; 2]; n];
    for (k, &col) in order.iter().take(2).enumerate() {
        let s = eig.eigenvalues[col].max(0.0).sqrt();
        for (i, p) in x.iter_mut().enumerate() {
            p[k] = s * eig.eigenvectors[(i, col)];
        }
    }
    x
}

fn random_start(n: usize, scale: f64, seed: u64) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| [rng.random_range(-scale..=scale), rng.random_range(-scale..=scale)]).collect()
}

/// Stress below this fraction of Σ target² is rounding noise.
const ZERO_STRESS: f64 = 1e-20;

fn relative_drop(prev: f64, cur: f64) -> f64 {
    if prev <= 0.0 {
        0.0
    } else {
        (prev - cur) / prev
    }
}

fn best_of(runs: Vec<Embedding>) -> Embedding {
    // runs arrive in restart order; strict comparison keeps the lowest index on ties
    runs.into_iter().reduce(|best, e| if e.stress < best.stress { e } else { best }).expect("at least one restart")
}

fn restart_seed(cfg: &MdsConfig, restart: usize) -> u64 {
    derive_seed(cfg.seed, &[restart as u64])
}

fn metric_run(delta: &[f64], n: usize, targets: &[f64], cfg: &MdsConfig, restart: usize) -> Embedding {
    let mut x = if restart == 0 {
        torgerson(delta, n)
    } else {
        let scale = targets.iter().sum::<f64>() / targets.len().max(1) as f64;
        random_start(n, scale.max(1e-12), restart_seed(cfg, restart))
    };
    let floor = ZERO_STRESS * targets.iter().map(|t| t * t).sum::<f64>();
    let mut history = vec![raw_stress(&x, targets)];
    let mut converged = history[0] <= floor;
    let mut iters = 0;
    while !converged && iters < cfg.max_iters {
        x = guttman(&x, targets);
        iters += 1;
        let s = raw_stress(&x, targets);
        let prev = *history.last().unwrap();
        history.push(s);
        converged = s <= floor || relative_drop(prev, s) < cfg.tol;
    }
    Embedding {
        points: x,
        stress: *history.last().unwrap(),
        kind: MdsKind::Metric,
        iterations_used: iters,
        converged,
        stress_history: history,
        restart,
    }
}

/// Metric SMACOF on raw stress. Restart 0 starts from classical scaling,
/// the rest from seeded uniform configurations; the lowest stress wins.
pub fn smacof_metric(delta: &[f64], n: usize, cfg: &MdsConfig) -> Result<Embedding, MdsError> {
    validate(delta, n, false)?;
    let targets: Vec<f64> = pairs(n).map(|(i, j)| delta[i * n + j]).collect();
    let runs = (0..cfg.restarts.max(1)).into_par_iter().map(|r| metric_run(delta, n, &targets, cfg, r)).collect();
    Ok(best_of(runs))
}

/// Disparities for the current configuration: pairs ordered by rank, ties
/// ordered by current distance, fitted monotonically.
fn disparities(d: &[f64], order: &[usize], blocks: &[(usize, usize)]) -> Vec<f64> {
    let mut idx = order.to_vec();
    for &(a, b) in blocks {
        idx[a..b].sort_by(|&p, &q| d[p].total_cmp(&d[q]).then(p.cmp(&q)));
    }
    let sorted: Vec<f64> = idx.iter().map(|&k| d[k]).collect();
    let fit = pava_unit(&sorted);
    let mut out = vec![0.0; d.len()];
    for (&k, v) in idx.iter().zip(fit) {
        out[k] = v;
    }
    out
}

fn normalize(dhat: &mut [f64]) -> bool {
    let ss: f64 = dhat.iter().map(|v| v * v).sum();
    if ss <= 0.0 {
        return false;
    }
    let s = (dhat.len() as f64 / ss).sqrt();
    dhat.iter_mut().for_each(|v| *v *= s);
    true
}

fn pair_distances(x: &[Point]) -> Vec<f64> {
    pairs(x.len()).map(|(i, j)| dist(x[i], x[j])).collect()
}

fn stress1(d: &[f64], dhat: &[f64]) -> f64 {
    let num: f64 = d.iter().zip(dhat).map(|(a, b)| (a - b).powi(2)).sum();
    let den: f64 = d.iter().map(|a| a * a).sum();
    if den > 0.0 {
        (num / den).sqrt()
    } else {
        0.0
    }
}

/// Square matrix of mid-ranks of the pair dissimilarities.
fn rank_image(n: usize, order: &[usize], blocks: &[(usize, usize)]) -> Vec<f64> {
    let mut rank = vec![0.0; order.len()];
    for (pos, &k) in order.iter().enumerate() {
        rank[k] = pos as f64 + 1.0;
    }
    for &(a, b) in blocks {
        let mid = (a + b + 1) as f64 / 2.0;
        order[a..b].iter().for_each(|&k| rank[k] = mid);
    }
    let mut m = vec![0.0; n * n];
    for ((i, j), r) in pairs(n).zip(rank) {
        m[i * n + j] = r;
        m[j * n + i] = r;
    }
    m
}

fn nonmetric_run(n: usize, order: &[usize], blocks: &[(usize, usize)], cfg: &MdsConfig, restart: usize) -> Embedding {
    let mut x = if restart == 0 {
        torgerson(&rank_image(n, order, blocks), n)
    } else {
        random_start(n, 1.0, restart_seed(cfg, restart))
    };
    let mut dhat = disparities(&pair_distances(&x), order, blocks);
    let mut history = Vec::new();
    let mut converged = !normalize(&mut dhat);
    // disparities are scaled to Σ d̂² = number of pairs
    let floor = ZERO_STRESS * dhat.len() as f64;
    let mut iters = 0;
    if !converged {
        history.push(raw_stress(&x, &dhat));
        converged = history[0] <= floor;
    }
    while !converged && iters < cfg.max_iters {
        x = guttman(&x, &dhat);
        iters += 1;
        let fresh = disparities(&pair_distances(&x), order, blocks);
        let prev = *history.last().unwrap();
        let mut next = fresh;
        if !normalize(&mut next) {
            break;
        }
        dhat = next;
        let s = raw_stress(&x, &dhat);
        history.push(s);
        converged = s <= floor || relative_drop(prev, s) < cfg.tol;
    }
    let d = pair_distances(&x);
    let fit = disparities(&d, order, blocks);
    Embedding {
        points: x,
        stress: stress1(&d, &fit),
        kind: MdsKind::Nonmetric,
        iterations_used: iters,
        converged,
        stress_history: history,
        restart,
    }
}

/// Non-metric SMACOF (Kruskal, primary ties). Only the rank order of the
/// dissimilarities is used; `+inf` ranks above everything finite. Restart 0
/// starts from classical scaling of the ranks, the rest from seeded uniform
/// configurations.
pub fn smacof_nonmetric(delta: &[f64], n: usize, cfg: &MdsConfig) -> Result<Embedding, MdsError> {
    validate(delta, n, true)?;
    let mut vals: Vec<f64> = pairs(n).map(|(i, j)| delta[i * n + j]).collect();
    let max_finite = vals.iter().copied().filter(|v| v.is_finite()).fold(0.0, f64::max);
    let sentinel = if max_finite > 0.0 { 1.5 * max_finite } else { 1.0 };
    vals.iter_mut().filter(|v| v.is_infinite()).for_each(|v| *v = sentinel);

    let mut order: Vec<usize> = (0..vals.len()).collect();
    order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]).then(a.cmp(&b)));
    let mut blocks = Vec::new();
    let mut start = 0;
    for k in 1..=order.len() {
        if k == order.len() || vals[order[k]] != vals[order[start]] {
            if k - start > 1 {
                blocks.push((start, k));
            }
            start = k;
        }
    }
    let runs = (0..cfg.restarts.max(1)).into_par_iter().map(|r| nonmetric_run(n, &order, &blocks, cfg, r)).collect();
    Ok(best_of(runs))
}

/// Embeds a distance matrix with the variant suited to its kind: squared
/// Euclidean distances are square-rooted and scaled metrically, ratio-error
/// diversity is scaled by rank.
pub fn embed_distance_matrix(m: &DistanceMatrix, cfg: &MdsConfig) -> Result<Embedding, MdsError> {
    match m.kind() {
        DistanceKind::Euclidean => {
            let roots: Vec<f64> = m.entries().iter().map(|v| v.sqrt()).collect();
            smacof_metric(&roots, m.len(), cfg)
        }
        DistanceKind::Diversity => smacof_nonmetric(m.entries(), m.len(), cfg),
    }
}

/// Root-mean-square residual between two configurations after the best
/// rotation/reflection and translation of `b` onto `a`.
pub fn procrustes_rms(a: &[Point], b: &[Point]) -> f64 {
    assert_eq!(a.len(), b.len(), "configurations differ in size");
    let n = a.len();
    if n == 0 {
        return 0.0;
    }
    let centroid = |x: &[Point]| {
        let s = x.iter().fold([0.0, 0.0], |acc, p| [acc[0] + p[0], acc[1] + p[1]]);
        [s[0] / n as f64, s[1] / n as f64]
    };
    let (ca, cb) = (centroid(a), centroid(b));
    let mut cross = Matrix2::<f64>::zeros();
    for (p, q) in a.iter().zip(b) {
        for r in 0..2 {
            for c in 0..2 {
                cross[(r, c)] += (q[r] - cb[r]) * (p[c] - ca[c]);
            }
        }
    }
    let svd = cross.svd(true, true);
    let rot = svd.u.unwrap() * svd.v_t.unwrap();
    let ss: f64 = a
        .iter()
        .zip(b)
        .map(|(p, q)| {
            let v = nalgebra::RowVector2::new(q[0] - cb[0], q[1] - cb[1]) * rot;
            (v[0] - (p[0] - ca[0])).powi(2) + (v[1] - (p[1] - ca[1])).powi(2)
        })
        .sum();
    (ss / n as f64).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PointRole {
    #[serde(rename = "ingredient")]
    Ingredient,
    #[serde(rename = "candidate-WA")]
    CandidateWa,
    #[serde(rename = "current-WA")]
    CurrentWa,
    #[serde(rename = "past-WA")]
    PastWa,
}

impl PointRole {
    pub fn name(self) -> &'static str {
        match self {
            Self::Ingredient => "ingredient",
            Self::CandidateWa => "candidate-WA",
            Self::CurrentWa => "current-WA",
            Self::PastWa => "past-WA",
        }
    }
}

impl fmt::Display for PointRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledPoint {
    pub id: String,
    pub x: f64,
    pub y: f64,
    pub accuracy: f64,
    pub role: PointRole,
}

pub fn labeled_points_csv(points: &[LabeledPoint]) -> String {
    let mut out = String::from("id,x,y,accuracy,role\n");
    for p in points {
        out.push_str(&format!("{},{},{},{},{}\n", p.id, p.x, p.y, p.accuracy, p.role));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{prop_assert, prop_assert_eq, proptest, ProptestConfig};

    fn distances_of(points: &[Point]) -> Vec<f64> {
        let n = points.len();
        (0..n * n).map(|k| dist(points[k / n], points[k % n])).collect()
    }

    fn random_points(n: usize, seed: u64) -> Vec<Point> {
        random_start(n, 5.0, seed)
    }

    #[test]
    fn equilateral_triangle() {
        let delta = [0.0, 1.0, 1.0, 1.0, 0.0, 1.0, 1.0, 1.0, 0.0];
        let e = smacof_metric(&delta, 3, &MdsConfig::default()).unwrap();
        assert!(e.stress < 1e-10, "stress {}", e.stress);
        for (i, j) in pairs(3) {
            assert!((e.distance(i, j) - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn two_points_exact() {
        let delta = [0.0, 3.25, 3.25, 0.0];
        let e = smacof_metric(&delta, 2, &MdsConfig::default()).unwrap();
        assert!((e.distance(0, 1) - 3.25).abs() < 1e-12);
    }

    #[test]
    fn trivial_sizes() {
        assert!(smacof_metric(&[], 0, &MdsConfig::default()).unwrap().points.is_empty());
        let e = smacof_nonmetric(&[0.0], 1, &MdsConfig::default()).unwrap();
        assert_eq!(e.points.len(), 1);
        assert_eq!(e.stress, 0.0);
    }

    #[test]
    fn planar_sets_round_trip() {
        for seed in 0..50 {
            let n = 4 + (seed as usize % 12);
            let truth = random_points(n, 1000 + seed);
            let e = smacof_metric(&distances_of(&truth), n, &MdsConfig::default()).unwrap();
            let rms = procrustes_rms(&truth, &e.points);
            assert!(rms < 1e-5, "seed {seed}: rms {rms}");
            let err = e.distances().iter().zip(distances_of(&truth)).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err < 1e-5, "seed {seed}: distance error {err}");
        }
    }

    #[test]
    fn random_restarts_alone_also_recover() {
        // restart 0 is classical scaling; check the majorization itself from a random start
        let truth = random_points(10, 3);
        let delta = distances_of(&truth);
        let targets: Vec<f64> = pairs(10).map(|(i, j)| delta[i * 10 + j]).collect();
        let cfg = MdsConfig { max_iters: 5000, tol: 1e-14, ..MdsConfig::default() };
        let best = (1..5).map(|r| metric_run(&delta, 10, &targets, &cfg, r)).map(|e| e.stress).fold(f64::INFINITY, f64::min);
        assert!(best < 1e-8, "stress {best}");
    }

    #[test]
    fn metric_stress_never_rises() {
        for seed in 0..10 {
            let n = 12;
            // non-embeddable input: random symmetric dissimilarities
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut delta = vec![0.0; n * n];
            for (i, j) in pairs(n) {
                let v: f64 = rng.random_range(0.5..3.0);
                delta[i * n + j] = v;
                delta[j * n + i] = v;
            }
            let targets: Vec<f64> = pairs(n).map(|(i, j)| delta[i * n + j]).collect();
            for r in 0..4 {
                let e = metric_run(&delta, n, &targets, &MdsConfig::default(), r);
                assert_eq!(e.stress_increases(), 0, "seed {seed} restart {r}: {:?}", e.stress_history);
            }
        }
    }

    #[test]
    fn nonmetric_recovers_planar_ranks() {
        let truth = random_points(12, 77);
        let e = smacof_nonmetric(&distances_of(&truth), 12, &MdsConfig::default()).unwrap();
        assert!(e.stress < 1e-6, "stress-1 {}", e.stress);
        let h = &e.stress_history;
        assert_eq!(e.stress_increases(), 0, "{:?}", &h[h.len().saturating_sub(30)..]);
    }

    #[test]
    fn cubing_changes_nothing() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 9;
        let mut delta = vec![0.0; n * n];
        for (i, j) in pairs(n) {
            let v: f64 = rng.random_range(0.1..2.0);
            delta[i * n + j] = v;
            delta[j * n + i] = v;
        }
        let cubed: Vec<f64> = delta.iter().map(|v| v.powi(3)).collect();
        let cfg = MdsConfig { max_iters: 200, ..MdsConfig::default() };
        let a = smacof_nonmetric(&delta, n, &cfg).unwrap();
        let b = smacof_nonmetric(&cubed, n, &cfg).unwrap();
        assert!((a.stress - b.stress).abs() < 1e-6);
        let rank = |e: &Embedding| {
            let d = pair_distances(&e.points);
            let mut idx: Vec<usize> = (0..d.len()).collect();
            idx.sort_by(|&p, &q| d[p].total_cmp(&d[q]));
            idx
        };
        assert_eq!(rank(&a), rank(&b));
    }

    #[test]
    fn all_ties_embed_exactly_for_three() {
        for n in 2..=3 {
            let delta: Vec<f64> = (0..n * n).map(|k| if k / n == k % n { 0.0 } else { 0.7 }).collect();
            let e = smacof_nonmetric(&delta, n, &MdsConfig::default()).unwrap();
            assert!(e.stress < 1e-6, "n {n}: {}", e.stress);
        }
    }

    #[test]
    fn infinity_ranks_last() {
        let inf = f64::INFINITY;
        let delta = [0.0, 1.0, inf, 1.0, 0.0, 2.0, inf, 2.0, 0.0];
        let e = smacof_nonmetric(&delta, 3, &MdsConfig::default()).unwrap();
        assert!(e.distance(0, 2) >= e.distance(1, 2) - 1e-9);
        assert!(e.distance(1, 2) >= e.distance(0, 1) - 1e-9);
        assert!(smacof_metric(&delta, 3, &MdsConfig::default()).is_err());
    }

    #[test]
    fn invalid_inputs_rejected() {
        let cfg = MdsConfig::default();
        assert_eq!(smacof_metric(&[0.0, 1.0, 2.0, 0.0], 2, &cfg), Err(MdsError::NotSymmetric { i: 0, j: 1 }));
        assert!(matches!(smacof_metric(&[0.0, -1.0, -1.0, 0.0], 2, &cfg), Err(MdsError::BadEntry { .. })));
        assert_eq!(smacof_metric(&[1.0, 1.0, 1.0, 0.0], 2, &cfg), Err(MdsError::Diagonal { i: 0 }));
        assert!(smacof_nonmetric(&[0.0, f64::NAN, f64::NAN, 0.0], 2, &cfg).is_err());
        assert!(smacof_metric(&[0.0; 3], 2, &cfg).is_err());
    }

    #[test]
    fn restarts_pick_lowest_stress_first_index_on_ties() {
        let mk = |stress, restart| Embedding {
            points: vec![],
            stress,
            kind: MdsKind::Metric,
            iterations_used: 0,
            converged: true,
            stress_history: vec![],
            restart,
        };
        assert_eq!(best_of(vec![mk(2.0, 0), mk(1.0, 1), mk(1.0, 2)]).restart, 1);
        assert_eq!(best_of(vec![mk(1.0, 0), mk(1.0, 1)]).restart, 0);
    }

    #[test]
    fn csv_lists_roles() {
        let p = LabeledPoint { id: "m3".into(), x: 1.5, y: -2.0, accuracy: 0.75, role: PointRole::CandidateWa };
        assert_eq!(labeled_points_csv(&[p]), "id,x,y,accuracy,role\nm3,1.5,-2,0.75,candidate-WA\n");
    }

    #[test]
    fn procrustes_ignores_rigid_motion() {
        let a = random_points(8, 9);
        let (c, s) = (0.3f64.cos(), 0.3f64.sin());
        let b: Vec<Point> = a.iter().map(|p| [c * p[0] - s * p[1] + 4.0, -(s * p[0] + c * p[1]) - 1.0]).collect();
        assert!(procrustes_rms(&a, &b) < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn relabeling_leaves_distances(seed in 0u64..10_000, rot in 1usize..10) {
            // planar configuration with 2% multiplicative noise, so not exactly embeddable
            let n = 10;
            let truth = random_points(n, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut delta = distances_of(&truth);
            for (i, j) in pairs(n) {
                let v = delta[i * n + j] * rng.random_range(0.98..1.02);
                delta[i * n + j] = v;
                delta[j * n + i] = v;
            }
            let perm: Vec<usize> = (0..n).map(|i| (i + rot) % n).collect();
            let permuted: Vec<f64> = (0..n * n).map(|k| delta[perm[k / n] * n + perm[k % n]]).collect();
            let cfg = MdsConfig { max_iters: 3000, tol: 1e-13, ..MdsConfig::default() };
            let a = smacof_metric(&delta, n, &cfg).unwrap();
            let b = smacof_metric(&permuted, n, &cfg).unwrap();
            let da = a.distances();
            let db = b.distances();
            for i in 0..n {
                for j in 0..n {
                    prop_assert!((da[perm[i] * n + perm[j]] - db[i * n + j]).abs() < 1e-6);
                }
            }
        }

        #[test]
        fn nonmetric_stress_never_rises(seed in 0u64..10_000) {
            let n = 8;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut delta = vec![0.0; n * n];
            for (i, j) in pairs(n) {
                let v = f64::from(rng.random_range(1u8..6));
                delta[i * n + j] = v;
                delta[j * n + i] = v;
            }
            let e = smacof_nonmetric(&delta, n, &MdsConfig { max_iters: 300, ..MdsConfig::default() }).unwrap();
            prop_assert_eq!(e.stress_increases(), 0);
        }
    }
}
