//! Fully connected classifier with explicit backprop.
//!
//! Parameters are a flat slice laid out layer by layer, each layer as a
//! row-major `out × in` weight block followed by `out` biases. Arithmetic is
//! in f64; weights round to f32 only when they leave as a [`WeightVector`].

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{BenchError, Dataset};
use crate::store::{CorrectBits, WeightVector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Relu,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
        }
    }

    /// Derivative expressed through the activation output `a`.
    fn slope(self, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Relu => f64::from(u8::from(a > 0.0)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpSpec {
    /// Input width, hidden widths, class count.
    pub widths: Vec<usize>,
    pub activation: Activation,
}

impl Default for MlpSpec {
    fn default() -> Self {
        Self { widths: vec![2, 32, 32, 4], activation: Activation::Tanh }
    }
}

#[derive(Clone, Copy, Debug)]
struct Layer {
    offset: usize,
    inputs: usize,
    outputs: usize,
}

impl Layer {
    fn bias(&self) -> usize {
        self.offset + self.inputs * self.outputs
    }
}

impl MlpSpec {
    pub fn validate(&self) -> Result<(), BenchError> {
        if self.widths.len() < 2 || self.widths.contains(&0) {
            return Err(BenchError::Degenerate(format!("bad layer widths {:?}", self.widths)));
        }
        if self.classes() < 2 {
            return Err(BenchError::Degenerate("need at least 2 output classes".into()));
        }
        Ok(())
    }

    pub fn inputs(&self) -> usize {
        self.widths[0]
    }

    pub fn classes(&self) -> usize {
        *self.widths.last().unwrap()
    }

    fn layers(&self) -> Vec<Layer> {
        let mut offset = 0;
        self.widths
            .windows(2)
            .map(|w| {
                let layer = Layer { offset, inputs: w[0], outputs: w[1] };
                offset += w[0] * w[1] + w[1];
                layer
            })
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.widths.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init(&self, rng: &mut impl Rng) -> Vec<f64> {
        let mut p = vec![0.0; self.param_count()];
        for l in self.layers() {
            let bound = (6.0 / (l.inputs + l.outputs) as f64).sqrt();
            for w in &mut p[l.offset..l.bias()] {
                *w = rng.random_range(-bound..bound);
            }
        }
        p
    }

    fn check_len(&self, params: &[f64]) -> Result<(), BenchError> {
        if params.len() != self.param_count() {
            return Err(BenchError::Shape { expected: self.param_count(), found: params.len() });
        }
        Ok(())
    }

    /// Activations of every layer; the last entry is the logits.
    fn forward(&self, params: &[f64], x: &[f64], layers: &[Layer], acts: &mut Vec<Vec<f64>>) {
        acts.resize(layers.len() + 1, Vec::new());
        acts[0].clear();
        acts[0].extend_from_slice(x);
        for (k, l) in layers.iter().enumerate() {
            let (head, tail) = acts.split_at_mut(k + 1);
            let input = &head[k];
            let out = &mut tail[0];
            out.clear();
            let hidden = k + 1 < layers.len();
            for o in 0..l.outputs {
                let row = &params[l.offset + o * l.inputs..l.offset + (o + 1) * l.inputs];
                let z = params[l.bias() + o] + row.iter().zip(input).map(|(w, a)| w * a).sum::<f64>();
                out.push(if hidden { self.activation.apply(z) } else { z });
            }
        }
    }

    pub fn logits(&self, params: &[f64], x: &[f64]) -> Vec<f64> {
        let mut acts = Vec::new();
        self.forward(params, x, &self.layers(), &mut acts);
        acts.pop().unwrap()
    }

    pub fn predict(&self, params: &[f64], x: &[f64]) -> u32 {
        argmax(&self.logits(params, x))
    }

    /// Mean cross-entropy over `idx` and its gradient, accumulated into `grad`
    /// (which is overwritten).
    pub fn loss_and_grad(&self, params: &[f64], data: &Dataset, idx: &[usize], grad: &mut [f64]) -> f64 {
        let layers = self.layers();
        let mut acts = Vec::new();
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut loss = 0.0;
        let mut delta = Vec::new();
        let mut back = Vec::new();
        for &i in idx {
            self.forward(params, data.point(i), &layers, &mut acts);
            let logits = acts.last().unwrap();
            let label = data.y[i] as usize;
            let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
            let total: f64 = exps.iter().sum();
            loss += total.ln() + max - logits[label];
            delta.clear();
            delta.extend(exps.iter().map(|e| e / total));
            delta[label] -= 1.0;

            for (k, l) in layers.iter().enumerate().rev() {
                let input = &acts[k];
                for o in 0..l.outputs {
                    let d = delta[o];
                    let row = l.offset + o * l.inputs;
                    for (g, a) in grad[row..row + l.inputs].iter_mut().zip(input) {
                        *g += d * a;
                    }
                    grad[l.bias() + o] += d;
                }
                if k == 0 {
                    break;
                }
                back.clear();
                back.resize(l.inputs, 0.0);
                for o in 0..l.outputs {
                    let row = &params[l.offset + o * l.inputs..l.offset + (o + 1) * l.inputs];
                    for (b, w) in back.iter_mut().zip(row) {
                        *b += w * delta[o];
                    }
                }
                for (b, a) in back.iter_mut().zip(input) {
                    *b *= self.activation.slope(*a);
                }
                std::mem::swap(&mut delta, &mut back);
            }
        }
        let n = idx.len().max(1) as f64;
        grad.iter_mut().for_each(|g| *g /= n);
        loss / n
    }

    pub fn mean_loss(&self, params: &[f64], data: &Dataset) -> f64 {
        let idx: Vec<usize> = (0..data.len()).collect();
        let mut grad = vec![0.0; params.len()];
        self.loss_and_grad(params, data, &idx, &mut grad)
    }

    pub fn correctness(&self, params: &[f64], data: &Dataset) -> CorrectBits {
        let layers = self.layers();
        let mut acts = Vec::new();
        CorrectBits::from_bools((0..data.len()).map(|i| {
            self.forward(params, data.point(i), &layers, &mut acts);
            argmax(acts.last().unwrap()) == data.y[i]
        }))
    }

    pub fn accuracy(&self, params: &[f64], data: &Dataset) -> f64 {
        self.correctness(params, data).accuracy()
    }
}

fn argmax(v: &[f64]) -> u32 {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best as u32
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Seeds the per-epoch shuffle.
    pub seed: u64,
}

/// Minibatch SGD in place. Returns the mean training loss of each epoch.
pub fn sgd(spec: &MlpSpec, params: &mut [f64], data: &Dataset, cfg: &TrainConfig) -> Result<Vec<f64>, BenchError> {
    spec.check_len(params)?;
    if data.dim != spec.inputs() {
        return Err(BenchError::Shape { expected: spec.inputs(), found: data.dim });
    }
    if data.is_empty() || cfg.batch_size == 0 {
        return Err(BenchError::Degenerate("empty training set or zero batch size".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut grad = vec![0.0; params.len()];
    let mut history = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let loss = spec.loss_and_grad(params, data, batch, &mut grad);
            if !loss.is_finite() {
                return Err(BenchError::Diverged(format!("{cfg:?}")));
            }
            total += loss * batch.len() as f64;
            for (p, g) in params.iter_mut().zip(&grad) {
                *p -= cfg.lr * g;
            }
        }
        history.push(total / data.len() as f64);
    }
    if params.iter().any(|p| !p.is_finite()) {
        return Err(BenchError::Diverged(format!("{cfg:?}")));
    }
    Ok(history)
}

pub fn to_f64(w: &WeightVector) -> Vec<f64> {
    w.as_slice().iter().map(|&v| f64::from(v)).collect()
}

pub fn to_weights(params: &[f64]) -> Result<WeightVector, BenchError> {
    Ok(WeightVector::new(params.iter().map(|&v| v as f32).collect())?)
}

/// Trains from `init` and returns the rounded result.
pub fn train_mlp(spec: &MlpSpec, init: &WeightVector, data: &Dataset, cfg: &TrainConfig) -> Result<WeightVector, BenchError> {
    let mut params = to_f64(init);
    sgd(spec, &mut params, data, cfg)?;
    to_weights(&params)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blobs(n: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut d = Dataset::empty(2);
        for i in 0..n {
            let label = (i % 2) as u32;
            let cx = if label == 0 { -2.0 } else { 2.0 };
            d.push(&[cx + rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)], label);
        }
        d
    }

    fn numeric_grad(spec: &MlpSpec, params: &[f64], data: &Dataset, eps: f64) -> Vec<f64> {
        let mut p = params.to_vec();
        (0..p.len())
            .map(|i| {
                let keep = p[i];
                p[i] = keep + eps;
                let up = spec.mean_loss(&p, data);
                p[i] = keep - eps;
                let down = spec.mean_loss(&p, data);
                p[i] = keep;
                (up - down) / (2.0 * eps)
            })
            .collect()
    }

    #[test]
    fn param_layout() {
        assert_eq!(MlpSpec::default().param_count(), 2 * 32 + 32 + 32 * 32 + 32 + 32 * 4 + 4);
        let spec = MlpSpec { widths: vec![4, 6, 2, 2], activation: Activation::Tanh };
        assert_eq!(spec.param_count(), 50);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let spec = MlpSpec { widths: vec![4, 6, 2, 2], activation: Activation::Tanh };
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let params = spec.init(&mut rng);
        let mut data = Dataset::empty(4);
        for i in 0..12 {
            let x: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            data.push(&x, (i % 2) as u32);
        }
        let idx: Vec<usize> = (0..data.len()).collect();
        let mut grad = vec![0.0; params.len()];
        spec.loss_and_grad(&params, &data, &idx, &mut grad);
        let num = numeric_grad(&spec, &params, &data, 1e-4);
        for (a, n) in grad.iter().zip(&num) {
            assert!((a - n).abs() <= 1e-4 * a.abs().max(n.abs()).max(1e-3), "{a} vs {n}");
        }
    }

    #[test]
    fn zero_learning_rate_is_identity() {
        let spec = MlpSpec::default();
        let init = to_weights(&spec.init(&mut ChaCha8Rng::seed_from_u64(1))).unwrap();
        let mut data = Dataset::empty(2);
        for i in 0..40 {
            data.push(&[i as f64 * 0.1, -(i as f64) * 0.05], i % 4);
        }
        let cfg = TrainConfig { lr: 0.0, epochs: 3, batch_size: 8, seed: 3 };
        assert_eq!(train_mlp(&spec, &init, &data, &cfg).unwrap(), init);
    }

    #[test]
    fn separable_data_is_learned() {
        let spec = MlpSpec { widths: vec![2, 32, 32, 2], activation: Activation::Tanh };
        let data = blobs(200, 5);
        let mut params = spec.init(&mut ChaCha8Rng::seed_from_u64(2));
        let cfg = TrainConfig { lr: 0.05, epochs: 200, batch_size: 16, seed: 9 };
        let losses = sgd(&spec, &mut params, &data, &cfg).unwrap();
        assert!(losses.last().unwrap() < &losses[0]);
        assert!(spec.accuracy(&params, &data) >= 0.99);
    }

    #[test]
    fn divergence_names_the_config() {
        let spec = MlpSpec { widths: vec![2, 8, 2], activation: Activation::Relu };
        let data = blobs(40, 1);
        let mut params = spec.init(&mut ChaCha8Rng::seed_from_u64(2));
        let cfg = TrainConfig { lr: 1e200, epochs: 5, batch_size: 4, seed: 0 };
        let err = sgd(&spec, &mut params, &data, &cfg).unwrap_err();
        assert!(err.to_string().contains("1e200"), "{err}");
    }

    #[test]
    fn wrong_init_length() {
        let spec = MlpSpec::default();
        let init = WeightVector::new(vec![0.0; 5]).unwrap();
        let cfg = TrainConfig { lr: 0.1, epochs: 1, batch_size: 1, seed: 0 };
        assert!(matches!(train_mlp(&spec, &init, &blobs(4, 0), &cfg), Err(BenchError::Shape { .. })));
    }
}
