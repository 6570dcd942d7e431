//! Synthetic multi-domain benchmark: Gaussian-mixture domains, a small MLP,
//! shared pretraining and a fine-tuned population per (trial, held-out
//! domain).

mod data;
pub mod mlp;

use std::collections::BTreeMap;
use std::error::Error as StdError;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::euclidean_sq;
use crate::soup::Evaluator;
use crate::store::{Bundle, CorrectnessRecord, Manifest, ModelEntry, SplitSizes, StoreError, WeightVector};

pub use data::{generate_domains, prototypes, splits, Dataset, DomainData, DomainSpec, DomainTransform, PointsPerSplit, Splits};
pub use mlp::{sgd, train_mlp, Activation, MlpSpec, TrainConfig};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("degenerate configuration: {0}")]
    Degenerate(String),
    #[error("expected {expected} values, found {found}")]
    Shape { expected: usize, found: usize },
    #[error("training diverged (NaN or infinite loss) under {0}")]
    Diverged(String),
    #[error("model {model}: {source}")]
    Training {
        model: u32,
        #[source]
        source: Box<BenchError>,
    },
    #[error("manifest does not describe a synthetic population: {0}")]
    Generator(String),
    #[error(transparent)]
    Store(#[from] StoreError),
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent stream seed for a path of integer labels under `master`.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix(master), |h, &p| splitmix(h ^ splitmix(p)))
}

const STREAM_PRETRAIN_INIT: u64 = 1;
const STREAM_PRETRAIN_ORDER: u64 = 2;
const STREAM_FINETUNE: u64 = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PretrainConfig {
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        Self { lr: 0.05, epochs: 40, batch_size: 16 }
    }
}

/// Ranges are inclusive; learning rates are drawn log-uniformly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FinetuneConfig {
    pub lr_range: [f64; 2],
    pub epoch_range: [usize; 2],
    pub batch_size_range: [usize; 2],
    /// Mixed into every model's data-order stream.
    pub data_order_seed: u64,
    /// Std of the Gaussian added to the shared init before fine-tuning.
    pub init_perturbation: f64,
    /// Ceiling on squared weight distance between any two models of one
    /// population.
    pub max_pairwise_sq_distance: f64,
}

impl Default for FinetuneConfig {
    fn default() -> Self {
        Self {
            lr_range: [0.15, 0.25],
            epoch_range: [8, 12],
            batch_size_range: [8, 8],
            data_order_seed: 17,
            init_perturbation: 0.01,
            max_pairwise_sq_distance: 50.0,
        }
    }
}

impl FinetuneConfig {
    fn validate(&self) -> Result<(), BenchError> {
        let [lo, hi] = self.lr_range;
        let ok = lo > 0.0
            && lo <= hi
            && hi.is_finite()
            && self.epoch_range[0] <= self.epoch_range[1]
            && self.batch_size_range[0] >= 1
            && self.batch_size_range[0] <= self.batch_size_range[1]
            && self.init_perturbation >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(BenchError::Degenerate(format!("fine-tuning ranges {self:?}")))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    pub domains: DomainSpec,
    pub mlp: MlpSpec,
    pub pretrain: PretrainConfig,
    pub finetune: FinetuneConfig,
    pub n_models: usize,
    pub n_trials: u32,
    pub master_seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            domains: DomainSpec::default(),
            mlp: MlpSpec::default(),
            pretrain: PretrainConfig::default(),
            finetune: FinetuneConfig::default(),
            n_models: 20,
            n_trials: 10,
            master_seed: 7,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<(), BenchError> {
        self.domains.validate()?;
        self.mlp.validate()?;
        self.finetune.validate()?;
        if self.mlp.inputs() != 2 {
            return Err(BenchError::Degenerate(format!("input width {} (data is 2-D)", self.mlp.inputs())));
        }
        if self.mlp.classes() != self.domains.n_classes {
            return Err(BenchError::Degenerate(format!(
                "{} output units for {} classes",
                self.mlp.classes(),
                self.domains.n_classes
            )));
        }
        if self.n_models == 0 {
            return Err(BenchError::Degenerate("population of 0 models".into()));
        }
        Ok(())
    }
}

/// What an evaluator needs to rebuild the data; stored in the manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorInfo {
    pub domains: DomainSpec,
    pub mlp: MlpSpec,
    pub held_out: usize,
}

/// Sampled fine-tuning settings of one model.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelPlan {
    pub train: TrainConfig,
    pub perturb_seed: u64,
}

fn plan(cfg: &BenchConfig, trial: u32, held_out: usize, id: u32) -> ModelPlan {
    let f = &cfg.finetune;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
        cfg.master_seed,
        &[STREAM_FINETUNE, u64::from(trial), held_out as u64, u64::from(id)],
    ));
    let [lo, hi] = f.lr_range;
    let lr = if lo == hi { lo } else { (rng.random_range(lo.ln()..=hi.ln())).exp() };
    let epochs = rng.random_range(f.epoch_range[0]..=f.epoch_range[1]);
    let batch_size = rng.random_range(f.batch_size_range[0]..=f.batch_size_range[1]);
    let order = derive_seed(f.data_order_seed, &[u64::from(trial), held_out as u64, u64::from(id)]);
    ModelPlan { train: TrainConfig { lr, epochs, batch_size, seed: order }, perturb_seed: rng.random() }
}

fn record(spec: &MlpSpec, params: &[f64], s: &Splits) -> CorrectnessRecord {
    CorrectnessRecord { id_val: spec.correctness(params, &s.id_val), ood_test: spec.correctness(params, &s.ood_test) }
}

/// Pretrains on the pooled ID domains, then fine-tunes `cfg.n_models`
/// models from the shared initialization.
pub fn build_population(cfg: &BenchConfig, trial: u32, held_out: usize) -> Result<Bundle, BenchError> {
    cfg.validate()?;
    let spec = &cfg.mlp;
    let s = splits(&generate_domains(&cfg.domains)?, held_out)?;

    let stream = |tag| derive_seed(cfg.master_seed, &[tag, u64::from(trial), held_out as u64]);
    let mut shared = spec.init(&mut ChaCha8Rng::seed_from_u64(stream(STREAM_PRETRAIN_INIT)));
    let p = &cfg.pretrain;
    let pre = TrainConfig { lr: p.lr, epochs: p.epochs, batch_size: p.batch_size, seed: stream(STREAM_PRETRAIN_ORDER) };
    sgd(spec, &mut shared, &s.train, &pre)?;

    let models = (1..=cfg.n_models as u32)
        .into_par_iter()
        .map(|id| {
            let plan = plan(cfg, trial, held_out, id);
            let mut rng = ChaCha8Rng::seed_from_u64(plan.perturb_seed);
            let mut params: Vec<f64> = shared
                .iter()
                .map(|w| w + cfg.finetune.init_perturbation * rng.sample::<f64, _>(StandardNormal))
                .collect();
            let fail = |e| BenchError::Training { model: id, source: Box::new(e) };
            sgd(spec, &mut params, &s.train, &plan.train).map_err(fail)?;
            let weights = mlp::to_weights(&params).map_err(fail)?;
            // score the stored (rounded) weights so bundles agree with any re-evaluation
            let correctness = record(spec, &mlp::to_f64(&weights), &s);
            let hyper = BTreeMap::from([
                ("lr".to_string(), plan.train.lr),
                ("epochs".to_string(), plan.train.epochs as f64),
                ("batch_size".to_string(), plan.train.batch_size as f64),
                ("data_order_seed".to_string(), plan.train.seed as f64),
                ("init_perturbation".to_string(), cfg.finetune.init_perturbation),
            ]);
            Ok(ModelEntry::new(id, weights, correctness, hyper))
        })
        .collect::<Result<Vec<_>, BenchError>>()?;

    let mut manifest = Manifest::new(spec.param_count(), SplitSizes { id_val: s.id_val.len(), ood_test: s.ood_test.len() });
    manifest.trial = trial;
    manifest.environment = held_out as u32;
    manifest.seeds = BTreeMap::from([
        ("master".to_string(), cfg.master_seed),
        ("data".to_string(), cfg.domains.seed),
        ("data_order".to_string(), cfg.finetune.data_order_seed),
    ]);
    let info = GeneratorInfo { domains: cfg.domains.clone(), mlp: spec.clone(), held_out };
    manifest.generator = serde_json::to_value(info).expect("generator info serializes");
    let bundle = Bundle { manifest, models };
    bundle.validate()?;
    Ok(bundle)
}

/// Largest squared weight distance between two models of the bundle.
pub fn max_pairwise_sq_distance(bundle: &Bundle) -> f64 {
    let m = &bundle.models;
    (0..m.len())
        .flat_map(|i| (i + 1..m.len()).map(move |j| (i, j)))
        .map(|(i, j)| euclidean_sq(&m[i].weights, &m[j].weights).unwrap_or(f64::INFINITY))
        .fold(0.0, f64::max)
}

/// Scores weight vectors on the data regenerated from a bundle manifest.
pub struct SynthEvaluator {
    spec: MlpSpec,
    id_val: Dataset,
    ood_test: Dataset,
}

impl SynthEvaluator {
    pub fn from_manifest(manifest: &Manifest) -> Result<Self, BenchError> {
        let info: GeneratorInfo =
            serde_json::from_value(manifest.generator.clone()).map_err(|e| BenchError::Generator(e.to_string()))?;
        info.mlp.validate()?;
        let s = splits(&generate_domains(&info.domains)?, info.held_out)?;
        let sizes = SplitSizes { id_val: s.id_val.len(), ood_test: s.ood_test.len() };
        if sizes != manifest.split_sizes || info.mlp.param_count() != manifest.dim {
            return Err(BenchError::Generator("regenerated data does not match the declared sizes".into()));
        }
        Ok(Self { spec: info.mlp, id_val: s.id_val, ood_test: s.ood_test })
    }
}

impl Evaluator for SynthEvaluator {
    fn evaluate(&self, weights: &WeightVector) -> Result<CorrectnessRecord, Box<dyn StdError + Send + Sync>> {
        if weights.dim() != self.spec.param_count() {
            return Err(Box::new(BenchError::Shape { expected: self.spec.param_count(), found: weights.dim() }));
        }
        let params = mlp::to_f64(weights);
        Ok(CorrectnessRecord {
            id_val: self.spec.correctness(&params, &self.id_val),
            ood_test: self.spec.correctness(&params, &self.ood_test),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::soup::{run, Algorithm};
    use crate::store::average_weights;

    pub(crate) fn small_config() -> BenchConfig {
        let mut cfg = BenchConfig { n_models: 6, ..BenchConfig::default() };
        cfg.mlp.widths = vec![2, 12, 4];
        cfg.domains.points = PointsPerSplit { train: 80, val: 60, test: 60 };
        cfg.finetune.epoch_range = [1, 3];
        cfg
    }

    #[test]
    fn seeds_are_stable_and_distinct() {
        assert_eq!(derive_seed(1, &[2, 3]), derive_seed(1, &[2, 3]));
        assert_ne!(derive_seed(1, &[2, 3]), derive_seed(1, &[3, 2]));
        assert_ne!(derive_seed(1, &[2]), derive_seed(2, &[2]));
    }

    #[test]
    fn same_seed_same_bundle() {
        let cfg = small_config();
        assert_eq!(build_population(&cfg, 0, 1).unwrap(), build_population(&cfg, 0, 1).unwrap());
        assert_ne!(build_population(&cfg, 1, 1).unwrap(), build_population(&cfg, 0, 1).unwrap());
    }

    #[test]
    fn evaluator_reproduces_stored_correctness() {
        let bundle = build_population(&small_config(), 0, 2).unwrap();
        let eval = SynthEvaluator::from_manifest(&bundle.manifest).unwrap();
        for m in &bundle.models {
            assert_eq!(eval.evaluate(&m.weights).unwrap(), m.correctness);
        }
    }

    #[test]
    fn singleton_population_survives_every_algorithm() {
        let cfg = BenchConfig { n_models: 1, ..small_config() };
        let bundle = build_population(&cfg, 0, 0).unwrap();
        assert_eq!(bundle.models.len(), 1);
        let eval = SynthEvaluator::from_manifest(&bundle.manifest).unwrap();
        for algo in Algorithm::ALL {
            let t = run(algo, &bundle, &eval, algo.default_acceptance()).unwrap();
            assert_eq!(t.final_wa().ingredients, vec![1]);
        }
    }

    #[test]
    fn hyperparameters_are_logged_and_in_range() {
        let cfg = small_config();
        let bundle = build_population(&cfg, 0, 0).unwrap();
        for m in &bundle.models {
            let lr = m.hyperparams["lr"];
            assert!(lr >= cfg.finetune.lr_range[0] && lr <= cfg.finetune.lr_range[1]);
            let e = m.hyperparams["epochs"] as usize;
            assert!((cfg.finetune.epoch_range[0]..=cfg.finetune.epoch_range[1]).contains(&e));
        }
    }

    #[test]
    fn bad_configs_rejected() {
        let mut cfg = small_config();
        cfg.mlp.widths = vec![2, 8, 3];
        assert!(matches!(build_population(&cfg, 0, 0), Err(BenchError::Degenerate(_))));
        let cfg = BenchConfig { n_models: 0, ..small_config() };
        assert!(build_population(&cfg, 0, 0).is_err());
        assert!(build_population(&small_config(), 0, 9).is_err());
    }

    #[test]
    fn divergence_reports_the_model() {
        let mut cfg = small_config();
        cfg.finetune.lr_range = [1e300, 1e300];
        cfg.mlp.activation = Activation::Relu;
        match build_population(&cfg, 0, 0) {
            Err(BenchError::Training { model, .. }) => assert!(model >= 1),
            other => panic!("expected a training failure, got {other:?}"),
        }
    }

    #[test]
    fn manifest_round_trip_keeps_the_evaluator() {
        let bundle = build_population(&small_config(), 0, 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        crate::store::save_bundle(&bundle, dir.path()).unwrap();
        let loaded = crate::store::load_bundle(dir.path()).unwrap();
        let eval = SynthEvaluator::from_manifest(&loaded.manifest).unwrap();
        let wa = average_weights(loaded.models.iter().map(|m| &m.weights)).unwrap();
        assert_eq!(eval.evaluate(&wa).unwrap().id_val.len(), loaded.manifest.split_sizes.id_val);
    }
}
