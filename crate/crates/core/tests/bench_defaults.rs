//! Properties of the default synthetic population (one trial, every
//! held-out domain).

use soupbench::bench::{build_population, max_pairwise_sq_distance, BenchConfig, SynthEvaluator};
use soupbench::soup::Evaluator;
use soupbench::store::average_weights;

#[test]
fn default_population_is_usable() {
    let cfg = BenchConfig::default();
    for env in 0..cfg.domains.n_domains() {
        let bundle = build_population(&cfg, 0, env).unwrap();
        assert_eq!(bundle.models.len(), cfg.n_models);
        bundle.validate().unwrap();

        let acc: Vec<f64> = bundle.models.iter().map(|m| m.id_val_accuracy).collect();
        let worst = acc.iter().copied().fold(1.0, f64::min);
        let best = acc.iter().copied().fold(0.0, f64::max);
        assert!(best - worst >= 0.02, "env {env}: ID-val spread {:.4}", best - worst);

        let eval = SynthEvaluator::from_manifest(&bundle.manifest).unwrap();
        let wa = average_weights(bundle.models.iter().map(|m| &m.weights)).unwrap();
        let wa_acc = eval.evaluate(&wa).unwrap().id_val.accuracy();
        assert!(wa_acc > worst, "env {env}: uniform average {wa_acc} vs worst {worst}");

        let spread = max_pairwise_sq_distance(&bundle);
        assert!(spread <= cfg.finetune.max_pairwise_sq_distance, "env {env}: max squared distance {spread}");
    }
}
