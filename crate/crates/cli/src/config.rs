//! Run configuration: everything an output depends on, hashed into every
//! artifact.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use soupbench::bench::{derive_seed, BenchConfig};
use soupbench::mds::MdsConfig;
use soupbench::metrics::DistanceKind;
use soupbench::soup::{Acceptance, Algorithm};

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Population generator, including trial count, models per trial and the
    /// master seed.
    pub bench: BenchConfig,
    /// Held-out environments `0..environments`.
    pub environments: usize,
    pub algorithms: Vec<Algorithm>,
    /// Overrides every algorithm's default acceptance rule.
    pub acceptance: Option<Acceptance>,
    pub distance_kinds: Vec<DistanceKind>,
    pub mds: MdsConfig,
    /// Whose trajectories get embedded.
    pub mds_algorithm: Algorithm,
    pub mds_trials: Vec<u32>,
    /// Extra per-environment quantile figures.
    pub per_environment: bool,
    /// Line plots of selection statistics stop at this step.
    pub max_plot_t: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let bench = BenchConfig::default();
        Self {
            environments: bench.domains.domains.len(),
            bench,
            algorithms: Algorithm::ALL.to_vec(),
            acceptance: None,
            distance_kinds: DistanceKind::ALL.to_vec(),
            mds: MdsConfig::default(),
            mds_algorithm: Algorithm::Greedier,
            mds_trials: vec![0],
            per_environment: false,
            max_plot_t: 10,
        }
    }
}

/// Command-line overrides, applied on top of a loaded config.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub algorithms: Option<Vec<Algorithm>>,
    pub acceptance: Option<Acceptance>,
    pub trials: Option<u32>,
    pub environments: Option<usize>,
    pub models: Option<usize>,
    pub per_environment: bool,
}

const STREAM_MDS: u64 = 4;

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Usage(format!("bad config: {e}")))
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.bench.master_seed = s;
        }
        if let Some(a) = &o.algorithms {
            self.algorithms = a.clone();
        }
        if o.acceptance.is_some() {
            self.acceptance = o.acceptance;
        }
        if let Some(t) = o.trials {
            self.bench.n_trials = t;
            self.mds_trials.retain(|&m| m < t);
        }
        if let Some(e) = o.environments {
            self.environments = e;
        }
        if let Some(m) = o.models {
            self.bench.n_models = m;
        }
        self.per_environment |= o.per_environment;
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.bench.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        let domains = self.bench.domains.domains.len();
        if self.environments == 0 || self.environments > domains {
            return Err(CliError::Usage(format!("environments must be 1..={domains}, got {}", self.environments)));
        }
        if self.bench.n_trials == 0 {
            return Err(CliError::Usage("at least one trial is needed".into()));
        }
        if self.algorithms.is_empty() {
            return Err(CliError::Usage("no algorithms selected".into()));
        }
        if let Some(t) = self.mds_trials.iter().find(|&&t| t >= self.bench.n_trials) {
            return Err(CliError::Usage(format!("mds trial {t} is not generated")));
        }
        Ok(())
    }

    pub fn acceptance_for(&self, algo: Algorithm) -> Acceptance {
        self.acceptance.unwrap_or(algo.default_acceptance())
    }

    /// (trial, held-out environment) pairs in output order.
    pub fn runs(&self) -> Vec<(u32, usize)> {
        (0..self.bench.n_trials).flat_map(|t| (0..self.environments).map(move |e| (t, e))).collect()
    }

    pub fn mds_seed(&self, trial: u32, env: usize, kind: DistanceKind) -> u64 {
        let k = DistanceKind::ALL.iter().position(|&x| x == kind).unwrap_or(0) as u64;
        derive_seed(self.bench.master_seed, &[STREAM_MDS, self.mds.seed, u64::from(trial), env as u64, k])
    }

    /// SHA-256 of the compact JSON form.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(bytes))
    }
}

/// `greedy,greedier` / `all` → algorithms, order preserved, duplicates dropped.
pub fn parse_algorithms(values: &[String]) -> Result<Vec<Algorithm>, CliError> {
    let mut out = Vec::new();
    for v in values.iter().flat_map(|v| v.split(',')).map(str::trim).filter(|v| !v.is_empty()) {
        let picked = if v == "all" { Algorithm::ALL.to_vec() } else { vec![v.parse().map_err(CliError::Usage)?] };
        for a in picked {
            if !out.contains(&a) {
                out.push(a);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_tracks_content() {
        let a = RunConfig::default();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.bench.master_seed += 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn partial_json_fills_defaults() {
        let c = RunConfig::from_json(r#"{"environments": 2, "bench": {"n_trials": 3}}"#).unwrap();
        assert_eq!((c.environments, c.bench.n_trials, c.bench.n_models), (2, 3, 20));
        assert!(RunConfig::from_json(r#"{"enviroments": 2}"#).is_err());
    }

    #[test]
    fn algorithm_lists() {
        let all = parse_algorithms(&["all".into()]).unwrap();
        assert_eq!(all, Algorithm::ALL.to_vec());
        let two = parse_algorithms(&["greedier,greedy".into(), "greedy".into()]).unwrap();
        assert_eq!(two, vec![Algorithm::Greedier, Algorithm::Greedy]);
        assert!(parse_algorithms(&["fastest".into()]).is_err());
    }

    #[test]
    fn overrides_and_validation() {
        let mut c = RunConfig::default();
        c.apply(&Overrides { trials: Some(2), environments: Some(5), ..Overrides::default() });
        assert_eq!(c.runs().len(), 10);
        assert!(matches!(c.validate(), Err(CliError::Usage(_))));
        c.environments = 4;
        c.validate().unwrap();
    }
}
