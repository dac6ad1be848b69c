use std::path::{Path, PathBuf};

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::agents::AgentConfig;
use crate::envs::{
    optimal_action_entropy, sample_beta_product_distribution, BernoulliBanditSpec, DeepSeaSpec,
    EnvSpec, GoalDistribution, TaskDistribution,
};
use crate::error::{Error, Result};
use crate::maxent::{PriorOptions, ReferencePrior};
use crate::seed::{rng_from, stream};

use super::entropy_bin;
use super::EntropyBin;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum EnvConfig {
    Bandit { arms: usize },
    DeepSea { size: usize },
}

/// How the task distributions of an experiment are produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DistributionSpec {
    /// Listed explicitly.
    Explicit { distributions: Vec<TaskDistribution> },
    /// `count` random Beta products.
    RandomBeta { count: usize },
    /// Random Beta products kept until every entropy bin holds `per_bin`.
    StratifiedBeta { per_bin: usize },
    /// Arm 0 ~ Beta(c, 1) and the rest ~ Beta(1, c) for `count` values of
    /// `c` spaced geometrically in `[1, max_concentration]`; entropy falls
    /// from `ln K` towards 0 as `c` grows and is negligible past `c ≈ 10`.
    EntropySweep { count: usize, max_concentration: f64 },
    /// Deep Sea goal distributions.
    Goals { goals: Vec<GoalDistribution> },
}

/// One experiment; the TOML sections mirror these fields. Unknown keys are
/// rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub workers: usize,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    /// `T`.
    pub episodes: usize,
    /// Tasks per distribution (bandits) or seeds per distribution (Deep Sea).
    pub tasks: usize,
    /// `N_E`.
    pub demos: usize,
    #[serde(default = "infinite", with = "crate::maxent::rationality")]
    pub expert_beta: f64,
    /// Monte Carlo draws for the optimal-action entropy of bandit
    /// distributions.
    #[serde(default = "default_entropy_mc")]
    pub entropy_mc: usize,
    /// Entropy bin edges in nats.
    #[serde(default = "default_thresholds")]
    pub entropy_thresholds: (f64, f64),
    /// Std of the Gaussian reference prior over Deep Sea Q-tables. Keep
    /// `prior.beta_eff × reference_std` near 10.
    #[serde(default = "default_reference_std")]
    pub reference_std: f64,
    pub env: EnvConfig,
    pub distributions: DistributionSpec,
    #[serde(default)]
    pub prior: PriorOptions,
    pub agents: Vec<AgentConfig>,
}

fn default_name() -> String {
    "experiment".into()
}
fn one() -> usize {
    1
}
fn default_reference_std() -> f64 {
    0.1
}
fn default_out() -> PathBuf {
    PathBuf::from("out")
}
fn infinite() -> f64 {
    f64::INFINITY
}
fn default_entropy_mc() -> usize {
    4096
}
fn default_thresholds() -> (f64, f64) {
    (0.8, 1.6)
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.episodes == 0 || self.tasks == 0 || self.demos == 0 {
            return bad("episodes, tasks and demos must all be ≥ 1");
        }
        if self.workers == 0 {
            return bad("workers must be ≥ 1");
        }
        if self.agents.is_empty() {
            return bad("no agents listed");
        }
        if self.entropy_mc == 0 {
            return bad("entropy_mc must be ≥ 1");
        }
        let (lo, hi) = self.entropy_thresholds;
        if !(lo <= hi) {
            return bad("entropy thresholds must be ordered");
        }
        if !(self.reference_std > 0.0) {
            return bad("reference_std must be > 0");
        }
        match (&self.env, &self.distributions) {
            (EnvConfig::Bandit { arms }, d) => {
                if *arms < 2 {
                    return bad("bandits need at least 2 arms");
                }
                if matches!(d, DistributionSpec::Goals { .. }) {
                    return bad("goal distributions need a deep-sea env");
                }
                if let Some(a) = self.agents.iter().find(|a| !a.kind.is_bandit()) {
                    return Err(Error::Config(format!("{} cannot run on bandits", a.kind)));
                }
            }
            (EnvConfig::DeepSea { size }, d) => {
                if *size < 2 {
                    return bad("deep sea size must be ≥ 2");
                }
                if !matches!(d, DistributionSpec::Goals { .. }) {
                    return bad("deep-sea envs take goal distributions");
                }
                if let Some(a) = self.agents.iter().find(|a| a.kind.is_bandit()) {
                    return Err(Error::Config(format!("{} cannot run on deep sea", a.kind)));
                }
            }
        }
        match &self.distributions {
            DistributionSpec::Explicit { distributions } if distributions.is_empty() => {
                bad("no distributions listed")
            }
            DistributionSpec::Explicit { distributions } => {
                distributions.iter().try_for_each(TaskDistribution::validate)
            }
            DistributionSpec::RandomBeta { count } | DistributionSpec::EntropySweep { count, .. }
                if *count == 0 =>
            {
                bad("distribution count must be ≥ 1")
            }
            DistributionSpec::EntropySweep {
                max_concentration, ..
            } if !(*max_concentration >= 1.0) => bad("max_concentration must be ≥ 1"),
            DistributionSpec::StratifiedBeta { per_bin } if *per_bin == 0 => bad("per_bin must be ≥ 1"),
            DistributionSpec::StratifiedBeta { .. }
                if matches!(self.env, EnvConfig::Bandit { arms } if (arms as f64).ln() <= hi) =>
            {
                bad("the high entropy bin is unreachable with this many arms")
            }
            DistributionSpec::Goals { goals } if goals.is_empty() => bad("no goal distributions listed"),
            _ => Ok(()),
        }
    }

    pub fn env_spec(&self, goals: GoalDistribution) -> Result<EnvSpec> {
        Ok(match self.env {
            EnvConfig::Bandit { arms } => EnvSpec::Bandit(BernoulliBanditSpec::new(arms)?),
            EnvConfig::DeepSea { size } => EnvSpec::DeepSea(DeepSeaSpec::new(size, goals)?),
        })
    }

    pub fn reference(&self, env: &EnvSpec) -> ReferencePrior {
        let dim = env.q_model().dim();
        match env {
            EnvSpec::DeepSea(_) => ReferencePrior::Gaussian {
                dim,
                std: self.reference_std,
            },
            _ => ReferencePrior::UniformBox { dim },
        }
    }

    /// The experiment's task distributions with their optimal-action
    /// entropies, in id order. Deterministic in the master seed.
    pub fn task_distributions(&self) -> Result<Vec<DistributionEntry>> {
        let mc = self.entropy_mc;
        let seed = self.seed;
        let entry = |id: usize, env: EnvSpec, dist: TaskDistribution, name: String| -> Result<DistributionEntry> {
            let mut rng = rng_from(seed, &[stream::ENTROPY, id as u64]);
            let entropy = optimal_action_entropy(&env, &dist, mc, &mut rng)?;
            Ok(DistributionEntry {
                id: id as u32,
                name,
                env,
                dist,
                entropy,
            })
        };
        match &self.distributions {
            DistributionSpec::Goals { goals } => goals
                .iter()
                .enumerate()
                .map(|(i, &g)| {
                    let env = self.env_spec(g)?;
                    let dist = match &env {
                        EnvSpec::DeepSea(spec) => TaskDistribution::goals(spec),
                        _ => unreachable!("validated"),
                    };
                    entry(i, env, dist, g.name().to_string())
                })
                .collect(),
            DistributionSpec::Explicit { distributions } => {
                let env = self.env_spec(GoalDistribution::Corner)?;
                distributions
                    .iter()
                    .enumerate()
                    .map(|(i, d)| entry(i, env.clone(), d.clone(), format!("d{i}")))
                    .collect()
            }
            DistributionSpec::RandomBeta { count } => {
                let env = self.env_spec(GoalDistribution::Corner)?;
                let arms = env.q_model().num_actions();
                (0..*count)
                    .map(|i| {
                        let mut rng = rng_from(seed, &[stream::DISTRIBUTION, i as u64]);
                        let d = sample_beta_product_distribution(arms, &mut rng)?;
                        entry(i, env.clone(), d, format!("d{i}"))
                    })
                    .collect()
            }
            DistributionSpec::EntropySweep {
                count,
                max_concentration,
            } => {
                let env = self.env_spec(GoalDistribution::Corner)?;
                let arms = env.q_model().num_actions();
                (0..*count)
                    .map(|i| {
                        let frac = if *count == 1 { 0.0 } else { i as f64 / (*count - 1) as f64 };
                        let c = max_concentration.powf(frac);
                        let mut params = vec![(1.0, c); arms];
                        params[0] = (c, 1.0);
                        entry(i, env.clone(), TaskDistribution::BetaProduct(params), format!("c{c:.3}"))
                    })
                    .collect()
            }
            DistributionSpec::StratifiedBeta { per_bin } => {
                let env = self.env_spec(GoalDistribution::Corner)?;
                let arms = env.q_model().num_actions();
                let mut bins: [Vec<DistributionEntry>; 3] = Default::default();
                let mut rng = rng_from(seed, &[stream::DISTRIBUTION]);
                let mut candidate = 0u64;
                while bins.iter().any(|b| b.len() < *per_bin) {
                    candidate += 1;
                    if candidate > 1_000_000 {
                        return Err(Error::Config("could not fill the entropy bins".into()));
                    }
                    let d = sample_beta_product_distribution(arms, &mut rng)?;
                    let label_seed = rng.random::<u64>();
                    let mut erng = rng_from(label_seed, &[stream::ENTROPY]);
                    let h = optimal_action_entropy(&env, &d, mc, &mut erng)?;
                    let bin = entropy_bin(h, self.entropy_thresholds) as usize;
                    if bins[bin].len() < *per_bin {
                        bins[bin].push(DistributionEntry {
                            id: 0,
                            name: String::new(),
                            env: env.clone(),
                            dist: d,
                            entropy: h,
                        });
                    }
                }
                let mut out: Vec<DistributionEntry> = bins.into_iter().flatten().collect();
                for (i, e) in out.iter_mut().enumerate() {
                    e.id = i as u32;
                    e.name = format!("{}-{i}", EntropyBin::from_entropy(e.entropy, self.entropy_thresholds).name());
                }
                Ok(out)
            }
        }
    }
}

/// A task distribution together with its environment and entropy.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionEntry {
    pub id: u32,
    pub name: String,
    pub env: EnvSpec,
    pub dist: TaskDistribution,
    pub entropy: f64,
}
