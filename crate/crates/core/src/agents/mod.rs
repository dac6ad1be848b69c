//! Learners: ExPerior and the baselines, for bandits and Deep Sea.

mod bandit;
mod bootdqn;

pub use bandit::{
    demo_arm_counts, naive_ucb_act, ucb1_index, ucb_explore_act, BanditAgent, BcAgent,
    OracleTsAgent, ThompsonAgent, UcbAgent,
};
pub use bootdqn::{
    bootdqn_episode, bootdqn_update, init_ensemble, BootDqnAgent, BootDqnConfig, DeepSeaEpisode,
    EnsembleState, EpisodicEnv, ReplayBuffer,
};

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::domain::DemoDataset;
use crate::envs::TaskDistribution;
use crate::error::{Error, Result};
use crate::maxent::GibbsPrior;
use crate::sampling::SgldConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AgentKind {
    ExperiorTs,
    NaiveTs,
    NaiveUcb,
    Bc,
    OracleTs,
    UcbExplore,
    ExperiorBootdqn,
    NaiveBootdqn,
}

impl AgentKind {
    pub const ALL: [AgentKind; 8] = [
        AgentKind::ExperiorTs,
        AgentKind::NaiveTs,
        AgentKind::NaiveUcb,
        AgentKind::Bc,
        AgentKind::OracleTs,
        AgentKind::UcbExplore,
        AgentKind::ExperiorBootdqn,
        AgentKind::NaiveBootdqn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AgentKind::ExperiorTs => "experior-ts",
            AgentKind::NaiveTs => "naive-ts",
            AgentKind::NaiveUcb => "naive-ucb",
            AgentKind::Bc => "bc",
            AgentKind::OracleTs => "oracle-ts",
            AgentKind::UcbExplore => "ucb-explore",
            AgentKind::ExperiorBootdqn => "experior-bootdqn",
            AgentKind::NaiveBootdqn => "naive-bootdqn",
        }
    }

    pub fn is_bandit(self) -> bool {
        !matches!(self, AgentKind::ExperiorBootdqn | AgentKind::NaiveBootdqn)
    }

    /// Stable index used in seed derivation.
    pub fn id(self) -> u64 {
        AgentKind::ALL.iter().position(|&k| k == self).expect("listed") as u64
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AgentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AgentKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown agent `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentConfig {
    pub kind: AgentKind,
    /// Name in reports; defaults to the kind.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    /// Bandit posterior chain.
    #[serde(default)]
    pub sgld: SgldConfig,
    /// Reference draws for the resampled chain start.
    #[serde(default = "default_candidates")]
    pub prior_candidates: usize,
    /// `c` in `√(c ln t / n)`.
    #[serde(default = "default_ucb_c")]
    pub ucb_c: f64,
    #[serde(default)]
    pub bootdqn: BootDqnConfig,
}

fn default_candidates() -> usize {
    256
}

fn default_ucb_c() -> f64 {
    2.0
}

impl AgentConfig {
    pub fn new(kind: AgentKind) -> Self {
        AgentConfig {
            kind,
            label: None,
            sgld: SgldConfig::default(),
            prior_candidates: default_candidates(),
            ucb_c: default_ucb_c(),
            bootdqn: BootDqnConfig::default(),
        }
    }

    pub fn name(&self) -> &str {
        self.label.as_deref().unwrap_or(self.kind.name())
    }
}

/// What a bandit agent may be built from: never the task itself.
#[derive(Debug, Clone)]
pub struct BanditContext<'a> {
    pub arms: usize,
    pub prior: &'a Arc<GibbsPrior>,
    pub demos: &'a DemoDataset,
    /// Only the oracle baseline reads this.
    pub true_dist: &'a TaskDistribution,
}

pub fn build_bandit_agent(
    cfg: &AgentConfig,
    ctx: &BanditContext<'_>,
    seed: u64,
) -> Result<Box<dyn BanditAgent>> {
    let k = ctx.arms;
    Ok(match cfg.kind {
        AgentKind::ExperiorTs => Box::new(ThompsonAgent::new(
            Arc::clone(ctx.prior),
            &cfg.sgld,
            cfg.prior_candidates,
            seed,
        )?),
        AgentKind::NaiveTs => {
            let empty = GibbsPrior::empty(
                ctx.prior.demos.env,
                ctx.prior.model.clone(),
                ctx.prior.reference.clone(),
                ctx.prior.beta_eff,
            );
            Box::new(ThompsonAgent::new(Arc::new(empty), &cfg.sgld, cfg.prior_candidates, seed)?)
        }
        AgentKind::NaiveUcb => Box::new(UcbAgent::new(k, cfg.ucb_c)),
        AgentKind::UcbExplore => Box::new(UcbAgent::with_demos(k, cfg.ucb_c, ctx.demos)?),
        AgentKind::Bc => Box::new(BcAgent::new(ctx.demos, k, seed)?),
        AgentKind::OracleTs => Box::new(OracleTsAgent::new(ctx.true_dist, seed)?),
        AgentKind::ExperiorBootdqn | AgentKind::NaiveBootdqn => {
            return Err(Error::Unsupported(format!("{} is not a bandit agent", cfg.kind)))
        }
    })
}
