//! Experiment orchestration: suites over task distributions, regret
//! aggregation, CSV/JSON output and the command line.

pub mod cli;
mod config;
mod report;

pub use config::{DistributionEntry, DistributionSpec, EnvConfig, ExperimentConfig};
pub use report::{
    aggregate, entropy_bin, final_regret_by_distribution, read_aggregate_csv, read_records_csv,
    regress, regret_vs_entropy, write_aggregate_csv, write_records_csv, AggregateRow, EntropyBin,
    EntropyRegression, GroupBy, AGGREGATE_HEADER, RECORDS_HEADER,
};

use std::path::Path;
use std::sync::Arc;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::agents::{
    build_bandit_agent, init_ensemble, AgentConfig, AgentKind, BanditAgent, BanditContext,
    BootDqnAgent, DeepSeaEpisode, EpisodicEnv,
};
use crate::domain::{DemoDataset, RegretRecord, Transition};
use crate::envs::{bernoulli_pull, generate_demos, sample_task, EnvSpec, Task, TaskDistribution};
use crate::error::{Error, Result};
use crate::maxent::{fit_prior, FitReport, GibbsPrior, PriorOptions};
use crate::seed::{derive_seed, rng_from, stream, Rng};

/// `v<crate version>`.
pub const VERSION: &str = concat!("v", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionInfo {
    pub id: u32,
    pub name: String,
    /// Optimal-action entropy in nats.
    pub entropy: f64,
    pub distribution: TaskDistribution,
}

/// A cell that failed and produced no records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub task_dist_id: u32,
    /// `None` when the whole distribution failed (demos or prior fit).
    pub task_id: Option<u32>,
    pub algo: Option<String>,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub name: String,
    pub config_hash: String,
    pub version: String,
    pub seed: u64,
    pub episodes: u32,
    pub tasks: u32,
    pub algos: Vec<String>,
    pub distributions: Vec<DistributionInfo>,
    #[serde(default)]
    pub failures: Vec<CellFailure>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretReport {
    pub metadata: ReportMetadata,
    pub records: Vec<RegretRecord>,
}

impl RegretReport {
    /// `|agents| × |distributions| × tasks × T` for a run without failures.
    pub fn expected_records(&self) -> usize {
        let m = &self.metadata;
        m.algos.len() * m.distributions.len() * m.tasks as usize * m.episodes as usize
    }

    pub fn distribution(&self, id: u32) -> Option<&DistributionInfo> {
        self.metadata.distributions.iter().find(|d| d.id == id)
    }

    /// Entropy bin of every distribution, in id order.
    pub fn entropy_bins(&self, thresholds: (f64, f64)) -> Vec<(u32, EntropyBin)> {
        self.metadata
            .distributions
            .iter()
            .map(|d| (d.id, entropy_bin(d.entropy, thresholds)))
            .collect()
    }

    /// Writes `records.csv`, `report.json` and `aggregate.csv` into `dir`.
    pub fn write_dir(&self, dir: &Path, group_by: &GroupBy) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        write_records_csv(&self.records, std::fs::File::create(dir.join("records.csv"))?)?;
        self.write_json(std::fs::File::create(dir.join("report.json"))?)?;
        if !self.records.is_empty() {
            let rows = aggregate(self, group_by)?;
            write_aggregate_csv(&rows, std::fs::File::create(dir.join("aggregate.csv"))?)?;
        }
        Ok(())
    }

    pub fn write_json<W: std::io::Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer(std::io::BufWriter::new(w), self)?;
        Ok(())
    }

    pub fn read_json<R: std::io::Read>(r: R) -> Result<Self> {
        Ok(serde_json::from_reader(std::io::BufReader::new(r))?)
    }
}

/// Hash of the config fields that affect results (not `workers` or `out`).
pub fn config_hash(cfg: &ExperimentConfig) -> Result<String> {
    let mut canonical = cfg.clone();
    canonical.workers = 1;
    canonical.out = Default::default();
    let text = serde_json::to_string(&canonical)?;
    Ok(Sha256::digest(text.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect())
}

/// Demos and fitted prior shared by every cell of one distribution.
#[derive(Debug, Clone)]
pub struct PreparedDistribution {
    pub entry: DistributionEntry,
    pub demos: DemoDataset,
    pub prior: Arc<GibbsPrior>,
    /// `None` when no agent needed a fitted prior.
    pub fit: Option<FitReport>,
}

/// Demos of one distribution, from its own seed stream.
pub fn distribution_demos(cfg: &ExperimentConfig, entry: &DistributionEntry) -> Result<DemoDataset> {
    let mut rng = rng_from(cfg.seed, &[stream::DEMOS, entry.id as u64]);
    generate_demos(&entry.env, &entry.dist, cfg.expert_beta, cfg.demos, &mut rng)
}

/// Prior options for one distribution: the configured ones with a per-
/// distribution seed.
pub fn distribution_prior_options(cfg: &ExperimentConfig, entry: &DistributionEntry) -> PriorOptions {
    PriorOptions {
        seed: derive_seed(cfg.seed, &[stream::PRIOR, entry.id as u64]),
        ..cfg.prior.clone()
    }
}

/// Generates the demos and, if some agent uses it, fits the prior.
pub fn prepare_distribution(cfg: &ExperimentConfig, entry: &DistributionEntry) -> Result<PreparedDistribution> {
    let demos = distribution_demos(cfg, entry)?;
    let model = entry.env.q_model();
    let reference = cfg.reference(&entry.env);
    let needs_prior = cfg
        .agents
        .iter()
        .any(|a| matches!(a.kind, AgentKind::ExperiorTs | AgentKind::ExperiorBootdqn));
    let (prior, fit) = if needs_prior {
        let opts = distribution_prior_options(cfg, entry);
        let fit = fit_prior(&demos, &reference, &model, &opts)?;
        (fit.prior, Some(fit.report))
    } else {
        (
            GibbsPrior::empty(entry.env.signature(), model, reference, cfg.prior.beta_eff),
            None,
        )
    };
    Ok(PreparedDistribution {
        entry: entry.clone(),
        demos,
        prior: Arc::new(prior),
        fit,
    })
}

/// One bandit episode as played.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BanditStep {
    pub arm: usize,
    pub reward: f64,
    /// `max_k θ_k − θ[arm]`.
    pub instant_regret: f64,
}

/// Runs `agent` for `episodes` pulls on the task `theta`, drawing Bernoulli
/// rewards from `rng`.
pub fn play_bandit(
    agent: &mut dyn BanditAgent,
    task: &Task,
    episodes: usize,
    rng: &mut Rng,
) -> Result<Vec<BanditStep>> {
    let theta = &task.param;
    let best = task.optimal_value;
    (0..episodes)
        .map(|_| {
            let arm = agent.act()?;
            if arm >= theta.len() {
                return Err(Error::invalid(format!("agent chose arm {arm} ≥ K={}", theta.len())));
            }
            let reward = bernoulli_pull(theta, arm, rng);
            agent.observe(arm, reward)?;
            Ok(BanditStep {
                arm,
                reward,
                instant_regret: best - theta.0[arm],
            })
        })
        .collect()
}

/// Anything that plays whole episodes of an [`EpisodicEnv`].
pub trait EpisodicAgent {
    fn run_episode(&mut self, env: &mut dyn EpisodicEnv) -> Result<Vec<Transition>>;
}

impl EpisodicAgent for BootDqnAgent {
    fn run_episode(&mut self, env: &mut dyn EpisodicEnv) -> Result<Vec<Transition>> {
        BootDqnAgent::run_episode(self, env)
    }
}

/// Per-episode total reward of `agent` over `episodes` episodes.
pub fn play_episodes(
    agent: &mut dyn EpisodicAgent,
    env: &mut dyn EpisodicEnv,
    episodes: usize,
) -> Result<Vec<f64>> {
    (0..episodes)
        .map(|_| Ok(agent.run_episode(env)?.iter().map(|t| t.reward).sum()))
        .collect()
}

/// Seed of one (distribution, task, agent) cell.
pub fn cell_seed(master: u64, dist: u32, task: u32, agent: &AgentConfig) -> u64 {
    derive_seed(master, &[stream::AGENT, dist as u64, task as u64, agent.kind.id()])
}

/// The task of cell `(dist, task)`; every agent sees the same one.
pub fn cell_task(cfg: &ExperimentConfig, entry: &DistributionEntry, task: u32) -> Result<Task> {
    let mut rng = rng_from(cfg.seed, &[stream::TASK, entry.id as u64, task as u64]);
    sample_task(&entry.dist, &entry.env, &mut rng)
}

fn bandit_cell(
    cfg: &ExperimentConfig,
    prep: &PreparedDistribution,
    task_id: u32,
    agent_cfg: &AgentConfig,
) -> Result<Vec<RegretRecord>> {
    let entry = &prep.entry;
    let task = cell_task(cfg, entry, task_id)?;
    let seed = cell_seed(cfg.seed, entry.id, task_id, agent_cfg);
    let ctx = BanditContext {
        arms: entry.env.q_model().num_actions(),
        prior: &prep.prior,
        demos: &prep.demos,
        true_dist: &entry.dist,
    };
    let mut agent = build_bandit_agent(agent_cfg, &ctx, seed)?;
    let mut rewards = rng_from(cfg.seed, &[stream::ENV, entry.id as u64, task_id as u64]);
    let steps = play_bandit(agent.as_mut(), &task, cfg.episodes, &mut rewards)?;
    Ok(steps
        .into_iter()
        .enumerate()
        .map(|(t, s)| RegretRecord {
            algo: agent_cfg.name().to_string(),
            task_dist_id: entry.id,
            task_id,
            seed,
            episode: t as u32 + 1,
            reward: s.reward,
            instant_regret: s.instant_regret,
        })
        .collect())
}

fn deepsea_cell(
    cfg: &ExperimentConfig,
    prep: &PreparedDistribution,
    task_id: u32,
    agent_cfg: &AgentConfig,
) -> Result<Vec<RegretRecord>> {
    let entry = &prep.entry;
    let spec = match &entry.env {
        EnvSpec::DeepSea(spec) => spec,
        other => return Err(Error::Unsupported(format!("deep sea suite on {}", other.signature()))),
    };
    let task = cell_task(cfg, entry, task_id)?;
    let goal = task.goal.expect("deep sea tasks carry a goal");
    let seed = cell_seed(cfg.seed, entry.id, task_id, agent_cfg);
    let model = entry.env.q_model();
    let prior = match agent_cfg.kind {
        AgentKind::ExperiorBootdqn => Some(prep.prior.as_ref()),
        AgentKind::NaiveBootdqn => None,
        other => return Err(Error::Unsupported(format!("{other} on deep sea"))),
    };
    let ensemble = init_ensemble(prior, &model, &agent_cfg.bootdqn, derive_seed(seed, &[0]))?;
    let mut agent = BootDqnAgent::new(model, ensemble, agent_cfg.bootdqn.clone(), derive_seed(seed, &[1]))?;
    let mut env = DeepSeaEpisode::new(spec, goal)?;
    let rewards = play_episodes(&mut agent, &mut env, cfg.episodes)?;
    Ok(rewards
        .into_iter()
        .enumerate()
        .map(|(t, r)| RegretRecord {
            algo: agent_cfg.name().to_string(),
            task_dist_id: entry.id,
            task_id,
            seed,
            episode: t as u32 + 1,
            reward: r,
            instant_regret: task.optimal_value - r,
        })
        .collect())
}

type CellFn = fn(&ExperimentConfig, &PreparedDistribution, u32, &AgentConfig) -> Result<Vec<RegretRecord>>;

/// Runs every (distribution, task, agent) cell of a bandit config.
pub fn run_bandit_suite(cfg: &ExperimentConfig) -> Result<RegretReport> {
    if !matches!(cfg.env, EnvConfig::Bandit { .. }) {
        return Err(Error::Config("run_bandit_suite needs a bandit env".into()));
    }
    run_suite(cfg, bandit_cell)
}

/// Runs every (goal distribution, seed, agent) cell of a Deep Sea config;
/// `tasks` is the number of seeds, each with a freshly sampled goal.
pub fn run_deepsea_suite(cfg: &ExperimentConfig) -> Result<RegretReport> {
    if !matches!(cfg.env, EnvConfig::DeepSea { .. }) {
        return Err(Error::Config("run_deepsea_suite needs a deep-sea env".into()));
    }
    run_suite(cfg, deepsea_cell)
}

fn run_suite(cfg: &ExperimentConfig, cell: CellFn) -> Result<RegretReport> {
    cfg.validate()?;
    let mut names: Vec<&str> = cfg.agents.iter().map(AgentConfig::name).collect();
    names.sort_unstable();
    if names.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Config("agent names must be unique; set `label`".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    pool.install(|| {
        let entries = cfg.task_distributions()?;
        let preps: Vec<Result<PreparedDistribution>> =
            entries.par_iter().map(|e| prepare_distribution(cfg, e)).collect();

        let mut failures = Vec::new();
        let mut cells = Vec::new();
        for (entry, prep) in entries.iter().zip(&preps) {
            match prep {
                Ok(p) => {
                    for task in 0..cfg.tasks as u32 {
                        for agent in &cfg.agents {
                            cells.push((p, task, agent));
                        }
                    }
                }
                Err(e) => failures.push(CellFailure {
                    task_dist_id: entry.id,
                    task_id: None,
                    algo: None,
                    error: e.to_string(),
                }),
            }
        }
        let results: Vec<Result<Vec<RegretRecord>>> = cells
            .par_iter()
            .map(|&(p, task, agent)| cell(cfg, p, task, agent))
            .collect();

        let mut records = Vec::with_capacity(cells.len() * cfg.episodes);
        for ((p, task, agent), r) in cells.iter().zip(results) {
            match r {
                Ok(rs) => records.extend(rs),
                Err(e) => failures.push(CellFailure {
                    task_dist_id: p.entry.id,
                    task_id: Some(*task),
                    algo: Some(agent.name().to_string()),
                    error: e.to_string(),
                }),
            }
        }
        for f in &failures {
            eprintln!(
                "warning: cell failed (distribution {}, task {:?}, agent {:?}): {}",
                f.task_dist_id, f.task_id, f.algo, f.error
            );
        }
        Ok(RegretReport {
            metadata: ReportMetadata {
                name: cfg.name.clone(),
                config_hash: config_hash(cfg)?,
                version: VERSION.to_string(),
                seed: cfg.seed,
                episodes: cfg.episodes as u32,
                tasks: cfg.tasks as u32,
                algos: cfg.agents.iter().map(|a| a.name().to_string()).collect(),
                distributions: entries
                    .iter()
                    .map(|e| DistributionInfo {
                        id: e.id,
                        name: e.name.clone(),
                        entropy: e.entropy,
                        distribution: e.dist.clone(),
                    })
                    .collect(),
                failures,
            },
            records,
        })
    })
}

/// An agent that picks actions uniformly at random; a reference point for
/// episodic tasks.
#[derive(Debug, Clone)]
pub struct RandomEpisodicAgent {
    actions: usize,
    rng: Rng,
}

impl RandomEpisodicAgent {
    pub fn new(actions: usize, seed: u64) -> Self {
        RandomEpisodicAgent {
            actions,
            rng: rng_from(seed, &[]),
        }
    }
}

impl EpisodicAgent for RandomEpisodicAgent {
    fn run_episode(&mut self, env: &mut dyn EpisodicEnv) -> Result<Vec<Transition>> {
        let mut s = env.reset();
        let mut out = Vec::new();
        loop {
            let a = self.rng.random_range(0..self.actions);
            let (reward, next, done) = env.step(a)?;
            out.push(Transition {
                state: s,
                action: a,
                reward,
                next_state: next,
                done,
            });
            if done {
                return Ok(out);
            }
            s = next;
        }
    }
}
