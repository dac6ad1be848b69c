use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::domain::{TaskParam, Transition};
use crate::envs::{Cell, DeepSeaSpec, QModel};
use crate::error::{Error, Result};
use crate::maxent::GibbsPrior;
use crate::sampling::{
    sample_prior_resampled, MdpPosterior, SgldChain, SgldConfig,
};
use crate::seed::{derive_seed, Rng};

use super::bandit::argmax_random;

/// An episodic environment seen from the agent's side: states and rewards
/// only.
pub trait EpisodicEnv {
    /// Starts an episode and returns the initial state id.
    fn reset(&mut self) -> usize;
    /// Returns `(reward, next state, done)`.
    fn step(&mut self, action: usize) -> Result<(f64, usize, bool)>;
}

/// A Deep Sea task with its goal hidden behind [`EpisodicEnv`].
#[derive(Debug, Clone)]
pub struct DeepSeaEpisode<'a> {
    spec: &'a DeepSeaSpec,
    goal: usize,
    cell: Cell,
}

impl<'a> DeepSeaEpisode<'a> {
    pub fn new(spec: &'a DeepSeaSpec, goal: usize) -> Result<Self> {
        if goal >= spec.size {
            return Err(Error::invalid(format!("goal column {goal} ≥ M={}", spec.size)));
        }
        Ok(DeepSeaEpisode {
            spec,
            goal,
            cell: spec.start(),
        })
    }
}

impl EpisodicEnv for DeepSeaEpisode<'_> {
    fn reset(&mut self) -> usize {
        self.cell = self.spec.start();
        self.spec.state_id(self.cell)
    }

    fn step(&mut self, action: usize) -> Result<(f64, usize, bool)> {
        let st = self.spec.step(self.cell, action, self.goal)?;
        self.cell = st.next;
        Ok((st.reward, self.spec.state_id(st.next), st.done))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BootDqnConfig {
    pub ensemble_size: usize,
    pub learning_rate: f64,
    /// Minibatch gradient steps per member after each episode.
    pub grad_steps: usize,
    pub batch_size: usize,
    /// Probability that a member trains on a given transition.
    pub mask_prob: f64,
    /// Std of the naive variant's Gaussian Q-table initialisation.
    pub init_std: f64,
    /// Chain used to draw ensemble members from the prior.
    pub prior_sgld: SgldConfig,
    /// Reference draws per member for the resampled chain start.
    pub prior_candidates: usize,
}

impl Default for BootDqnConfig {
    fn default() -> Self {
        BootDqnConfig {
            ensemble_size: 8,
            learning_rate: 0.5,
            grad_steps: 32,
            batch_size: 32,
            mask_prob: 0.8,
            init_std: 0.1,
            prior_sgld: SgldConfig {
                step_size: 5e-4,
                steps: 200,
                ..SgldConfig::default()
            },
            prior_candidates: 256,
        }
    }
}

impl BootDqnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.ensemble_size == 0 {
            return Err(Error::invalid("ensemble size must be ≥ 1"));
        }
        if self.ensemble_size > 64 {
            return Err(Error::invalid("ensemble size must be ≤ 64"));
        }
        if !(0.0..=1.0).contains(&self.mask_prob) {
            return Err(Error::invalid("mask probability must lie in [0, 1]"));
        }
        if !(self.learning_rate >= 0.0 && self.init_std >= 0.0) {
            return Err(Error::invalid("learning rate and init std must be ≥ 0"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be ≥ 1"));
        }
        self.prior_sgld.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleState {
    pub members: Vec<TaskParam>,
    /// Member acting in the current episode.
    pub active: usize,
}

impl EnsembleState {
    pub fn new(members: Vec<TaskParam>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::invalid("ensemble needs at least one member"));
        }
        Ok(EnsembleState { members, active: 0 })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Transitions with per-member bootstrap masks drawn once at insertion.
#[derive(Debug, Clone, Default)]
pub struct ReplayBuffer {
    transitions: Vec<Transition>,
    masks: Vec<u64>,
}

impl ReplayBuffer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, t: Transition, members: usize, mask_prob: f64, rng: &mut Rng) {
        let mut mask = 0u64;
        for m in 0..members {
            if rng.random_bool(mask_prob) {
                mask |= 1 << m;
            }
        }
        self.push_masked(t, mask);
    }

    pub fn push_masked(&mut self, t: Transition, mask: u64) {
        self.transitions.push(t);
        self.masks.push(mask);
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn includes(&self, index: usize, member: usize) -> bool {
        self.masks[index] >> member & 1 == 1
    }
}

/// Picks a member uniformly and acts greedily on its Q-table (ties broken
/// uniformly) until the episode ends.
pub fn bootdqn_episode(
    env: &mut dyn EpisodicEnv,
    model: &QModel,
    ensemble: &mut EnsembleState,
    rng: &mut Rng,
) -> Result<Vec<Transition>> {
    if ensemble.is_empty() {
        return Err(Error::invalid("empty ensemble"));
    }
    ensemble.active = rng.random_range(0..ensemble.len());
    let theta = &ensemble.members[ensemble.active].0;
    let mut q = vec![0.0; model.num_actions()];
    let mut s = env.reset();
    let mut out = Vec::new();
    for _ in 0..100_000 {
        model.q_values_into(theta, s, &mut q);
        let a = argmax_random(&q, rng);
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
    Err(Error::invalid("episode did not terminate"))
}

/// Minibatch gradient ascent on each member's TD term `-½ Σ δ²` (residual
/// gradient through both `Q(s, a)` and `max Q(s', ·)`). Transitions masked
/// out for a member contribute nothing to its gradient.
pub fn bootdqn_update(
    ensemble: &mut EnsembleState,
    buffer: &ReplayBuffer,
    model: &QModel,
    cfg: &BootDqnConfig,
    rng: &mut Rng,
) -> Result<()> {
    if buffer.is_empty() {
        return Err(Error::invalid("empty replay buffer"));
    }
    let k = model.num_actions();
    let n = buffer.len();
    let scale = cfg.learning_rate / cfg.batch_size as f64;
    let mut updates: Vec<(usize, f64)> = Vec::with_capacity(2 * cfg.batch_size);
    for (m, member) in ensemble.members.iter_mut().enumerate() {
        let theta = &mut member.0;
        model.check(theta)?;
        for _ in 0..cfg.grad_steps {
            updates.clear();
            for _ in 0..cfg.batch_size {
                let i = rng.random_range(0..n);
                if !buffer.includes(i, m) {
                    continue;
                }
                let t = &buffer.transitions[i];
                let sa = t.state * k + t.action;
                let mut delta = t.reward - theta[sa];
                let mut next_best = None;
                if !t.done {
                    let row = &theta[t.next_state * k..(t.next_state + 1) * k];
                    let (b, v) = row
                        .iter()
                        .enumerate()
                        .fold((0, f64::NEG_INFINITY), |acc, (j, &q)| if q > acc.1 { (j, q) } else { acc });
                    delta += v;
                    next_best = Some(t.next_state * k + b);
                }
                updates.push((sa, delta));
                if let Some(j) = next_best {
                    updates.push((j, -delta));
                }
            }
            for &(j, g) in &updates {
                theta[j] += scale * g;
            }
        }
    }
    Ok(())
}

/// Ensemble initialisation: with a prior, one chain per member on the prior
/// density (started from a resampled prior draw); without, i.i.d.
/// `N(0, init_std²)` tables.
pub fn init_ensemble(
    prior: Option<&GibbsPrior>,
    model: &QModel,
    cfg: &BootDqnConfig,
    seed: u64,
) -> Result<EnsembleState> {
    cfg.validate()?;
    let dim = model.dim();
    let members = (0..cfg.ensemble_size as u64)
        .map(|m| {
            let mut rng = crate::seed::rng_from(seed, &[m]);
            match prior {
                None => {
                    let normal = Normal::new(0.0, cfg.init_std).map_err(|e| Error::invalid(e.to_string()))?;
                    Ok(TaskParam((0..dim).map(|_| normal.sample(&mut rng)).collect()))
                }
                Some(p) => {
                    if p.model != *model {
                        return Err(Error::invalid("prior was fit for a different Q model"));
                    }
                    let start = sample_prior_resampled(p, cfg.prior_candidates.max(1), &mut rng)?;
                    if cfg.prior_sgld.steps == 0 || !p.beta_eff.is_finite() {
                        return Ok(start);
                    }
                    let target = MdpPosterior::from_transitions(p, Vec::new());
                    let mut chain = SgldChain::new(
                        &start.0,
                        crate::sampling::Parameterization::Unconstrained,
                        cfg.prior_sgld.step_size,
                        cfg.prior_sgld.temperature,
                        derive_seed(seed, &[m, 1]),
                    )?;
                    chain.run(&target, cfg.prior_sgld.steps)
                }
            }
        })
        .collect::<Result<Vec<_>>>()?;
    EnsembleState::new(members)
}

/// Bootstrapped DQN over a tabular Q model.
#[derive(Debug, Clone)]
pub struct BootDqnAgent {
    pub model: QModel,
    pub ensemble: EnsembleState,
    pub buffer: ReplayBuffer,
    pub cfg: BootDqnConfig,
    rng: Rng,
}

impl BootDqnAgent {
    pub fn new(model: QModel, ensemble: EnsembleState, cfg: BootDqnConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        Ok(BootDqnAgent {
            model,
            ensemble,
            buffer: ReplayBuffer::new(),
            cfg,
            rng: crate::seed::rng_from(seed, &[u64::MAX]),
        })
    }

    /// Plays one episode, stores it and trains.
    pub fn run_episode(&mut self, env: &mut dyn EpisodicEnv) -> Result<Vec<Transition>> {
        let episode = bootdqn_episode(env, &self.model, &mut self.ensemble, &mut self.rng)?;
        for t in &episode {
            self.buffer
                .push(*t, self.ensemble.len(), self.cfg.mask_prob, &mut self.rng);
        }
        bootdqn_update(&mut self.ensemble, &self.buffer, &self.model, &self.cfg, &mut self.rng)?;
        Ok(episode)
    }
}
