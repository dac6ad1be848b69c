use std::sync::Arc;

use rand::Rng as _;
use rand_distr::{Beta, Distribution};

use crate::domain::DemoDataset;
use crate::envs::{argmax_set, sample_categorical, TaskDistribution};
use crate::error::{Error, Result};
use crate::maxent::GibbsPrior;
use crate::sampling::{
    sample_prior_resampled, BanditPosterior, PosteriorKind, PosteriorSampler, SgldConfig,
};
use crate::seed::{derive_seed, rng_from, Rng};

/// A learner for one bandit task: one pull per episode. It sees only its
/// own arms and rewards.
pub trait BanditAgent {
    fn act(&mut self) -> Result<usize>;
    fn observe(&mut self, arm: usize, reward: f64) -> Result<()>;
}

/// Uniformly random index among the maximisers.
pub(crate) fn argmax_random(values: &[f64], rng: &mut Rng) -> usize {
    let best = argmax_set(values);
    if best.len() == 1 {
        best[0]
    } else {
        best[rng.random_range(0..best.len())]
    }
}

/// Thompson sampling with SGLD draws from the posterior under a Gibbs
/// prior; with an empty prior this is the naive variant.
#[derive(Debug, Clone)]
pub struct ThompsonAgent {
    prior: Arc<GibbsPrior>,
    successes: Vec<f64>,
    failures: Vec<f64>,
    sampler: PosteriorSampler,
    rng: Rng,
}

impl ThompsonAgent {
    /// The chain starts from a resampled prior draw (`candidates` reference
    /// points).
    pub fn new(prior: Arc<GibbsPrior>, sgld: &SgldConfig, candidates: usize, seed: u64) -> Result<Self> {
        let k = prior.dim();
        let mut rng = rng_from(seed, &[0]);
        let start: Vec<f64> = sample_prior_resampled(&prior, candidates.max(1), &mut rng)?
            .0
            .into_iter()
            .map(|t| t.clamp(1e-6, 1.0 - 1e-6))
            .collect();
        let cfg = SgldConfig {
            seed: derive_seed(seed, &[1]),
            ..sgld.clone()
        };
        Ok(ThompsonAgent {
            sampler: PosteriorSampler::new(&start, PosteriorKind::Bandit, &cfg)?,
            prior,
            successes: vec![0.0; k],
            failures: vec![0.0; k],
            rng,
        })
    }

    /// Draws `θ ~ posterior` and returns it without acting.
    pub fn draw(&mut self) -> Result<Vec<f64>> {
        let target =
            BanditPosterior::from_counts(&self.prior, self.successes.clone(), self.failures.clone())?;
        Ok(self.sampler.sample(&target)?.0)
    }
}

impl BanditAgent for ThompsonAgent {
    fn act(&mut self) -> Result<usize> {
        let theta = self.draw()?;
        Ok(argmax_random(&theta, &mut self.rng))
    }

    fn observe(&mut self, arm: usize, reward: f64) -> Result<()> {
        check_arm(arm, self.successes.len())?;
        self.successes[arm] += reward;
        self.failures[arm] += 1.0 - reward;
        Ok(())
    }
}

fn check_arm(arm: usize, k: usize) -> Result<()> {
    if arm >= k {
        return Err(Error::invalid(format!("arm {arm} ≥ K={k}")));
    }
    Ok(())
}

/// `means[k] + √(c ln t / counts[k])`.
pub fn ucb1_index(count: f64, mean: f64, t: f64, c: f64) -> f64 {
    if count == 0.0 {
        return f64::INFINITY;
    }
    mean + (c * t.ln() / count).sqrt()
}

/// UCB1 with unpulled arms first and ties to the lowest index.
pub fn naive_ucb_act(counts: &[f64], means: &[f64], t: f64) -> usize {
    ucb_act_with(counts, means, t, 2.0)
}

fn ucb_act_with(counts: &[f64], means: &[f64], t: f64, c: f64) -> usize {
    if let Some(k) = counts.iter().position(|&n| n == 0.0) {
        return k;
    }
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    for (k, (&n, &m)) in counts.iter().zip(means).enumerate() {
        let v = ucb1_index(n, m, t, c);
        if v > best_v {
            best = k;
            best_v = v;
        }
    }
    best
}

/// UCB over online data merged with optimistically labelled demos: each demo
/// of arm `a` counts as one pull with reward `min(1, UCB index of a)` from
/// the online data alone, or 1 if `a` is unpulled.
pub fn ucb_explore_act(demo_counts: &[f64], counts: &[f64], means: &[f64], c: f64) -> usize {
    let t_online = 1.0 + counts.iter().sum::<f64>();
    let mut merged_n = Vec::with_capacity(counts.len());
    let mut merged_m = Vec::with_capacity(counts.len());
    for ((&d, &n), &m) in demo_counts.iter().zip(counts).zip(means) {
        let pseudo = ucb1_index(n, m, t_online, c).min(1.0);
        let total = n + d;
        merged_n.push(total);
        merged_m.push(if total == 0.0 { 0.0 } else { (n * m + d * pseudo) / total });
    }
    let t = 1.0 + merged_n.iter().sum::<f64>();
    ucb_act_with(&merged_n, &merged_m, t, c)
}

/// UCB1 over online data, optionally merged with demo pseudo-pulls
/// (UCB-ExPLORe).
#[derive(Debug, Clone)]
pub struct UcbAgent {
    counts: Vec<f64>,
    sums: Vec<f64>,
    demo_counts: Option<Vec<f64>>,
    c: f64,
}

impl UcbAgent {
    pub fn new(arms: usize, c: f64) -> Self {
        UcbAgent {
            counts: vec![0.0; arms],
            sums: vec![0.0; arms],
            demo_counts: None,
            c,
        }
    }

    pub fn with_demos(arms: usize, c: f64, demos: &DemoDataset) -> Result<Self> {
        let mut agent = Self::new(arms, c);
        agent.demo_counts = Some(demo_arm_counts(demos, arms)?);
        Ok(agent)
    }

    fn means(&self) -> Vec<f64> {
        self.counts
            .iter()
            .zip(&self.sums)
            .map(|(&n, &s)| if n == 0.0 { 0.0 } else { s / n })
            .collect()
    }
}

impl BanditAgent for UcbAgent {
    fn act(&mut self) -> Result<usize> {
        let means = self.means();
        Ok(match &self.demo_counts {
            Some(d) => ucb_explore_act(d, &self.counts, &means, self.c),
            None => {
                let t = 1.0 + self.counts.iter().sum::<f64>();
                ucb_act_with(&self.counts, &means, t, self.c)
            }
        })
    }

    fn observe(&mut self, arm: usize, reward: f64) -> Result<()> {
        check_arm(arm, self.counts.len())?;
        self.counts[arm] += 1.0;
        self.sums[arm] += reward;
        Ok(())
    }
}

/// Count of demos per arm.
pub fn demo_arm_counts(demos: &DemoDataset, arms: usize) -> Result<Vec<f64>> {
    let mut counts = vec![0.0; arms];
    for t in &demos.trajectories {
        let &(_, a) = t
            .steps
            .first()
            .ok_or_else(|| Error::Dataset("empty trajectory".into()))?;
        check_arm(a, arms)?;
        counts[a] += 1.0;
    }
    Ok(counts)
}

/// Behavior cloning: the empirical demo action distribution, fixed forever.
#[derive(Debug, Clone)]
pub struct BcAgent {
    probs: Vec<f64>,
    rng: Rng,
}

impl BcAgent {
    pub fn new(demos: &DemoDataset, arms: usize, seed: u64) -> Result<Self> {
        if demos.is_empty() {
            return Err(Error::Dataset("behavior cloning needs demonstrations".into()));
        }
        let counts = demo_arm_counts(demos, arms)?;
        let n = demos.len() as f64;
        Ok(BcAgent {
            probs: counts.iter().map(|c| c / n).collect(),
            rng: rng_from(seed, &[0]),
        })
    }

    pub fn policy(&self) -> &[f64] {
        &self.probs
    }
}

impl BanditAgent for BcAgent {
    fn act(&mut self) -> Result<usize> {
        Ok(sample_categorical(&self.probs, &mut self.rng))
    }

    fn observe(&mut self, arm: usize, _reward: f64) -> Result<()> {
        check_arm(arm, self.probs.len())
    }
}

/// Exact Thompson sampling with the true Beta-product prior.
#[derive(Debug, Clone)]
pub struct OracleTsAgent {
    params: Vec<(f64, f64)>,
    successes: Vec<f64>,
    failures: Vec<f64>,
    rng: Rng,
}

impl OracleTsAgent {
    pub fn new(dist: &TaskDistribution, seed: u64) -> Result<Self> {
        match dist {
            TaskDistribution::BetaProduct(params) => {
                dist.validate()?;
                Ok(OracleTsAgent {
                    successes: vec![0.0; params.len()],
                    failures: vec![0.0; params.len()],
                    params: params.clone(),
                    rng: rng_from(seed, &[0]),
                })
            }
            _ => Err(Error::Unsupported(
                "oracle Thompson sampling needs a beta-product distribution".into(),
            )),
        }
    }

    /// Current `Beta(a_k + s_k, b_k + f_k)` parameters.
    pub fn posterior_params(&self) -> Vec<(f64, f64)> {
        self.params
            .iter()
            .zip(self.successes.iter().zip(&self.failures))
            .map(|(&(a, b), (s, f))| (a + s, b + f))
            .collect()
    }

    pub fn draw(&mut self) -> Vec<f64> {
        self.posterior_params()
            .into_iter()
            .map(|(a, b)| Beta::new(a, b).expect("positive parameters").sample(&mut self.rng))
            .collect()
    }
}

impl BanditAgent for OracleTsAgent {
    fn act(&mut self) -> Result<usize> {
        let theta = self.draw();
        Ok(argmax_random(&theta, &mut self.rng))
    }

    fn observe(&mut self, arm: usize, reward: f64) -> Result<()> {
        check_arm(arm, self.params.len())?;
        self.successes[arm] += reward;
        self.failures[arm] += 1.0 - reward;
        Ok(())
    }
}
