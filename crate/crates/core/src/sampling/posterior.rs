use rand::Rng as _;

use crate::domain::{OnlineHistory, TaskParam, Transition};
use crate::envs::sample_categorical;
use crate::error::{Error, Result};
use crate::maxent::{GibbsPrior, ReferencePrior};
use crate::seed::Rng;

use super::sgld::{SgldChain, SgldConfig};
use super::{sigmoid, softplus, LogDensity, Parameterization};

/// Bernoulli-bandit posterior: reward log-likelihood plus the prior's
/// log-density. The reference measure is taken to be uniform on `(0, 1)^K`.
#[derive(Debug, Clone)]
pub struct BanditPosterior<'a> {
    prior: &'a GibbsPrior,
    successes: Vec<f64>,
    failures: Vec<f64>,
}

impl<'a> BanditPosterior<'a> {
    pub fn new(prior: &'a GibbsPrior, history: &OnlineHistory) -> Result<Self> {
        let mut post = Self::from_counts(
            prior,
            vec![0.0; prior.dim()],
            vec![0.0; prior.dim()],
        )?;
        for t in history.transitions() {
            post.observe(t.action, t.reward)?;
        }
        Ok(post)
    }

    /// Per-arm reward sums and their complements.
    pub fn from_counts(prior: &'a GibbsPrior, successes: Vec<f64>, failures: Vec<f64>) -> Result<Self> {
        for v in [&successes, &failures] {
            if v.len() != prior.dim() {
                return Err(Error::Dimension {
                    expected: prior.dim(),
                    actual: v.len(),
                });
            }
        }
        Ok(BanditPosterior {
            prior,
            successes,
            failures,
        })
    }

    pub fn observe(&mut self, arm: usize, reward: f64) -> Result<()> {
        if arm >= self.successes.len() {
            return Err(Error::invalid(format!("arm {arm} out of range")));
        }
        if !(0.0..=1.0).contains(&reward) {
            return Err(Error::invalid(format!("Bernoulli reward {reward} outside [0, 1]")));
        }
        self.successes[arm] += reward;
        self.failures[arm] += 1.0 - reward;
        Ok(())
    }
}

impl LogDensity for BanditPosterior<'_> {
    fn dim(&self) -> usize {
        self.prior.dim()
    }

    fn parameterization(&self) -> Parameterization {
        Parameterization::LogitBox
    }

    fn eval(&self, theta: &[f64], grad: &mut [f64]) -> Result<f64> {
        self.prior.model.check(theta)?;
        let mut v = 0.0;
        for (k, &t) in theta.iter().enumerate() {
            if !(t > 0.0 && t < 1.0) {
                return Err(Error::invalid(format!("θ_{k}={t} is not inside (0, 1)")));
            }
            let (s, f) = (self.successes[k], self.failures[k]);
            v += s * t.ln() + f * (-t).ln_1p();
            grad[k] += s / t - f / (1.0 - t);
        }
        Ok(v + self.prior.log_prior_pdf_with_gradient(theta, grad)?)
    }

    // Works with ln σ(ξ) = -softplus(-ξ) directly so saturated coordinates
    // stay finite.
    fn eval_unconstrained(&self, xi: &[f64], grad: &mut [f64]) -> Result<f64> {
        self.prior.model.check(xi)?;
        let theta: Vec<f64> = xi.iter().map(|&x| sigmoid(x)).collect();
        let mut v = 0.0;
        for (k, (&x, &t)) in xi.iter().zip(&theta).enumerate() {
            let (s, f) = (self.successes[k] + 1.0, self.failures[k] + 1.0);
            v -= s * softplus(-x) + f * softplus(x);
            grad[k] += s * (1.0 - t) - f * t;
        }
        if !self.prior.is_empty() {
            let mut g = vec![0.0; theta.len()];
            v += self.prior.log_prior_pdf_with_gradient(&theta, &mut g)?;
            for ((out, gt), t) in grad.iter_mut().zip(&g).zip(&theta) {
                *out += gt * t * (1.0 - t);
            }
        }
        Ok(v)
    }

    /// Shrinks the step for arms with many pulls, whose likelihood curvature
    /// in logit space grows like `n θ(1-θ)`.
    fn preconditioner(&self) -> Option<Vec<f64>> {
        Some(
            self.successes
                .iter()
                .zip(&self.failures)
                .map(|(s, f)| 1.0 / (1.0 + (s + f) / 8.0))
                .collect(),
        )
    }

    fn sample_reference(&self, rng: &mut Rng) -> Result<Vec<f64>> {
        Ok((0..self.dim())
            .map(|_| rng.random_range(1e-6..1.0 - 1e-6))
            .collect())
    }
}

/// `Σ r ln θ_a + (1 - r) ln(1 - θ_a) + log_prior_pdf(θ)` and its gradient.
pub fn bandit_log_posterior(
    theta: &[f64],
    history: &OnlineHistory,
    prior: &GibbsPrior,
) -> Result<(f64, Vec<f64>)> {
    let post = BanditPosterior::new(prior, history)?;
    let mut grad = vec![0.0; theta.len()];
    let v = post.eval(theta, &mut grad)?;
    Ok((v, grad))
}

/// Q-table posterior: unit-variance Gaussian Bellman residuals plus the prior.
#[derive(Debug, Clone)]
pub struct MdpPosterior<'a> {
    prior: &'a GibbsPrior,
    transitions: Vec<Transition>,
    /// Adds `ln μ0(θ)`, which makes the target proper for sampling.
    pub include_reference: bool,
}

impl<'a> MdpPosterior<'a> {
    pub fn new(prior: &'a GibbsPrior, history: &OnlineHistory) -> Self {
        MdpPosterior {
            prior,
            transitions: history.transitions().copied().collect(),
            include_reference: true,
        }
    }

    pub fn from_transitions(prior: &'a GibbsPrior, transitions: Vec<Transition>) -> Self {
        MdpPosterior {
            prior,
            transitions,
            include_reference: true,
        }
    }
}

/// Adds the gradient of `-½ δ²` over `transitions` into `grad` and returns
/// the value. The max over next actions takes its first maximiser.
pub(crate) fn td_term(
    model: &crate::envs::QModel,
    theta: &[f64],
    transitions: &[Transition],
    grad: &mut [f64],
) -> Result<f64> {
    let k = model.num_actions();
    let mut next = vec![0.0; k];
    let mut v = 0.0;
    for t in transitions {
        if t.state >= model.num_states()
            || (!t.done && t.next_state >= model.num_states())
            || t.action >= k
        {
            return Err(Error::invalid(format!("transition {t:?} outside the model")));
        }
        let q_sa = theta[t.state * k + t.action];
        let (cont, best) = if t.done {
            (0.0, None)
        } else {
            model.q_values_into(theta, t.next_state, &mut next);
            let (b, m) = next
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |acc, (i, &q)| if q > acc.1 { (i, q) } else { acc });
            (m, Some(b))
        };
        let delta = t.reward + cont - q_sa;
        v -= 0.5 * delta * delta;
        model.add_q_gradient(t.state, t.action, delta, grad);
        if let Some(b) = best {
            model.add_q_gradient(t.next_state, b, -delta, grad);
        }
    }
    Ok(v)
}

impl LogDensity for MdpPosterior<'_> {
    fn dim(&self) -> usize {
        self.prior.dim()
    }

    fn eval(&self, theta: &[f64], grad: &mut [f64]) -> Result<f64> {
        let model = &self.prior.model;
        model.check(theta)?;
        if !matches!(model, crate::envs::QModel::Tabular { .. }) {
            return Err(Error::Unsupported("MDP posterior needs a tabular Q model".into()));
        }
        let mut v = td_term(model, theta, &self.transitions, grad)?;
        v += self.prior.log_prior_pdf_with_gradient(theta, grad)?;
        if self.include_reference {
            v += match &self.prior.reference {
                ReferencePrior::Points { .. } => 0.0,
                r => r.log_density_into(theta, grad)?,
            };
        }
        Ok(v)
    }

    fn sample_reference(&self, rng: &mut Rng) -> Result<Vec<f64>> {
        Ok(self.prior.reference.sample(rng).0)
    }
}

/// `-½ Σ δ² + log_prior_pdf(θ)` and its gradient, without the reference term.
pub fn mdp_log_posterior(
    theta: &[f64],
    history: &OnlineHistory,
    prior: &GibbsPrior,
) -> Result<(f64, Vec<f64>)> {
    let mut post = MdpPosterior::new(prior, history);
    post.include_reference = false;
    let mut grad = vec![0.0; theta.len()];
    let v = post.eval(theta, &mut grad)?;
    Ok((v, grad))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PosteriorKind {
    Bandit,
    Mdp,
}

impl PosteriorKind {
    pub fn parameterization(self) -> Parameterization {
        match self {
            PosteriorKind::Bandit => Parameterization::LogitBox,
            PosteriorKind::Mdp => Parameterization::Unconstrained,
        }
    }
}

/// Persistent chain for repeated posterior draws: each call continues from
/// the previous sample with a fixed step budget.
#[derive(Debug, Clone)]
pub struct PosteriorSampler {
    pub chain: SgldChain,
    pub kind: PosteriorKind,
    pub steps: usize,
}

impl PosteriorSampler {
    pub fn new(init: &[f64], kind: PosteriorKind, cfg: &SgldConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(PosteriorSampler {
            chain: SgldChain::new(
                init,
                kind.parameterization(),
                cfg.step_size,
                cfg.temperature,
                cfg.seed,
            )?,
            kind,
            steps: cfg.steps,
        })
    }

    pub fn sample(&mut self, target: &dyn LogDensity) -> Result<TaskParam> {
        self.chain.run(target, self.steps)
    }
}

/// One posterior draw given the history so far.
pub fn posterior_sample(
    sampler: &mut PosteriorSampler,
    prior: &GibbsPrior,
    history: &OnlineHistory,
) -> Result<TaskParam> {
    match sampler.kind {
        PosteriorKind::Bandit => {
            let target = BanditPosterior::new(prior, history)?;
            sampler.sample(&target)
        }
        PosteriorKind::Mdp => {
            let target = MdpPosterior::new(prior, history);
            sampler.sample(&target)
        }
    }
}

/// Approximate prior draw by sampling-importance-resampling: `candidates`
/// reference draws, one kept with probability `∝ exp(log_prior_pdf)`.
pub fn sample_prior_resampled(
    prior: &GibbsPrior,
    candidates: usize,
    rng: &mut Rng,
) -> Result<TaskParam> {
    if candidates == 0 {
        return Err(Error::invalid("need at least one candidate"));
    }
    let draws: Vec<TaskParam> = (0..candidates).map(|_| prior.reference.sample(rng)).collect();
    if prior.is_empty() || candidates == 1 {
        return Ok(draws.into_iter().next().expect("nonempty"));
    }
    let logs = draws
        .iter()
        .map(|d| prior.log_prior_pdf(&d.0))
        .collect::<Result<Vec<f64>>>()?;
    let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logs.iter().map(|l| (l - m).exp()).collect();
    let z: f64 = w.iter().sum();
    let probs: Vec<f64> = w.iter().map(|x| x / z).collect();
    Ok(draws[sample_categorical(&probs, rng)].clone())
}
