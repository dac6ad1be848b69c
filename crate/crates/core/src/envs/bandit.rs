use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::domain::{EnvSignature, TaskParam};
use crate::error::{Error, Result};

/// Lower clamp for sampled beta parameters; Beta(0, ·) is not a distribution.
pub const BETA_PARAM_MIN: f64 = 0.05;
pub const BETA_PARAM_MAX: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BernoulliBanditSpec {
    pub arms: usize,
}

impl BernoulliBanditSpec {
    pub fn new(arms: usize) -> Result<Self> {
        if arms < 2 {
            return Err(Error::invalid(format!("bandit needs K ≥ 2 arms, got {arms}")));
        }
        Ok(BernoulliBanditSpec { arms })
    }

    pub fn signature(&self) -> EnvSignature {
        EnvSignature::Bandit { arms: self.arms }
    }
}

/// Draws a Bernoulli reward with mean `theta[arm]`.
pub fn bernoulli_pull<R: Rng + ?Sized>(theta: &TaskParam, arm: usize, rng: &mut R) -> f64 {
    let p = theta.0[arm];
    if rng.random::<f64>() < p {
        1.0
    } else {
        0.0
    }
}

/// Stochastic linear contextual bandit: the mean reward of arm `a` in
/// context `s` is `features(s, a) · theta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearBanditSpec {
    pub dim: usize,
    pub contexts: usize,
    pub arms: usize,
    /// Row-major `contexts x arms x dim`.
    pub features: Vec<f64>,
    pub context_probs: Vec<f64>,
    pub noise_std: f64,
}

impl LinearBanditSpec {
    pub fn new(
        dim: usize,
        arms: usize,
        features: Vec<f64>,
        context_probs: Vec<f64>,
        noise_std: f64,
    ) -> Result<Self> {
        let contexts = context_probs.len();
        if features.len() != contexts * arms * dim {
            return Err(Error::Dimension {
                expected: contexts * arms * dim,
                actual: features.len(),
            });
        }
        if features.iter().any(|f| !f.is_finite()) {
            return Err(Error::invalid("non-finite feature"));
        }
        let total: f64 = context_probs.iter().sum();
        if context_probs.iter().any(|&p| p < 0.0) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("context distribution must sum to 1"));
        }
        Ok(LinearBanditSpec {
            dim,
            contexts,
            arms,
            features,
            context_probs,
            noise_std,
        })
    }

    pub fn signature(&self) -> EnvSignature {
        EnvSignature::LinearBandit {
            contexts: self.contexts,
            arms: self.arms,
        }
    }

    pub fn feature(&self, context: usize, arm: usize) -> &[f64] {
        let start = (context * self.arms + arm) * self.dim;
        &self.features[start..start + self.dim]
    }

    pub fn mean_rewards(&self, theta: &TaskParam, context: usize) -> Vec<f64> {
        (0..self.arms)
            .map(|a| dot(self.feature(context, a), &theta.0))
            .collect()
    }

    pub fn sample_context<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        sample_categorical(&self.context_probs, rng)
    }

    /// Gaussian reward around the linear mean.
    pub fn pull<R: Rng + ?Sized>(
        &self,
        theta: &TaskParam,
        context: usize,
        arm: usize,
        rng: &mut R,
    ) -> f64 {
        let mean = dot(self.feature(context, arm), &theta.0);
        if self.noise_std > 0.0 {
            Normal::new(mean, self.noise_std)
                .expect("finite mean and positive std")
                .sample(rng)
        } else {
            mean
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn sample_categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // rounding left a sliver of mass past the last bucket
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}
