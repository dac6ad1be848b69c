//! Log-posteriors over task parameters and a Langevin sampler for them.

mod posterior;
mod sgld;

pub use posterior::{
    bandit_log_posterior, mdp_log_posterior, posterior_sample, sample_prior_resampled,
    BanditPosterior, MdpPosterior, PosteriorKind, PosteriorSampler,
};
pub use sgld::{sgld_sample, SgldChain, SgldConfig, SgldInit};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::Rng;

/// Coordinates the sampler moves in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Parameterization {
    #[default]
    Unconstrained,
    /// `θ = σ(ξ)` coordinate-wise, mapping `R^K` onto `(0, 1)^K`.
    LogitBox,
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
pub(crate) fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

impl Parameterization {
    pub fn to_theta(self, xi: &[f64]) -> Vec<f64> {
        match self {
            Parameterization::Unconstrained => xi.to_vec(),
            Parameterization::LogitBox => xi.iter().map(|&x| sigmoid(x)).collect(),
        }
    }

    pub fn to_unconstrained(self, theta: &[f64]) -> Result<Vec<f64>> {
        match self {
            Parameterization::Unconstrained => Ok(theta.to_vec()),
            Parameterization::LogitBox => theta
                .iter()
                .map(|&t| {
                    if t > 0.0 && t < 1.0 {
                        Ok(t.ln() - (-t).ln_1p())
                    } else {
                        Err(Error::invalid(format!("{t} is not inside (0, 1)")))
                    }
                })
                .collect(),
        }
    }

    /// `Σ_k ln |∂θ_k/∂ξ_k|`, adding its gradient into `grad`.
    pub fn log_jacobian_into(self, xi: &[f64], grad: &mut [f64]) -> f64 {
        match self {
            Parameterization::Unconstrained => 0.0,
            Parameterization::LogitBox => {
                let mut v = 0.0;
                for (g, &x) in grad.iter_mut().zip(xi) {
                    v -= softplus(x) + softplus(-x);
                    *g += 1.0 - 2.0 * sigmoid(x);
                }
                v
            }
        }
    }
}

/// An unnormalised log-density over task parameters.
pub trait LogDensity {
    fn dim(&self) -> usize;

    fn parameterization(&self) -> Parameterization {
        Parameterization::Unconstrained
    }

    /// Value at `theta`; the `θ`-gradient is added into `grad`.
    fn eval(&self, theta: &[f64], grad: &mut [f64]) -> Result<f64>;

    /// Density of `ξ` (including the log-Jacobian) with the `ξ`-gradient
    /// added into `grad`.
    fn eval_unconstrained(&self, xi: &[f64], grad: &mut [f64]) -> Result<f64> {
        let p = self.parameterization();
        match p {
            Parameterization::Unconstrained => self.eval(xi, grad),
            Parameterization::LogitBox => {
                let theta = p.to_theta(xi);
                let mut g = vec![0.0; theta.len()];
                let v = self.eval(&theta, &mut g)?;
                for ((out, gt), t) in grad.iter_mut().zip(&g).zip(&theta) {
                    *out += gt * t * (1.0 - t);
                }
                Ok(v + p.log_jacobian_into(xi, grad))
            }
        }
    }

    /// Constant diagonal preconditioner `G` for the Langevin step, if any.
    fn preconditioner(&self) -> Option<Vec<f64>> {
        None
    }

    /// A starting point drawn from the reference measure.
    fn sample_reference(&self, _rng: &mut Rng) -> Result<Vec<f64>> {
        Err(Error::Unsupported(
            "this target has no reference measure to start from".into(),
        ))
    }
}

/// Wraps a closure `θ, grad ↦ value` as a [`LogDensity`].
pub struct FnDensity<F> {
    pub dim: usize,
    pub parameterization: Parameterization,
    pub f: F,
}

impl<F> FnDensity<F>
where
    F: Fn(&[f64], &mut [f64]) -> f64,
{
    pub fn new(dim: usize, parameterization: Parameterization, f: F) -> Self {
        FnDensity {
            dim,
            parameterization,
            f,
        }
    }
}

impl<F> LogDensity for FnDensity<F>
where
    F: Fn(&[f64], &mut [f64]) -> f64,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn parameterization(&self) -> Parameterization {
        self.parameterization
    }

    fn eval(&self, theta: &[f64], grad: &mut [f64]) -> Result<f64> {
        Ok((self.f)(theta, grad))
    }
}
