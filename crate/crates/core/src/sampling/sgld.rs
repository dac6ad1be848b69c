use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::domain::TaskParam;
use crate::error::{Error, Result};
use crate::seed::Rng;

use super::{LogDensity, Parameterization};

/// Where a chain starts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SgldInit {
    /// A draw from the target's reference measure.
    PriorSample,
    Param(TaskParam),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SgldConfig {
    pub step_size: f64,
    pub steps: usize,
    pub thinning: usize,
    pub temperature: f64,
    pub seed: u64,
    pub init: SgldInit,
}

impl Default for SgldConfig {
    fn default() -> Self {
        SgldConfig {
            step_size: 1e-2,
            steps: 200,
            thinning: 1,
            temperature: 1.0,
            seed: 0,
            init: SgldInit::PriorSample,
        }
    }
}

impl SgldConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::invalid(format!("SGLD step size {} must be > 0", self.step_size)));
        }
        if self.thinning == 0 {
            return Err(Error::invalid("SGLD thinning must be ≥ 1"));
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(Error::invalid("SGLD temperature must be finite and ≥ 0"));
        }
        Ok(())
    }
}

/// A Langevin chain in the unconstrained coordinates `ξ`. It owns its state
/// and noise stream, so it can be resumed across episodes.
#[derive(Debug, Clone)]
pub struct SgldChain {
    xi: Vec<f64>,
    grad: Vec<f64>,
    rng: Rng,
    parameterization: Parameterization,
    pub step_size: f64,
    pub temperature: f64,
    steps_taken: usize,
}

impl SgldChain {
    /// Chain started at `theta` (in the constrained space).
    pub fn new(
        theta: &[f64],
        parameterization: Parameterization,
        step_size: f64,
        temperature: f64,
        seed: u64,
    ) -> Result<Self> {
        Self::with_rng(theta, parameterization, step_size, temperature, Rng::seed_from_u64(seed))
    }

    pub fn with_rng(
        theta: &[f64],
        parameterization: Parameterization,
        step_size: f64,
        temperature: f64,
        rng: Rng,
    ) -> Result<Self> {
        let xi = parameterization.to_unconstrained(theta)?;
        Ok(SgldChain {
            grad: vec![0.0; xi.len()],
            xi,
            rng,
            parameterization,
            step_size,
            temperature,
            steps_taken: 0,
        })
    }

    pub fn theta(&self) -> TaskParam {
        TaskParam(self.parameterization.to_theta(&self.xi))
    }

    pub fn unconstrained(&self) -> &[f64] {
        &self.xi
    }

    /// Total steps since construction.
    pub fn steps_taken(&self) -> usize {
        self.steps_taken
    }

    pub fn rng_mut(&mut self) -> &mut Rng {
        &mut self.rng
    }

    /// Restarts the chain at `theta`, keeping its noise stream.
    pub fn reset(&mut self, theta: &[f64]) -> Result<()> {
        self.xi = self.parameterization.to_unconstrained(theta)?;
        Ok(())
    }

    /// `ξ ← ξ + (η/2)∇log p(ξ) + √(ηT)·N(0, I)`, or with `ηG` in place of
    /// `η` when the target supplies a preconditioner `G`.
    pub fn step(&mut self, target: &dyn LogDensity) -> Result<()> {
        let g = target.preconditioner();
        self.step_with(target, g.as_deref())
    }

    fn step_with(&mut self, target: &dyn LogDensity, precond: Option<&[f64]>) -> Result<()> {
        if target.dim() != self.xi.len() {
            return Err(Error::Dimension {
                expected: self.xi.len(),
                actual: target.dim(),
            });
        }
        self.grad.iter_mut().for_each(|g| *g = 0.0);
        target.eval_unconstrained(&self.xi, &mut self.grad)?;
        if self.grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFiniteGradient {
                step: self.steps_taken,
            });
        }
        for (k, (x, g)) in self.xi.iter_mut().zip(&self.grad).enumerate() {
            let eta = self.step_size * precond.map_or(1.0, |p| p[k]);
            let z: f64 = StandardNormal.sample(&mut self.rng);
            *x += 0.5 * eta * g + (eta * self.temperature).sqrt() * z;
        }
        self.steps_taken += 1;
        Ok(())
    }

    pub fn run(&mut self, target: &dyn LogDensity, steps: usize) -> Result<TaskParam> {
        let g = target.preconditioner();
        for _ in 0..steps {
            self.step_with(target, g.as_deref())?;
        }
        Ok(self.theta())
    }
}

/// Runs one chain for `cfg.steps` and returns every `thinning`-th iterate in
/// the constrained space; `steps = 0` returns just the start.
pub fn sgld_sample(target: &dyn LogDensity, cfg: &SgldConfig) -> Result<Vec<TaskParam>> {
    cfg.validate()?;
    let mut rng = Rng::seed_from_u64(cfg.seed);
    let start = match &cfg.init {
        SgldInit::Param(p) => p.0.clone(),
        SgldInit::PriorSample => target.sample_reference(&mut rng)?,
    };
    if start.len() != target.dim() {
        return Err(Error::Dimension {
            expected: target.dim(),
            actual: start.len(),
        });
    }
    let mut chain = SgldChain::with_rng(
        &start,
        target.parameterization(),
        cfg.step_size,
        cfg.temperature,
        rng,
    )?;
    if cfg.steps == 0 {
        return Ok(vec![chain.theta()]);
    }
    let mut out = Vec::with_capacity(cfg.steps / cfg.thinning);
    let g = target.preconditioner();
    for i in 1..=cfg.steps {
        chain.step_with(target, g.as_deref())?;
        if i % cfg.thinning == 0 {
            out.push(chain.theta());
        }
    }
    Ok(out)
}
