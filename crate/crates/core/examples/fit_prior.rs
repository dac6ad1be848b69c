//! Fit a maximum-entropy prior to bandit demonstrations and inspect it.

use rand::SeedableRng;

use expert_prior::domain::{DemoDataset, EnvSignature, Trajectory};
use expert_prior::envs::QModel;
use expert_prior::maxent::{fit_prior, prior_normalization_check, PriorOptions, ReferencePrior};
use expert_prior::sampling::sample_prior_resampled;
use expert_prior::seed::Rng;

fn main() -> expert_prior::Result<()> {
    let arms = 4;
    // Experts mostly pull arm 2, sometimes arm 1.
    let trajectories = [2, 2, 2, 1, 2, 2, 1, 2].map(Trajectory::arm).to_vec();
    let demos = DemoDataset::new(EnvSignature::Bandit { arms }, trajectories);
    let opts = PriorOptions {
        beta: 5.0,
        beta_eff: 5.0,
        ..PriorOptions::default()
    };
    let fit = fit_prior(
        &demos,
        &ReferencePrior::UniformBox { dim: arms },
        &QModel::Tabular { states: 1, actions: arms },
        &opts,
    )?;
    println!("dual {:.5}, |grad| {:.2e}", fit.report.dual, fit.report.grad_norm);
    println!("alpha {:?}", fit.prior.alpha);

    let check = prior_normalization_check(&fit.prior, 8192, 1)?;
    println!("importance ESS ratio {:.3}", check.ess_ratio);

    let mut rng = Rng::seed_from_u64(3);
    let draws = (0..2000)
        .map(|_| sample_prior_resampled(&fit.prior, 256, &mut rng))
        .collect::<expert_prior::Result<Vec<_>>>()?;
    let mean: Vec<f64> = (0..arms)
        .map(|k| draws.iter().map(|t| t.0[k]).sum::<f64>() / draws.len() as f64)
        .collect();
    println!("prior mean of theta {mean:.3?}");
    Ok(())
}
