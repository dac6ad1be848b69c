//! Langevin sampling of a Beta(3, 2) density on (0, 1) through the
//! logit-box reparameterization.

use expert_prior::domain::TaskParam;
use expert_prior::sampling::{sgld_sample, FnDensity, Parameterization, SgldConfig, SgldInit};

fn main() -> expert_prior::Result<()> {
    let target = FnDensity::new(1, Parameterization::LogitBox, |t: &[f64], g: &mut [f64]| {
        let x = t[0];
        g[0] += 2.0 / x - 1.0 / (1.0 - x);
        2.0 * x.ln() + (1.0 - x).ln()
    });
    let cfg = SgldConfig {
        step_size: 0.01,
        steps: 100_000,
        thinning: 10,
        seed: 5,
        init: SgldInit::Param(TaskParam(vec![0.5])),
        ..SgldConfig::default()
    };
    let draws = sgld_sample(&target, &cfg)?;
    let n = draws.len() as f64;
    let mean = draws.iter().map(|t| t.0[0]).sum::<f64>() / n;
    let var = draws.iter().map(|t| (t.0[0] - mean).powi(2)).sum::<f64>() / n;
    println!("{} draws: mean {mean:.4} (exact 0.6), variance {var:.4} (exact 0.04)", draws.len());
    Ok(())
}
