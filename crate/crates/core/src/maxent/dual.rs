//! Concave dual of the max-entropy prior problem.
//!
//! For dual weights `α > 0` and the Monte Carlo estimate of `E_{μ0}` over the
//! reference samples,
//!
//! ```text
//! D(α) = -log( (1/S) Σ_j exp(m(θ_j)ᵀα) ) + (λ/N) Σ_i log(N α_i / λ)
//! ∇D(α)_i = -Σ_j w_j m_i(θ_j) + λ / (N α_i),   w_j ∝ exp(m(θ_j)ᵀα)
//! ```

use super::features::FeatureMatrix;
use crate::envs::log_sum_exp;
use crate::error::{Error, Result};

fn check_len(alpha: &[f64], fm: &FeatureMatrix) -> Result<()> {
    if alpha.len() != fm.num_demos() {
        return Err(Error::Dimension {
            expected: fm.num_demos(),
            actual: alpha.len(),
        });
    }
    Ok(())
}

/// Self-normalised Gibbs weights `w_j ∝ exp(m(θ_j)ᵀα)` over the samples.
pub fn gibbs_weights(alpha: &[f64], fm: &FeatureMatrix) -> Result<Vec<f64>> {
    check_len(alpha, fm)?;
    let scores = fm.scores(&fm.group_weights(alpha));
    Ok(normalize_log_weights(&scores))
}

pub(crate) fn normalize_log_weights(scores: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(scores.iter().copied());
    scores.iter().map(|s| (s - lse).exp()).collect()
}

fn barrier(alpha: &[f64], lambda: f64) -> f64 {
    if lambda == 0.0 || alpha.is_empty() {
        return 0.0;
    }
    let n = alpha.len() as f64;
    lambda / n * alpha.iter().map(|&a| (n * a / lambda).ln()).sum::<f64>()
}

pub fn dual_objective(alpha: &[f64], fm: &FeatureMatrix, lambda: f64) -> Result<f64> {
    check_len(alpha, fm)?;
    if lambda < 0.0 || lambda.is_nan() {
        return Err(Error::invalid(format!("λ*={lambda} must be ≥ 0")));
    }
    if lambda > 0.0 && alpha.iter().any(|&a| a <= 0.0) {
        return Ok(f64::NEG_INFINITY);
    }
    let scores = fm.scores(&fm.group_weights(alpha));
    let log_s = (fm.num_samples() as f64).ln();
    let log_mean = log_sum_exp(scores.iter().map(|s| s - log_s));
    Ok(-log_mean + barrier(alpha, lambda))
}

pub fn dual_gradient(alpha: &[f64], fm: &FeatureMatrix, lambda: f64) -> Result<Vec<f64>> {
    check_len(alpha, fm)?;
    if let Some(a) = alpha.iter().find(|&&a| a <= 0.0) {
        return Err(Error::invalid(format!("dual gradient needs α > 0, got {a}")));
    }
    let weights = gibbs_weights(alpha, fm)?;
    let means = fm.weighted_group_means(&weights);
    let n = alpha.len() as f64;
    Ok(alpha
        .iter()
        .zip(fm.column_group())
        .map(|(&a, &g)| -means[g] + lambda / (n * a))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_instance(rng: &mut ChaCha8Rng) -> (FeatureMatrix, Vec<f64>, f64) {
        let s = rng.random_range(1..40);
        let n = rng.random_range(1..8);
        let values = (0..s * n).map(|_| rng.random::<f64>()).collect();
        let fm = FeatureMatrix::from_values(s, n, values).unwrap();
        let alpha = (0..n).map(|_| rng.random_range(0.05..3.0)).collect();
        (fm, alpha, rng.random_range(0.0..2.0))
    }

    #[test]
    fn zero_alpha_is_infeasible() {
        let fm = FeatureMatrix::from_values(2, 2, vec![0.5; 4]).unwrap();
        assert_eq!(dual_objective(&[0.0, 1.0], &fm, 1.0).unwrap(), f64::NEG_INFINITY);
        assert!(dual_gradient(&[0.0, 1.0], &fm, 1.0).is_err());
        assert!(dual_objective(&[1.0], &fm, 1.0).is_err());
    }

    #[test]
    fn constant_feature_closed_form() {
        // D(α) = -α + ln α for m ≡ 1, λ = 1: maximised at α = 1 with value -1.
        let fm = FeatureMatrix::from_values(3, 1, vec![1.0; 3]).unwrap();
        assert!((dual_objective(&[1.0], &fm, 1.0).unwrap() + 1.0).abs() < 1e-15);
        assert!(dual_gradient(&[1.0], &fm, 1.0).unwrap()[0].abs() < 1e-15);
        for a in [0.5, 0.9, 1.1, 2.0] {
            assert!(dual_objective(&[a], &fm, 1.0).unwrap() < -1.0);
        }
    }

    #[test]
    fn two_sample_value() {
        let fm = FeatureMatrix::from_values(2, 1, vec![0.2, 0.8]).unwrap();
        let d = dual_objective(&[1.0], &fm, 1.0).unwrap();
        let expected = -((0.2f64.exp() + 0.8f64.exp()) / 2.0).ln();
        assert!((d - expected).abs() < 1e-15);
        assert!((d + 0.544_340_8).abs() < 1e-7);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let (fm, alpha, lambda) = random_instance(&mut rng);
            let g = dual_gradient(&alpha, &fm, lambda).unwrap();
            let h = 1e-5;
            for i in 0..alpha.len() {
                let mut up = alpha.clone();
                let mut dn = alpha.clone();
                up[i] += h;
                dn[i] -= h;
                let fd = (dual_objective(&up, &fm, lambda).unwrap()
                    - dual_objective(&dn, &fm, lambda).unwrap())
                    / (2.0 * h);
                let scale = fd.abs().max(g[i].abs()).max(1e-3);
                assert!((fd - g[i]).abs() / scale < 1e-5, "fd {fd} vs {}", g[i]);
            }
        }
    }

    #[test]
    fn zero_lambda_gradient_is_a_negated_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..20 {
            let (fm, alpha, _) = random_instance(&mut rng);
            for g in dual_gradient(&alpha, &fm, 0.0).unwrap() {
                assert!((-1.0..=0.0).contains(&g));
            }
        }
    }

    proptest! {
        #[test]
        fn dual_is_concave(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (fm, a1, lambda) = random_instance(&mut rng);
            let a2: Vec<f64> = a1.iter().map(|_| rng.random_range(0.05..3.0)).collect();
            let mid: Vec<f64> = a1.iter().zip(&a2).map(|(x, y)| 0.5 * (x + y)).collect();
            let f = |a: &[f64]| dual_objective(a, &fm, lambda).unwrap();
            prop_assert!(f(&mid) >= 0.5 * (f(&a1) + f(&a2)) - 1e-9);
        }
    }
}
