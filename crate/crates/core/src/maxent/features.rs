use std::collections::HashMap;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{DemoDataset, TaskParam, Trajectory};
use crate::envs::{expert_log_prob, QModel};
use crate::error::{Error, Result};
use crate::seed::rng_from;

/// Feature values below this are treated as exactly zero.
pub const LOG_UNDERFLOW: f64 = -690.775_527_898_213_7; // ln(1e-300)

/// Non-informative reference measure μ0 over task parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ReferencePrior {
    /// Uniform on `[0, 1]^dim`.
    UniformBox { dim: usize },
    /// Independent `N(0, std²)` coordinates.
    Gaussian { dim: usize, std: f64 },
    /// Equally weighted atoms.
    Points { points: Vec<TaskParam> },
}

impl ReferencePrior {
    pub fn dim(&self) -> usize {
        match self {
            ReferencePrior::UniformBox { dim } | ReferencePrior::Gaussian { dim, .. } => *dim,
            ReferencePrior::Points { points } => points.first().map_or(0, TaskParam::len),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> TaskParam {
        match self {
            ReferencePrior::UniformBox { dim } => TaskParam((0..*dim).map(|_| rng.random()).collect()),
            ReferencePrior::Gaussian { dim, std } => {
                let n = Normal::new(0.0, *std).expect("positive std");
                TaskParam((0..*dim).map(|_| n.sample(rng)).collect())
            }
            ReferencePrior::Points { points } => points[rng.random_range(0..points.len())].clone(),
        }
    }

    /// Lebesgue log-density (up to a constant) and its gradient, written into
    /// `grad`. Uniform boxes are flat inside the box.
    pub fn log_density_into(&self, theta: &[f64], grad: &mut [f64]) -> Result<f64> {
        match self {
            ReferencePrior::UniformBox { .. } => Ok(0.0),
            ReferencePrior::Gaussian { std, .. } => {
                let prec = 1.0 / (std * std);
                let mut v = 0.0;
                for (g, &x) in grad.iter_mut().zip(theta) {
                    v -= 0.5 * prec * x * x;
                    *g -= prec * x;
                }
                Ok(v)
            }
            ReferencePrior::Points { .. } => Err(Error::Unsupported(
                "atomic reference prior has no density".into(),
            )),
        }
    }
}

/// `ln m_τ(θ)`: the sum of expert log action-probabilities along `τ`.
/// Transition factors are task-independent and omitted.
pub fn traj_log_likelihood(
    traj: &Trajectory,
    theta: &[f64],
    model: &QModel,
    beta: f64,
) -> Result<f64> {
    model.check(theta)?;
    let mut q = vec![0.0; model.num_actions()];
    let mut total = 0.0;
    for &(s, a) in &traj.steps {
        if s >= model.num_states() || a >= model.num_actions() {
            return Err(Error::invalid(format!("step ({s}, {a}) outside the model")));
        }
        model.q_values_into(theta, s, &mut q);
        total += expert_log_prob(&q, beta, a);
        if total == f64::NEG_INFINITY {
            break;
        }
    }
    Ok(total)
}

/// Distinct trajectories of a dataset and, per demo, the index of its group.
pub(crate) fn group_trajectories(demos: &DemoDataset) -> (Vec<Trajectory>, Vec<usize>) {
    let mut index: HashMap<&Trajectory, usize> = HashMap::new();
    let mut unique = Vec::new();
    let mut map = Vec::with_capacity(demos.len());
    for t in &demos.trajectories {
        let id = *index.entry(t).or_insert_with(|| {
            unique.push(t.clone());
            unique.len() - 1
        });
        map.push(id);
    }
    (unique, map)
}

/// `m_{τ_i}(θ_j)` for S reference samples and N demos.
///
/// Identical demonstrations share one stored column, so memory and the cost
/// of `mᵀα` scale with the number of distinct trajectories.
#[derive(Debug, Clone)]
pub struct FeatureMatrix {
    samples: usize,
    /// `samples x unique` row-major.
    log_values: Vec<f64>,
    values: Vec<f64>,
    unique: usize,
    column_group: Vec<usize>,
    reference_samples: Vec<TaskParam>,
}

impl FeatureMatrix {
    /// Matrix from explicit `samples x demos` values in `[0, 1]`, every
    /// column distinct.
    pub fn from_values(samples: usize, demos: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != samples * demos {
            return Err(Error::Dimension {
                expected: samples * demos,
                actual: values.len(),
            });
        }
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::invalid("feature values must lie in [0, 1]"));
        }
        let log_values = values.iter().map(|&v| clamp_log(v.ln())).collect();
        Ok(FeatureMatrix {
            samples,
            log_values,
            values,
            unique: demos,
            column_group: (0..demos).collect(),
            reference_samples: Vec::new(),
        })
    }

    fn from_groups(
        samples: Vec<TaskParam>,
        log_values: Vec<f64>,
        unique: usize,
        column_group: Vec<usize>,
    ) -> Self {
        let values = log_values.iter().map(|&l| l.exp()).collect();
        FeatureMatrix {
            samples: samples.len(),
            log_values,
            values,
            unique,
            column_group,
            reference_samples: samples,
        }
    }

    pub fn num_samples(&self) -> usize {
        self.samples
    }

    pub fn num_demos(&self) -> usize {
        self.column_group.len()
    }

    pub fn reference_samples(&self) -> &[TaskParam] {
        &self.reference_samples
    }

    pub fn value(&self, sample: usize, demo: usize) -> f64 {
        self.values[sample * self.unique + self.column_group[demo]]
    }

    pub fn log_value(&self, sample: usize, demo: usize) -> f64 {
        self.log_values[sample * self.unique + self.column_group[demo]]
    }

    /// Sums `alpha` within each group of identical columns.
    pub(crate) fn group_weights(&self, alpha: &[f64]) -> Vec<f64> {
        let mut w = vec![0.0; self.unique];
        for (&g, &a) in self.column_group.iter().zip(alpha) {
            w[g] += a;
        }
        w
    }

    /// `m(θ_j)ᵀα` for every sample, given grouped weights.
    pub(crate) fn scores(&self, group_alpha: &[f64]) -> Vec<f64> {
        if self.unique == 0 {
            return vec![0.0; self.samples];
        }
        self.values
            .chunks_exact(self.unique)
            .map(|row| row.iter().zip(group_alpha).map(|(m, a)| m * a).sum())
            .collect()
    }

    /// `Σ_j w_j m_u(θ_j)` per group for normalised weights `w`.
    pub(crate) fn weighted_group_means(&self, weights: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.unique];
        if self.unique == 0 {
            return out;
        }
        for (row, &w) in self.values.chunks_exact(self.unique).zip(weights) {
            for (o, m) in out.iter_mut().zip(row) {
                *o += w * m;
            }
        }
        out
    }

    pub(crate) fn column_group(&self) -> &[usize] {
        &self.column_group
    }
}

fn clamp_log(l: f64) -> f64 {
    if l < LOG_UNDERFLOW {
        f64::NEG_INFINITY
    } else {
        l
    }
}

/// Draws `samples` reference parameters (each from its own seeded stream)
/// and evaluates every distinct demo's likelihood under each.
pub fn build_feature_matrix(
    demos: &DemoDataset,
    reference: &ReferencePrior,
    model: &QModel,
    samples: usize,
    beta: f64,
    seed: u64,
) -> Result<FeatureMatrix> {
    if samples == 0 {
        return Err(Error::invalid("need at least one reference sample"));
    }
    if reference.dim() != model.dim() {
        return Err(Error::Dimension {
            expected: model.dim(),
            actual: reference.dim(),
        });
    }
    let (unique, column_group) = group_trajectories(demos);
    let rows: Vec<(TaskParam, Vec<f64>)> = (0..samples as u64)
        .into_par_iter()
        .map(|j| {
            let theta = reference.sample(&mut rng_from(seed, &[j]));
            let logs = unique
                .iter()
                .map(|t| traj_log_likelihood(t, &theta.0, model, beta).map(clamp_log))
                .collect::<Result<Vec<f64>>>()?;
            Ok((theta, logs))
        })
        .collect::<Result<_>>()?;
    let mut reference_samples = Vec::with_capacity(samples);
    let mut log_values = Vec::with_capacity(samples * unique.len());
    for (theta, logs) in rows {
        reference_samples.push(theta);
        log_values.extend(logs);
    }
    Ok(FeatureMatrix::from_groups(
        reference_samples,
        log_values,
        unique.len(),
        column_group,
    ))
}
