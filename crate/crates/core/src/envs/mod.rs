//! Environments, task distributions, exact solvers and the noisily rational
//! expert used to synthesise demonstrations.

mod bandit;
mod deep_sea;

pub use bandit::{
    bernoulli_pull, BernoulliBanditSpec, LinearBanditSpec, BETA_PARAM_MAX, BETA_PARAM_MIN,
};
pub use deep_sea::{solve_deep_sea_q, Cell, DeepSeaSpec, GoalDistribution, Step, LEFT, RIGHT};

pub(crate) use bandit::{dot, sample_categorical};

use rand::Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::domain::{DemoDataset, EnvSignature, TaskParam, Trajectory};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EnvSpec {
    Bandit(BernoulliBanditSpec),
    LinearBandit(LinearBanditSpec),
    DeepSea(DeepSeaSpec),
}

impl EnvSpec {
    pub fn signature(&self) -> EnvSignature {
        match self {
            EnvSpec::Bandit(b) => b.signature(),
            EnvSpec::LinearBandit(l) => l.signature(),
            EnvSpec::DeepSea(d) => d.signature(),
        }
    }

    /// How a task parameter vector maps to Q-values in this environment.
    pub fn q_model(&self) -> QModel {
        match self {
            EnvSpec::Bandit(b) => QModel::Tabular {
                states: 1,
                actions: b.arms,
            },
            EnvSpec::LinearBandit(l) => QModel::Linear {
                contexts: l.contexts,
                actions: l.arms,
                dim: l.dim,
                features: l.features.clone(),
            },
            EnvSpec::DeepSea(d) => QModel::Tabular {
                states: d.num_states(),
                actions: 2,
            },
        }
    }
}

/// Parameterisation of the optimal Q-function by the task parameter.
///
/// Bernoulli bandits are the one-state tabular case, so arm means are the
/// Q-values of the dummy state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum QModel {
    Tabular {
        states: usize,
        actions: usize,
    },
    Linear {
        contexts: usize,
        actions: usize,
        dim: usize,
        features: Vec<f64>,
    },
}

impl QModel {
    pub fn dim(&self) -> usize {
        match self {
            QModel::Tabular { states, actions } => states * actions,
            QModel::Linear { dim, .. } => *dim,
        }
    }

    pub fn num_states(&self) -> usize {
        match self {
            QModel::Tabular { states, .. } => *states,
            QModel::Linear { contexts, .. } => *contexts,
        }
    }

    pub fn num_actions(&self) -> usize {
        match self {
            QModel::Tabular { actions, .. } | QModel::Linear { actions, .. } => *actions,
        }
    }

    pub fn check(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                actual: theta.len(),
            });
        }
        Ok(())
    }

    /// Writes `Q(state, ·)` into `out`.
    pub fn q_values_into(&self, theta: &[f64], state: usize, out: &mut [f64]) {
        match self {
            QModel::Tabular { actions, .. } => {
                out.copy_from_slice(&theta[state * actions..(state + 1) * actions])
            }
            QModel::Linear {
                actions,
                dim,
                features,
                ..
            } => {
                for (a, o) in out.iter_mut().enumerate() {
                    let start = (state * actions + a) * dim;
                    *o = dot(&features[start..start + dim], theta);
                }
            }
        }
    }

    pub fn q_values(&self, theta: &[f64], state: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.num_actions()];
        self.q_values_into(theta, state, &mut out);
        out
    }

    /// `grad += coeff * ∂Q(state, action)/∂θ`.
    pub fn add_q_gradient(&self, state: usize, action: usize, coeff: f64, grad: &mut [f64]) {
        match self {
            QModel::Tabular { actions, .. } => grad[state * actions + action] += coeff,
            QModel::Linear {
                actions,
                dim,
                features,
                ..
            } => {
                let start = (state * actions + action) * dim;
                for (g, f) in grad.iter_mut().zip(&features[start..start + dim]) {
                    *g += coeff * f;
                }
            }
        }
    }
}

/// Indices attaining the maximum (exact equality).
pub(crate) fn argmax_set(q: &[f64]) -> Vec<usize> {
    let best = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (0..q.len()).filter(|&i| q[i] == best).collect()
}

pub(crate) fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn check_beta(beta: f64) -> Result<()> {
    if beta.is_nan() || beta < 0.0 {
        return Err(Error::invalid(format!("expert rationality β={beta} must be in [0, ∞]")));
    }
    Ok(())
}

/// Action distribution of a noisily rational expert: `softmax(β·q)`, or the
/// uniform distribution over the argmax set when `β = ∞`.
pub fn expert_policy(q: &[f64], beta: f64) -> Vec<f64> {
    if beta.is_infinite() {
        let best = argmax_set(q);
        let p = 1.0 / best.len() as f64;
        let mut out = vec![0.0; q.len()];
        for i in best {
            out[i] = p;
        }
        return out;
    }
    let m = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = q.iter().map(|&x| (beta * (x - m)).exp()).collect();
    let z: f64 = out.iter().sum();
    out.iter_mut().for_each(|p| *p /= z);
    out
}

/// `ln p_E(action | q; β)`, exact in log space; `-∞` for non-argmax actions
/// of an optimal expert.
pub fn expert_log_prob(q: &[f64], beta: f64, action: usize) -> f64 {
    if beta.is_infinite() {
        let best = argmax_set(q);
        return if best.contains(&action) {
            -(best.len() as f64).ln()
        } else {
            f64::NEG_INFINITY
        };
    }
    if beta == 0.0 {
        return -(q.len() as f64).ln();
    }
    beta * q[action] - log_sum_exp(q.iter().map(|&x| beta * x))
}

/// `ln p_E(· | q; β)` for every action at once.
pub fn expert_log_policy_into(q: &[f64], beta: f64, out: &mut [f64]) {
    if beta.is_infinite() || beta == 0.0 {
        for (a, o) in out.iter_mut().enumerate() {
            *o = expert_log_prob(q, beta, a);
        }
        return;
    }
    let lse = log_sum_exp(q.iter().map(|&x| beta * x));
    for (o, &x) in out.iter_mut().zip(q) {
        *o = beta * x - lse;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "kebab-case")]
pub enum TaskDistribution {
    /// Independent `Beta(a_k, b_k)` per parameter coordinate.
    BetaProduct(Vec<(f64, f64)>),
    PointMass(TaskParam),
    /// Categorical over Deep Sea goal columns.
    CategoricalGoal(Vec<f64>),
}

impl TaskDistribution {
    pub fn validate(&self) -> Result<()> {
        match self {
            TaskDistribution::BetaProduct(p) => {
                if p.iter().any(|&(a, b)| !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite())) {
                    return Err(Error::invalid("beta parameters must be positive and finite"));
                }
            }
            TaskDistribution::PointMass(t) => {
                if t.0.iter().any(|v| !v.is_finite()) {
                    return Err(Error::invalid("non-finite point mass"));
                }
            }
            TaskDistribution::CategoricalGoal(p) => {
                let total: f64 = p.iter().sum();
                if p.iter().any(|&x| x < 0.0) || (total - 1.0).abs() > 1e-9 {
                    return Err(Error::invalid("goal probabilities must sum to 1"));
                }
            }
        }
        Ok(())
    }

    /// Goal categorical of a Deep Sea spec.
    pub fn goals(spec: &DeepSeaSpec) -> Self {
        TaskDistribution::CategoricalGoal(spec.goals.probs(spec.size))
    }
}

/// Per-arm `(a_k, b_k)` drawn i.i.d. uniform on `[0.05, 4]`.
pub fn sample_beta_product_distribution<R: Rng + ?Sized>(
    arms: usize,
    rng: &mut R,
) -> Result<TaskDistribution> {
    if arms < 2 {
        return Err(Error::invalid(format!("K={arms} < 2")));
    }
    let params = (0..arms)
        .map(|_| {
            (
                rng.random_range(BETA_PARAM_MIN..=BETA_PARAM_MAX),
                rng.random_range(BETA_PARAM_MIN..=BETA_PARAM_MAX),
            )
        })
        .collect();
    Ok(TaskDistribution::BetaProduct(params))
}

/// A sampled task. Deep Sea tasks carry their goal column and optimal value.
#[derive(Debug, Clone, PartialEq)]
pub struct Task {
    pub param: TaskParam,
    pub goal: Option<usize>,
    pub optimal_value: f64,
}

pub fn sample_task<R: Rng + ?Sized>(
    dist: &TaskDistribution,
    env: &EnvSpec,
    rng: &mut R,
) -> Result<Task> {
    dist.validate()?;
    let dim = env.q_model().dim();
    match (dist, env) {
        (TaskDistribution::BetaProduct(params), EnvSpec::Bandit(_) | EnvSpec::LinearBandit(_)) => {
            if params.len() != dim {
                return Err(Error::Dimension {
                    expected: dim,
                    actual: params.len(),
                });
            }
            let values: Vec<f64> = params
                .iter()
                .map(|&(a, b)| Beta::new(a, b).expect("validated").sample(rng))
                .collect();
            Ok(bandit_task(TaskParam(values)))
        }
        (TaskDistribution::PointMass(theta), EnvSpec::Bandit(_) | EnvSpec::LinearBandit(_)) => {
            if theta.len() != dim {
                return Err(Error::Dimension {
                    expected: dim,
                    actual: theta.len(),
                });
            }
            Ok(bandit_task(theta.clone()))
        }
        (TaskDistribution::CategoricalGoal(probs), EnvSpec::DeepSea(spec)) => {
            if probs.len() != spec.size {
                return Err(Error::Dimension {
                    expected: spec.size,
                    actual: probs.len(),
                });
            }
            let goal = sample_categorical(probs, rng);
            let (q, v) = solve_deep_sea_q(spec, goal);
            Ok(Task {
                param: q,
                goal: Some(goal),
                optimal_value: v,
            })
        }
        _ => Err(Error::Unsupported(format!(
            "task distribution {dist:?} on {}",
            env.signature()
        ))),
    }
}

fn bandit_task(param: TaskParam) -> Task {
    let best = param.0.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Task {
        param,
        goal: None,
        optimal_value: best,
    }
}

/// Samples `count` tasks from `dist` and records one expert episode per task:
/// states and actions only.
pub fn generate_demos<R: Rng + ?Sized>(
    env: &EnvSpec,
    dist: &TaskDistribution,
    beta: f64,
    count: usize,
    rng: &mut R,
) -> Result<DemoDataset> {
    check_beta(beta)?;
    if count == 0 {
        return Err(Error::invalid("need at least one demonstration"));
    }
    let model = env.q_model();
    let mut q = vec![0.0; model.num_actions()];
    let mut trajectories = Vec::with_capacity(count);
    for _ in 0..count {
        let task = sample_task(dist, env, rng)?;
        let traj = match env {
            EnvSpec::Bandit(_) => {
                model.q_values_into(&task.param.0, 0, &mut q);
                Trajectory::arm(sample_categorical(&expert_policy(&q, beta), rng))
            }
            EnvSpec::LinearBandit(spec) => {
                let ctx = spec.sample_context(rng);
                model.q_values_into(&task.param.0, ctx, &mut q);
                let a = sample_categorical(&expert_policy(&q, beta), rng);
                Trajectory {
                    steps: vec![(ctx, a)],
                    terminal: None,
                }
            }
            EnvSpec::DeepSea(spec) => {
                let goal = task.goal.expect("deep sea tasks carry a goal");
                let mut cell = spec.start();
                let mut steps = Vec::with_capacity(spec.size);
                loop {
                    let s = spec.state_id(cell);
                    model.q_values_into(&task.param.0, s, &mut q);
                    let a = sample_categorical(&expert_policy(&q, beta), rng);
                    steps.push((s, a));
                    let st = spec.step(cell, a, goal)?;
                    cell = st.next;
                    if st.done {
                        break;
                    }
                }
                Trajectory {
                    steps,
                    terminal: Some(spec.state_id(cell)),
                }
            }
        };
        trajectories.push(traj);
    }
    Ok(DemoDataset::new(env.signature(), trajectories))
}

/// Shannon entropy (nats) of the identity of the optimal action under the
/// task distribution, with ties split evenly.
///
/// Bandits are estimated by Monte Carlo. For Deep Sea every goal column has
/// its own optimal trajectory, so the entropy is that of the goal categorical
/// and is computed exactly.
pub fn optimal_action_entropy<R: Rng + ?Sized>(
    env: &EnvSpec,
    dist: &TaskDistribution,
    mc_samples: usize,
    rng: &mut R,
) -> Result<f64> {
    if mc_samples == 0 {
        return Err(Error::invalid("mc_samples must be ≥ 1"));
    }
    let probs = match (env, dist) {
        (EnvSpec::DeepSea(_), TaskDistribution::CategoricalGoal(p)) => p.clone(),
        _ => {
            let model = env.q_model();
            let mut counts = vec![0.0; model.num_actions()];
            let mut q = vec![0.0; model.num_actions()];
            for _ in 0..mc_samples {
                let task = sample_task(dist, env, rng)?;
                let state = match env {
                    EnvSpec::LinearBandit(spec) => spec.sample_context(rng),
                    _ => 0,
                };
                model.q_values_into(&task.param.0, state, &mut q);
                let best = argmax_set(&q);
                let share = 1.0 / best.len() as f64;
                for a in best {
                    counts[a] += share;
                }
            }
            counts.iter().map(|c| c / mc_samples as f64).collect()
        }
    };
    Ok(entropy(&probs))
}

/// Shannon entropy in nats; a point mass gives `+0.0`.
pub fn entropy(probs: &[f64]) -> f64 {
    let h = -probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.ln())
        .sum::<f64>();
    h + 0.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from;

    fn bandit(k: usize) -> EnvSpec {
        EnvSpec::Bandit(BernoulliBanditSpec::new(k).unwrap())
    }

    #[test]
    fn uniform_betas_are_uniform() {
        // Kolmogorov–Smirnov against U(0,1) at the 1% level, per arm.
        let mut rng = rng_from(3, &[]);
        let dist = TaskDistribution::BetaProduct(vec![(1.0, 1.0); 3]);
        let n = 10_000;
        let draws: Vec<Task> = (0..n)
            .map(|_| sample_task(&dist, &bandit(3), &mut rng).unwrap())
            .collect();
        for k in 0..3 {
            let mut xs: Vec<f64> = draws.iter().map(|t| t.param.0[k]).collect();
            xs.sort_by(f64::total_cmp);
            let d = xs
                .iter()
                .enumerate()
                .map(|(i, &x)| ((i + 1) as f64 / n as f64 - x).max(x - i as f64 / n as f64))
                .fold(0.0, f64::max);
            assert!(d < 1.628 / (n as f64).sqrt(), "arm {k}: D={d}");
        }
    }

    #[test]
    fn point_mass_is_exact() {
        let mut rng = rng_from(0, &[]);
        let dist = TaskDistribution::PointMass(TaskParam(vec![0.9, 0.1]));
        for _ in 0..10 {
            assert_eq!(sample_task(&dist, &bandit(2), &mut rng).unwrap().param.0, vec![0.9, 0.1]);
        }
    }

    #[test]
    fn corner_goal_is_always_last_column() {
        let spec = DeepSeaSpec::new(30, GoalDistribution::Corner).unwrap();
        let dist = TaskDistribution::goals(&spec);
        let env = EnvSpec::DeepSea(spec);
        let mut rng = rng_from(0, &[]);
        for _ in 0..50 {
            assert_eq!(sample_task(&dist, &env, &mut rng).unwrap().goal, Some(29));
        }
    }

    #[test]
    fn beta_product_parameters() {
        let d = sample_beta_product_distribution(10, &mut rng_from(4, &[])).unwrap();
        let TaskDistribution::BetaProduct(p) = &d else { panic!() };
        assert_eq!(p.len(), 10);
        assert!(p
            .iter()
            .all(|&(a, b)| (0.05..=4.0).contains(&a) && (0.05..=4.0).contains(&b)));
        assert_ne!(d, sample_beta_product_distribution(10, &mut rng_from(5, &[])).unwrap());
        assert_eq!(
            sample_beta_product_distribution(2, &mut rng_from(6, &[])).unwrap(),
            sample_beta_product_distribution(2, &mut rng_from(6, &[])).unwrap()
        );
        assert!(sample_beta_product_distribution(1, &mut rng_from(6, &[])).is_err());
    }

    #[test]
    fn expert_policy_examples() {
        assert_eq!(expert_policy(&[0.3, 0.9, 0.1, 0.5], 0.0), vec![0.25; 4]);
        let p = expert_policy(&[0.9, 0.1], 1.0);
        assert!((p[0] - 0.689974).abs() < 1e-6 && (p[1] - 0.310026).abs() < 1e-6);
        assert_eq!(expert_policy(&[1.0, 1.0, 0.0], f64::INFINITY), vec![0.5, 0.5, 0.0]);
        assert_eq!(expert_log_prob(&[1.0, 1.0, 0.0], f64::INFINITY, 2), f64::NEG_INFINITY);
        assert!((expert_log_prob(&[0.9, 0.1], 1.0, 0) - 0.689974f64.ln()).abs() < 1e-6);
    }

    #[test]
    fn linear_model_matches_features() {
        let spec = LinearBanditSpec::new(2, 2, vec![1.0, 2.0, 0.5, 0.0], vec![1.0], 0.1).unwrap();
        let model = EnvSpec::LinearBandit(spec).q_model();
        assert_eq!(model.q_values(&[1.0, -1.0], 0), vec![-1.0, 0.5]);
        let mut g = vec![0.0; 2];
        model.add_q_gradient(0, 0, 2.0, &mut g);
        assert_eq!(g, vec![2.0, 4.0]);
    }

    #[test]
    fn demos_follow_unique_argmax() {
        let dist = TaskDistribution::PointMass(TaskParam(vec![0.9, 0.1]));
        let d = generate_demos(&bandit(2), &dist, f64::INFINITY, 100, &mut rng_from(0, &[])).unwrap();
        assert!(d.trajectories.iter().all(|t| t.steps == vec![(0, 0)]));
    }

    #[test]
    fn corner_demos_take_the_free_left_then_go_right() {
        let spec = DeepSeaSpec::new(30, GoalDistribution::Corner).unwrap();
        let dist = TaskDistribution::goals(&spec);
        let env = EnvSpec::DeepSea(spec.clone());
        let d = generate_demos(&env, &dist, f64::INFINITY, 1000, &mut rng_from(1, &[])).unwrap();
        assert_eq!(d.len(), 1000);
        for t in &d.trajectories {
            assert_eq!(t.horizon(), 30);
            assert_eq!(t.steps[0], (0, LEFT));
            assert!(t.steps[1..].iter().all(|&(_, a)| a == RIGHT));
            assert_eq!(t.terminal, Some(spec.state_id(Cell { row: 30, col: 29 })));
        }
    }

    #[test]
    fn random_expert_is_balanced() {
        let dist = TaskDistribution::PointMass(TaskParam(vec![0.9, 0.1]));
        let d = generate_demos(&bandit(2), &dist, 0.0, 10_000, &mut rng_from(2, &[])).unwrap();
        let zeros = d.trajectories.iter().filter(|t| t.steps[0].1 == 0).count();
        assert!((zeros as f64 / 10_000.0 - 0.5).abs() < 0.02);
    }

    #[test]
    fn entropy_examples() {
        let mut rng = rng_from(9, &[]);
        let pm = TaskDistribution::PointMass(TaskParam(vec![0.9, 0.1]));
        assert_eq!(optimal_action_entropy(&bandit(2), &pm, 100, &mut rng).unwrap(), 0.0);

        let sym = TaskDistribution::BetaProduct(vec![(2.0, 3.0); 2]);
        let h = optimal_action_entropy(&bandit(2), &sym, 100_000, &mut rng).unwrap();
        assert!((h - 2f64.ln()).abs() < 0.02, "{h}");

        let spec = DeepSeaSpec::new(30, GoalDistribution::Uniform).unwrap();
        let dist = TaskDistribution::goals(&spec);
        let h = optimal_action_entropy(&EnvSpec::DeepSea(spec), &dist, 1, &mut rng).unwrap();
        assert!((h - 30f64.ln()).abs() < 1e-12);
    }
}
