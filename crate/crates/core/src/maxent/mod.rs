//! Maximum-entropy expert prior.
//!
//! Each demonstration contributes a feature `m_τ(θ)`, its likelihood under
//! the task parameter `θ`. The prior closest in KL to the reference measure
//! that still explains the demonstrations has the Gibbs form
//! `μ_ME(θ) ∝ μ0(θ) exp(Σ_i α_i m_{τ_i}(θ))`, with `α` the maximiser of the
//! concave dual in [`dual`].

mod dual;
mod features;

pub use dual::{dual_gradient, dual_objective, gibbs_weights};
pub use features::{
    build_feature_matrix, traj_log_likelihood, FeatureMatrix, ReferencePrior, LOG_UNDERFLOW,
};

use std::io::Write;
use std::path::Path;

use rand::SeedableRng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::domain::{DemoDataset, EnvSignature, Trajectory};
use crate::envs::{expert_log_policy_into, QModel};
use crate::error::{Error, Result};
use crate::seed::Rng;

use features::group_trajectories;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PriorOptions {
    /// Lagrange multiplier of the data-fit constraint.
    pub lambda_star: f64,
    /// Rationality of the demonstrating expert, used for fitting.
    #[serde(with = "rationality")]
    pub beta: f64,
    /// Finite rationality used inside the prior's log-density.
    pub beta_eff: f64,
    /// Reference samples `S` for the Monte Carlo expectation.
    pub samples: usize,
    pub iterations: usize,
    /// Adam step size on `ln α`.
    pub step_size: f64,
    /// Stop once the gradient norm falls below this.
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for PriorOptions {
    fn default() -> Self {
        PriorOptions {
            lambda_star: 10.0,
            beta: f64::INFINITY,
            beta_eff: 10.0,
            samples: 4096,
            iterations: 2000,
            step_size: 0.05,
            tolerance: 1e-9,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitTraceRow {
    pub iter: usize,
    pub dual: f64,
    pub grad_norm: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FitReport {
    pub trace: Vec<FitTraceRow>,
    pub dual: f64,
    pub grad_norm: f64,
}

impl FitReport {
    /// CSV with columns `iter,dual,grad_norm`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for row in &self.trace {
            out.serialize(row)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Output of [`fit_prior`]. The feature matrix is kept for diagnostics.
#[derive(Debug, Clone)]
pub struct PriorFit {
    pub prior: GibbsPrior,
    pub report: FitReport,
    pub features: FeatureMatrix,
}

/// Maximises the dual by Adam ascent on `ξ = ln α`. A step that would lower
/// the objective is halved until it does not, so the trace is nondecreasing.
pub fn fit_prior(
    demos: &DemoDataset,
    reference: &ReferencePrior,
    model: &QModel,
    opts: &PriorOptions,
) -> Result<PriorFit> {
    let lambda = opts.lambda_star;
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::invalid(format!("λ*={lambda} must be finite and ≥ 0")));
    }
    let features = build_feature_matrix(
        demos,
        reference,
        model,
        opts.samples,
        opts.beta,
        opts.seed,
    )?;
    let n = demos.len();
    if n == 0 {
        let prior = GibbsPrior::new(Vec::new(), demos.clone(), model.clone(), reference.clone(), opts)?;
        return Ok(PriorFit {
            prior,
            report: FitReport::default(),
            features,
        });
    }

    let uniform = vec![1.0 / features.num_samples() as f64; features.num_samples()];
    let base_means = features.weighted_group_means(&uniform);
    if lambda > 0.0 {
        if let Some(i) = (0..n).find(|&i| base_means[features.column_group()[i]] == 0.0) {
            return Err(Error::Degenerate(format!(
                "demo {i} has zero likelihood under all {} reference samples; \
                 the dual is unbounded (raise the sample count or use a finite β)",
                features.num_samples()
            )));
        }
    }

    let mut xi: Vec<f64> = (0..n)
        .map(|i| {
            if lambda > 0.0 {
                (lambda / (n as f64 * base_means[features.column_group()[i]])).ln()
            } else {
                (1.0 / n as f64).ln()
            }
        })
        .collect();
    let exp_all = |xi: &[f64]| xi.iter().map(|x| x.exp()).collect::<Vec<f64>>();

    let (b1, b2, eps) = (0.9, 0.999, 1e-8);
    let mut m1 = vec![0.0; n];
    let mut m2 = vec![0.0; n];
    let mut alpha = exp_all(&xi);
    let mut value = dual_objective(&alpha, &features, lambda)?;
    let mut report = FitReport::default();
    let mut trial = vec![0.0; n];

    for iter in 0..=opts.iterations {
        if !value.is_finite() {
            return Err(Error::NonFiniteObjective { iteration: iter });
        }
        let grad = dual_gradient(&alpha, &features, lambda)?;
        let grad_norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        report.trace.push(FitTraceRow {
            iter,
            dual: value,
            grad_norm,
        });
        report.dual = value;
        report.grad_norm = grad_norm;
        if iter == opts.iterations || grad_norm < opts.tolerance {
            break;
        }

        let t = (iter + 1) as i32;
        let mut step = vec![0.0; n];
        for i in 0..n {
            let g = alpha[i] * grad[i];
            m1[i] = b1 * m1[i] + (1.0 - b1) * g;
            m2[i] = b2 * m2[i] + (1.0 - b2) * g * g;
            let mh = m1[i] / (1.0 - b1.powi(t));
            let vh = m2[i] / (1.0 - b2.powi(t));
            step[i] = opts.step_size * mh / (vh.sqrt() + eps);
        }
        let mut scale = 1.0;
        for _ in 0..40 {
            for i in 0..n {
                trial[i] = xi[i] + scale * step[i];
            }
            let cand_alpha = exp_all(&trial);
            let cand = dual_objective(&cand_alpha, &features, lambda)?;
            if cand.is_nan() || cand == f64::INFINITY {
                return Err(Error::NonFiniteObjective { iteration: iter + 1 });
            }
            if cand >= value {
                xi.copy_from_slice(&trial);
                alpha = cand_alpha;
                value = cand;
                break;
            }
            scale *= 0.5;
        }
    }

    let prior = GibbsPrior::new(alpha, demos.clone(), model.clone(), reference.clone(), opts)?;
    Ok(PriorFit {
        prior,
        report,
        features,
    })
}

/// Fitted max-entropy prior. Identical demonstrations are merged into one
/// term whose weight is the sum of their `α`.
#[derive(Debug, Clone)]
pub struct GibbsPrior {
    pub alpha: Vec<f64>,
    pub demos: DemoDataset,
    pub model: QModel,
    pub reference: ReferencePrior,
    pub lambda_star: f64,
    pub beta: f64,
    pub beta_eff: f64,
    groups: Vec<Group>,
    /// Distinct states visited by any demonstration.
    states: Vec<usize>,
}

#[derive(Debug, Clone)]
struct Group {
    weight: f64,
    /// `(index into states, action)` per step.
    steps: Vec<(usize, usize)>,
}

impl GibbsPrior {
    pub(crate) fn new(
        alpha: Vec<f64>,
        demos: DemoDataset,
        model: QModel,
        reference: ReferencePrior,
        opts: &PriorOptions,
    ) -> Result<Self> {
        Self::from_parts(
            alpha,
            demos,
            model,
            reference,
            opts.lambda_star,
            opts.beta,
            opts.beta_eff,
        )
    }

    pub fn from_parts(
        alpha: Vec<f64>,
        demos: DemoDataset,
        model: QModel,
        reference: ReferencePrior,
        lambda_star: f64,
        beta: f64,
        beta_eff: f64,
    ) -> Result<Self> {
        if alpha.len() != demos.len() {
            return Err(Error::Dimension {
                expected: demos.len(),
                actual: alpha.len(),
            });
        }
        if alpha.iter().any(|a| !a.is_finite() || *a < 0.0) {
            return Err(Error::invalid("α must be finite and nonnegative"));
        }
        if beta_eff.is_nan() || beta_eff < 0.0 {
            return Err(Error::invalid(format!("β-eff={beta_eff} must be ≥ 0")));
        }
        let (unique, column_group) = group_trajectories(&demos);
        let mut weights = vec![0.0; unique.len()];
        for (&g, &a) in column_group.iter().zip(&alpha) {
            weights[g] += a;
        }
        let mut states: Vec<usize> = Vec::new();
        let groups = unique
            .iter()
            .zip(weights)
            .map(|(t, weight)| {
                let steps = t
                    .steps
                    .iter()
                    .map(|&(s, a)| {
                        let k = states.iter().position(|&x| x == s).unwrap_or_else(|| {
                            states.push(s);
                            states.len() - 1
                        });
                        (k, a)
                    })
                    .collect();
                Group { weight, steps }
            })
            .collect();
        Ok(GibbsPrior {
            alpha,
            demos,
            model,
            reference,
            lambda_star,
            beta,
            beta_eff,
            groups,
            states,
        })
    }

    /// The prior with no demonstrations: `μ_ME = μ0`.
    pub fn empty(env: EnvSignature, model: QModel, reference: ReferencePrior, beta_eff: f64) -> Self {
        Self::from_parts(
            Vec::new(),
            DemoDataset::empty(env),
            model,
            reference,
            0.0,
            f64::INFINITY,
            beta_eff,
        )
        .expect("empty prior is valid")
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.model.dim()
    }

    /// Per-state expert log-probabilities at `β-eff`, one row per entry of
    /// `self.states`.
    fn state_log_probs(&self, theta: &[f64]) -> Vec<Vec<f64>> {
        let k = self.model.num_actions();
        let mut q = vec![0.0; k];
        self.states
            .iter()
            .map(|&s| {
                self.model.q_values_into(theta, s, &mut q);
                let mut row = vec![0.0; k];
                expert_log_policy_into(&q, self.beta_eff, &mut row);
                row
            })
            .collect()
    }

    /// `Σ_i α_i m_{τ_i}(θ)` evaluated at `β-eff`: the log-density of the prior
    /// relative to the reference measure, up to a constant.
    pub fn log_prior_pdf(&self, theta: &[f64]) -> Result<f64> {
        self.model.check(theta)?;
        if self.groups.is_empty() {
            return Ok(0.0);
        }
        let logp = self.state_log_probs(theta);
        Ok(self
            .groups
            .iter()
            .map(|g| g.weight * g.steps.iter().map(|&(k, a)| logp[k][a]).sum::<f64>().exp())
            .sum())
    }

    /// Adds `∇_θ log_prior_pdf` into `grad` and returns the value.
    pub fn log_prior_pdf_with_gradient(&self, theta: &[f64], grad: &mut [f64]) -> Result<f64> {
        self.model.check(theta)?;
        if self.groups.is_empty() {
            return Ok(0.0);
        }
        if !self.beta_eff.is_finite() {
            return Err(Error::Unsupported(
                "the prior gradient needs a finite β-eff".into(),
            ));
        }
        let k = self.model.num_actions();
        let logp = self.state_log_probs(theta);
        // coeff[state][action] accumulates the multiplier of ∂Q(s,a)/∂θ
        let mut coeff = vec![vec![0.0; k]; self.states.len()];
        let mut value = 0.0;
        for g in &self.groups {
            let m = g.steps.iter().map(|&(s, a)| logp[s][a]).sum::<f64>().exp();
            value += g.weight * m;
            let c = g.weight * m * self.beta_eff;
            if c == 0.0 {
                continue;
            }
            for &(s, a) in &g.steps {
                coeff[s][a] += c;
                for (b, lp) in logp[s].iter().enumerate() {
                    coeff[s][b] -= c * lp.exp();
                }
            }
        }
        for (row, &s) in coeff.iter().zip(&self.states) {
            for (a, &c) in row.iter().enumerate() {
                if c != 0.0 {
                    self.model.add_q_gradient(s, a, c, grad);
                }
            }
        }
        Ok(value)
    }

    pub fn grad_log_prior(&self, theta: &[f64]) -> Result<Vec<f64>> {
        let mut grad = vec![0.0; self.dim()];
        self.log_prior_pdf_with_gradient(theta, &mut grad)?;
        Ok(grad)
    }

    pub fn to_file(&self) -> PriorFile {
        PriorFile {
            alpha: self.alpha.clone(),
            lambda_star: self.lambda_star,
            beta: self.beta,
            beta_eff: self.beta_eff,
            env: self.demos.env,
            demo_hash: demo_hash(&self.demos),
            reference: self.reference.clone(),
            model: self.model.clone(),
        }
    }

    /// Rebuilds a prior from its JSON document and the demo file it was fit
    /// on; the demo hash must match.
    pub fn from_file(file: PriorFile, demos: DemoDataset) -> Result<Self> {
        let hash = demo_hash(&demos);
        if hash != file.demo_hash {
            return Err(Error::Dataset(format!(
                "demo hash {hash} does not match the prior's {}",
                file.demo_hash
            )));
        }
        if demos.env != file.env {
            return Err(Error::Dataset(format!(
                "demos are for {}, prior for {}",
                demos.env, file.env
            )));
        }
        Self::from_parts(
            file.alpha,
            demos,
            file.model,
            file.reference,
            file.lambda_star,
            file.beta,
            file.beta_eff,
        )
    }
}

/// Trajectories and their merged weights, for inspection.
impl GibbsPrior {
    pub fn weighted_trajectories(&self) -> Vec<(Trajectory, f64)> {
        let (unique, _) = group_trajectories(&self.demos);
        unique
            .into_iter()
            .zip(self.groups.iter().map(|g| g.weight))
            .collect()
    }
}

/// JSON document for a fitted prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorFile {
    pub alpha: Vec<f64>,
    pub lambda_star: f64,
    #[serde(with = "rationality")]
    pub beta: f64,
    #[serde(with = "rationality")]
    pub beta_eff: f64,
    pub env: EnvSignature,
    pub demo_hash: String,
    pub reference: ReferencePrior,
    pub model: QModel,
}

impl PriorFile {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer_pretty(f, self)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let f = std::io::BufReader::new(std::fs::File::open(path)?);
        Ok(serde_json::from_reader(f)?)
    }
}

/// SHA-256 of the demo file bytes, hex encoded.
pub fn demo_hash(demos: &DemoDataset) -> String {
    let mut bytes = Vec::new();
    demos
        .write_jsonl(&mut bytes)
        .expect("writing to memory cannot fail");
    Sha256::digest(&bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizationCheck {
    /// Sum of self-normalised weights: 1 by construction.
    pub weight_total: f64,
    pub effective_samples: f64,
    /// `S_eff / S`.
    pub ess_ratio: f64,
}

/// Importance weights `exp(log_prior_pdf)` on fresh reference draws.
pub fn prior_normalization_check(
    prior: &GibbsPrior,
    samples: usize,
    seed: u64,
) -> Result<NormalizationCheck> {
    if samples == 0 {
        return Err(Error::invalid("need at least one sample"));
    }
    let mut rng = Rng::seed_from_u64(seed);
    let logs = (0..samples)
        .map(|_| prior.log_prior_pdf(&prior.reference.sample(&mut rng).0))
        .collect::<Result<Vec<f64>>>()?;
    let w = dual::normalize_log_weights(&logs);
    let total: f64 = w.iter().sum();
    let sq: f64 = w.iter().map(|x| x * x).sum();
    let ess = total * total / sq;
    Ok(NormalizationCheck {
        weight_total: total / total,
        effective_samples: ess,
        ess_ratio: ess / samples as f64,
    })
}

/// Serialises `β = ∞` as the string `"inf"` since JSON has no infinity.
pub(crate) mod rationality {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Str(s) if s == "inf" || s == "infinity" => Ok(f64::INFINITY),
            Repr::Str(s) => Err(serde::de::Error::custom(format!("bad rationality `{s}`"))),
        }
    }
}
