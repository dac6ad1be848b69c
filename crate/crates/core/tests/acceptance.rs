//! Acceptance criteria 1–9. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails. Runs the scaled experiment configs in
//! `configs/`, so it takes several minutes.

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng as _, SeedableRng};

use expert_prior::agents::{
    build_bandit_agent, AgentConfig, AgentKind, BanditAgent, BanditContext, OracleTsAgent,
    UcbAgent,
};
use expert_prior::domain::{
    DemoDataset, EnvSignature, OnlineHistory, RegretRecord, TaskParam, Trajectory, Transition,
};
use expert_prior::envs::{
    generate_demos, solve_deep_sea_q, Cell, DeepSeaSpec, EnvSpec, GoalDistribution, QModel,
    TaskDistribution, LEFT, RIGHT,
};
use expert_prior::harness::{
    aggregate, cell_task, regret_vs_entropy, run_bandit_suite, run_deepsea_suite,
    write_aggregate_csv, write_records_csv, EnvConfig, ExperimentConfig, GroupBy, RegretReport,
};
use expert_prior::maxent::{
    dual_gradient, dual_objective, fit_prior, gibbs_weights, FeatureMatrix, GibbsPrior,
    PriorOptions, ReferencePrior,
};
use expert_prior::sampling::{
    bandit_log_posterior, mdp_log_posterior, sgld_sample, FnDensity, Parameterization, SgldConfig,
    SgldInit,
};
use expert_prior::seed::Rng;

// Tolerances and thresholds.
const DUAL_TOL: f64 = 1e-3;
const MASS_MIN: f64 = 0.95;
const FD_REL_TOL: f64 = 1e-4;
const FD_STEP: f64 = 1e-6;
const FD_INSTANCES: usize = 20;
const LAMBDA_SUM_TOL: f64 = 1e-4;
const LOW_GAP: f64 = 0.6;
const HIGH_SLACK: f64 = 1.15;
const SUBLINEAR: f64 = 1.9;
const SPEARMAN_MIN: f64 = 0.5;
const ENTROPY_SPAN: f64 = 0.25;
const TRAILING: usize = 50;
const REACH_FRACTION: f64 = 0.8;
const REACH_BY: usize = 500;
const REACH_RATIO: f64 = 0.5;
const UNIFORM_GAP: f64 = 0.15;
const FINAL_WINDOW: usize = 500;
const REGRET_IDENTITY_TOL: f64 = 1e-9;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn config(name: &str) -> ExperimentConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs").join(name);
    ExperimentConfig::load(path).expect("shipped config parses")
}

fn final_row(report: &RegretReport, group_by: &GroupBy, algo: &str, group: &str) -> f64 {
    let last = report.metadata.episodes;
    aggregate(report, group_by)
        .unwrap()
        .into_iter()
        .find(|r| r.algo == algo && r.group == group && r.episode == last)
        .unwrap_or_else(|| panic!("no row for {algo}/{group}"))
        .mean_cum_regret
}

fn rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff: f64 = analytic.iter().zip(numeric).map(|(a, n)| (a - n).powi(2)).sum::<f64>().sqrt();
    let norm: f64 = numeric.iter().map(|n| n * n).sum::<f64>().sqrt();
    diff / norm.max(1e-12)
}

fn central_difference(f: &dyn Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let mut up = x.to_vec();
            let mut dn = x.to_vec();
            up[i] += FD_STEP;
            dn[i] -= FD_STEP;
            (f(&up) - f(&dn)) / (2.0 * FD_STEP)
        })
        .collect()
}

// 1 -----------------------------------------------------------------------

fn criterion_1() -> Outcome {
    let lambda = 0.1;
    let demos = DemoDataset::new(EnvSignature::Bandit { arms: 2 }, vec![Trajectory::arm(0); 10]);
    let reference = ReferencePrior::Points {
        points: vec![TaskParam(vec![0.9, 0.1]), TaskParam(vec![0.1, 0.9])],
    };
    let model = QModel::Tabular { states: 1, actions: 2 };
    let opts = PriorOptions {
        lambda_star: lambda,
        samples: 2000,
        seed: 1,
        ..PriorOptions::default()
    };
    let fit = fit_prior(&demos, &reference, &model, &opts).unwrap();

    // The ten columns are identical, so for any total weight the barrier is
    // largest with equal weights; the grid runs over the common ln α_i.
    let n = fit.prior.alpha.len();
    let (grid_dual, grid_x) = (0..=1000)
        .map(|j| -6.0 + 0.01 * j as f64)
        .map(|x| (dual_objective(&vec![x.exp(); n], &fit.features, lambda).unwrap(), x))
        .fold((f64::NEG_INFINITY, 0.0), |a, b| if b.0 > a.0 { b } else { a });
    let dual_ok = (fit.report.dual - grid_dual).abs() < DUAL_TOL;

    let w = gibbs_weights(&fit.prior.alpha, &fit.features).unwrap();
    let mass: f64 = fit
        .features
        .reference_samples()
        .iter()
        .zip(&w)
        .filter(|(t, _)| t.0[0] > t.0[1])
        .map(|(_, w)| w)
        .sum();
    outcome(
        dual_ok && mass >= MASS_MIN,
        format!(
            "dual {:.6} vs grid {:.6} (ln α = {grid_x:.2}, tol {DUAL_TOL}); mass on expert-consistent task {mass:.4} (need ≥ {MASS_MIN})",
            fit.report.dual, grid_dual
        ),
    )
}

// 2 -----------------------------------------------------------------------

fn random_bandit_prior(k: usize, rng: &mut Rng) -> GibbsPrior {
    let arms: Vec<usize> = (0..rng.random_range(1..6)).map(|_| rng.random_range(0..k)).collect();
    GibbsPrior::from_parts(
        arms.iter().map(|_| rng.random_range(0.1..3.0)).collect(),
        DemoDataset::new(EnvSignature::Bandit { arms: k }, arms.iter().map(|&a| Trajectory::arm(a)).collect()),
        QModel::Tabular { states: 1, actions: k },
        ReferencePrior::UniformBox { dim: k },
        1.0,
        f64::INFINITY,
        rng.random_range(0.5..10.0),
    )
    .unwrap()
}

fn random_deep_sea_prior(rng: &mut Rng) -> GibbsPrior {
    let spec = DeepSeaSpec::new(rng.random_range(2..5), GoalDistribution::Uniform).unwrap();
    let env = EnvSpec::DeepSea(spec.clone());
    let demos = generate_demos(&env, &TaskDistribution::goals(&spec), 3.0, 4, rng).unwrap();
    let model = env.q_model();
    let dim = model.dim();
    GibbsPrior::from_parts(
        (0..4).map(|_| rng.random_range(0.1..2.0)).collect(),
        demos,
        model,
        ReferencePrior::Gaussian { dim, std: 0.7 },
        1.0,
        3.0,
        rng.random_range(1.0..5.0),
    )
    .unwrap()
}

fn criterion_2() -> Outcome {
    let mut rng = Rng::seed_from_u64(2);
    let mut worst = [0.0f64; 5];

    for _ in 0..FD_INSTANCES {
        let (s, n) = (rng.random_range(5..60), rng.random_range(1..6));
        let values: Vec<f64> = (0..s * n).map(|_| rng.random_range(0.0..1.0)).collect();
        let fm = FeatureMatrix::from_values(s, n, values).unwrap();
        let lambda = rng.random_range(0.05..5.0);
        let alpha: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..3.0)).collect();
        let g = dual_gradient(&alpha, &fm, lambda).unwrap();
        let fd = central_difference(&|a| dual_objective(a, &fm, lambda).unwrap(), &alpha);
        worst[0] = worst[0].max(rel_err(&g, &fd));
    }

    for i in 0..FD_INSTANCES {
        let prior = if i % 2 == 0 {
            random_bandit_prior(rng.random_range(2..6), &mut rng)
        } else {
            random_deep_sea_prior(&mut rng)
        };
        let theta: Vec<f64> = (0..prior.dim()).map(|_| rng.random_range(0.05..0.95)).collect();
        let g = prior.grad_log_prior(&theta).unwrap();
        let fd = central_difference(&|t| prior.log_prior_pdf(t).unwrap(), &theta);
        worst[1] = worst[1].max(rel_err(&g, &fd));
    }

    for _ in 0..FD_INSTANCES {
        let k = rng.random_range(2..6);
        let prior = random_bandit_prior(k, &mut rng);
        let mut hist = OnlineHistory::new();
        for _ in 0..rng.random_range(1..30) {
            hist.push_episode(vec![Transition {
                state: 0,
                action: rng.random_range(0..k),
                reward: if rng.random_bool(0.5) { 1.0 } else { 0.0 },
                next_state: 0,
                done: true,
            }]);
        }
        let theta: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..0.95)).collect();
        let (_, g) = bandit_log_posterior(&theta, &hist, &prior).unwrap();
        let fd = central_difference(&|t| bandit_log_posterior(t, &hist, &prior).unwrap().0, &theta);
        worst[2] = worst[2].max(rel_err(&g, &fd));
    }

    for _ in 0..FD_INSTANCES {
        let prior = random_deep_sea_prior(&mut rng);
        let states = prior.model.num_states();
        let mut hist = OnlineHistory::new();
        hist.push_episode(
            (0..rng.random_range(1..25))
                .map(|_| Transition {
                    state: rng.random_range(0..states),
                    action: rng.random_range(0..2),
                    reward: rng.random_range(-0.1..1.0),
                    next_state: rng.random_range(0..states),
                    done: rng.random_bool(0.3),
                })
                .collect(),
        );
        let theta: Vec<f64> = (0..prior.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (_, g) = mdp_log_posterior(&theta, &hist, &prior).unwrap();
        let fd = central_difference(&|t| mdp_log_posterior(t, &hist, &prior).unwrap().0, &theta);
        worst[3] = worst[3].max(rel_err(&g, &fd));
    }

    for _ in 0..FD_INSTANCES {
        let xi: Vec<f64> = (0..rng.random_range(1..6)).map(|_| rng.random_range(-6.0..6.0)).collect();
        let mut g = vec![0.0; xi.len()];
        Parameterization::LogitBox.log_jacobian_into(&xi, &mut g);
        let fd = central_difference(
            &|x| Parameterization::LogitBox.log_jacobian_into(x, &mut vec![0.0; x.len()]),
            &xi,
        );
        worst[4] = worst[4].max(rel_err(&g, &fd));
    }

    outcome(
        worst.iter().all(|&e| e < FD_REL_TOL),
        format!(
            "worst relative error over {FD_INSTANCES} instances each (tol {FD_REL_TOL}): dual {:.1e}, prior {:.1e}, bandit posterior {:.1e}, mdp posterior {:.1e}, logit-box jacobian {:.1e}",
            worst[0], worst[1], worst[2], worst[3], worst[4]
        ),
    )
}

// 3 -----------------------------------------------------------------------

fn moments(draws: &[TaskParam]) -> (f64, f64) {
    let n = draws.len() as f64;
    let mean = draws.iter().map(|t| t.0[0]).sum::<f64>() / n;
    let var = draws.iter().map(|t| (t.0[0] - mean).powi(2)).sum::<f64>() / n;
    (mean, var)
}

fn criterion_3() -> Outcome {
    let cfg = |init: f64| SgldConfig {
        step_size: 0.01,
        steps: 200_000,
        thinning: 10,
        seed: 3,
        init: SgldInit::Param(TaskParam(vec![init])),
        ..SgldConfig::default()
    };
    let normal = FnDensity::new(1, Parameterization::Unconstrained, |t: &[f64], g: &mut [f64]| {
        g[0] -= t[0];
        -0.5 * t[0] * t[0]
    });
    let (nm, nv) = moments(&sgld_sample(&normal, &cfg(0.0)).unwrap());
    let uniform = FnDensity::new(1, Parameterization::LogitBox, |_: &[f64], _: &mut [f64]| 0.0);
    let (um, uv) = moments(&sgld_sample(&uniform, &cfg(0.5)).unwrap());
    let pass = nm.abs() < 0.05
        && (0.9..=1.1).contains(&nv)
        && (0.45..=0.55).contains(&um)
        && (uv - 1.0 / 12.0).abs() <= 0.01;
    outcome(
        pass,
        format!(
            "N(0,1): mean {nm:.4} (|·| < 0.05), var {nv:.4} ([0.9, 1.1]); U(0,1): mean {um:.4} ([0.45, 0.55]), var {uv:.4} (1/12 ± 0.01)"
        ),
    )
}

// 4 -----------------------------------------------------------------------

fn actions(agent: &mut dyn BanditAgent, theta: &[f64], steps: usize, seed: u64) -> Vec<usize> {
    let mut rng = Rng::seed_from_u64(seed);
    (0..steps)
        .map(|_| {
            let a = agent.act().unwrap();
            let r = if rng.random_bool(theta[a]) { 1.0 } else { 0.0 };
            agent.observe(a, r).unwrap();
            a
        })
        .collect()
}

fn criterion_4() -> Outcome {
    let k = 4;
    let sig = EnvSignature::Bandit { arms: k };
    let model = QModel::Tabular { states: 1, actions: k };
    let reference = ReferencePrior::UniformBox { dim: k };

    let empty_fit = fit_prior(&DemoDataset::empty(sig), &reference, &model, &PriorOptions::default()).unwrap();
    let mut rng = Rng::seed_from_u64(4);
    let zero_pdf = (0..100).all(|_| {
        let theta: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..1.0)).collect();
        empty_fit.prior.log_prior_pdf(&theta).unwrap() == 0.0
    });
    let no_demos = empty_fit.prior.alpha.is_empty() && zero_pdf;

    let points = ReferencePrior::Points {
        points: vec![TaskParam(vec![0.8, 0.2]), TaskParam(vec![0.6, 0.5])],
    };
    let constant: Vec<(f64, f64)> = [0.1, 1.0, 10.0]
        .into_iter()
        .map(|lambda| {
            let demos = DemoDataset::new(EnvSignature::Bandit { arms: 2 }, vec![Trajectory::arm(0); 10]);
            let opts = PriorOptions {
                lambda_star: lambda,
                samples: 64,
                ..PriorOptions::default()
            };
            let fit = fit_prior(&demos, &points, &QModel::Tabular { states: 1, actions: 2 }, &opts).unwrap();
            (lambda, fit.prior.alpha.iter().sum::<f64>())
        })
        .collect();
    let sums_ok = constant.iter().all(|(l, s)| (l - s).abs() < LAMBDA_SUM_TOL);

    let empty = Arc::new(GibbsPrior::empty(sig, model, reference, 10.0));
    let no_demos_ds = DemoDataset::empty(sig);
    let dist = TaskDistribution::BetaProduct(vec![(1.0, 1.0); k]);
    let ctx = BanditContext {
        arms: k,
        prior: &empty,
        demos: &no_demos_ds,
        true_dist: &dist,
    };
    let theta = [0.2, 0.7, 0.5, 0.4];
    let mut ts_same = true;
    let mut ucb_same = true;
    for seed in 0..5 {
        let mut exp = build_bandit_agent(&AgentConfig::new(AgentKind::ExperiorTs), &ctx, seed).unwrap();
        let mut naive = build_bandit_agent(&AgentConfig::new(AgentKind::NaiveTs), &ctx, seed).unwrap();
        ts_same &= actions(exp.as_mut(), &theta, 300, seed) == actions(naive.as_mut(), &theta, 300, seed);
        let mut explore = UcbAgent::with_demos(k, 2.0, &no_demos_ds).unwrap();
        let mut ucb = build_bandit_agent(&AgentConfig::new(AgentKind::NaiveUcb), &ctx, seed).unwrap();
        ucb_same &= actions(&mut explore, &theta, 300, seed) == actions(ucb.as_mut(), &theta, 300, seed);
    }
    outcome(
        no_demos && sums_ok && ts_same && ucb_same,
        format!(
            "N=0 prior ≡ μ0: {no_demos}; Σα vs λ* {constant:?} (tol {LAMBDA_SUM_TOL}); experior-ts(empty) ≡ naive-ts: {ts_same}; ucb-explore(no demos) ≡ naive-ucb: {ucb_same}"
        ),
    )
}

// 5 and 9 ------------------------------------------------------------------

fn csv_bytes(report: &RegretReport, group_by: &GroupBy) -> (Vec<u8>, Vec<u8>) {
    let mut records = Vec::new();
    write_records_csv(&report.records, &mut records).unwrap();
    let mut agg = Vec::new();
    write_aggregate_csv(&aggregate(report, group_by).unwrap(), &mut agg).unwrap();
    (records, agg)
}

fn criterion_5(cfg: &ExperimentConfig, report: &RegretReport) -> Outcome {
    let by = GroupBy::EntropyBin(cfg.entropy_thresholds);
    let r = |algo: &str, bin: &str| final_row(report, &by, algo, bin);
    let (o_lo, e_lo, n_lo) = (r("oracle-ts", "low"), r("experior-ts", "low"), r("naive-ts", "low"));
    let (e_hi, n_hi) = (r("experior-ts", "high"), r("naive-ts", "high"));
    let complete = report.metadata.failures.is_empty() && report.records.len() == report.expected_records();
    outcome(
        complete && o_lo <= e_lo && e_lo <= n_lo && e_lo < LOW_GAP * n_lo && e_hi <= HIGH_SLACK * n_hi,
        format!(
            "low bin: oracle {o_lo:.2} ≤ experior {e_lo:.2} ≤ naive {n_lo:.2}, experior/naive {:.3} (< {LOW_GAP}); high bin: experior/naive {:.3} (≤ {HIGH_SLACK})",
            e_lo / n_lo,
            e_hi / n_hi
        ),
    )
}

fn criterion_9(cfg: &ExperimentConfig, one_worker: &RegretReport) -> Outcome {
    let by = GroupBy::EntropyBin(cfg.entropy_thresholds);
    let mut eight = cfg.clone();
    eight.workers = 8;
    let other = run_bandit_suite(&eight).unwrap();
    let (r1, a1) = csv_bytes(one_worker, &by);
    let (r8, a8) = csv_bytes(&other, &by);
    outcome(
        r1 == r8 && a1 == a8,
        format!(
            "records.csv {} bytes, identical: {}; aggregate.csv {} bytes, identical: {}",
            r1.len(),
            r1 == r8,
            a1.len(),
            a1 == a8
        ),
    )
}

// 6 -----------------------------------------------------------------------

fn criterion_6() -> Outcome {
    let horizon = run_bandit_suite(&config("bandit-horizon.toml")).unwrap();
    let rows = aggregate(&horizon, &GroupBy::All).unwrap();
    let at = |e: u32| rows.iter().find(|r| r.episode == e).unwrap().mean_cum_regret;
    let (r300, r1200) = (at(300), at(1200));
    let sub_ok = r1200 < SUBLINEAR * r300;

    let sweep = run_bandit_suite(&config("bandit-entropy-sweep.toml")).unwrap();
    let fit = regret_vs_entropy(&sweep, "experior-ts").unwrap();
    let ent: Vec<f64> = sweep.metadata.distributions.iter().map(|d| d.entropy).collect();
    let (hmin, hmax) = (
        ent.iter().copied().fold(f64::INFINITY, f64::min),
        ent.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    );
    let span_ok = ent.len() >= 8 && hmin <= ENTROPY_SPAN && hmax >= 10f64.ln() - ENTROPY_SPAN;
    let rho = fit.spearman.unwrap_or(f64::NAN);
    let rho_ok = rho > SPEARMAN_MIN;

    let base = config("bandit-arms.toml");
    let by_k: Vec<(usize, f64)> = [2, 5, 10]
        .into_iter()
        .map(|k| {
            let mut cfg = base.clone();
            cfg.env = EnvConfig::Bandit { arms: k };
            let report = run_bandit_suite(&cfg).unwrap();
            (k, final_row(&report, &GroupBy::All, "experior-ts", "all"))
        })
        .collect();
    let k_ok = by_k.windows(2).all(|w| w[1].1 >= w[0].1);

    outcome(
        sub_ok && span_ok && rho_ok && k_ok,
        format!(
            "(a) regret T=1200 {r1200:.2} vs T=300 {r300:.2}, ratio {:.3} (< {SUBLINEAR}); (b) Spearman {rho:.3} (> {SPEARMAN_MIN}) over {} distributions, entropy [{hmin:.3}, {hmax:.3}]; (c) regret by K {:?}",
            r1200 / r300,
            ent.len(),
            by_k.iter().map(|(k, r)| format!("K={k}: {r:.2}")).collect::<Vec<_>>()
        ),
    )
}

// 7 -----------------------------------------------------------------------

/// Per-episode reward averaged over seeds, and the mean optimal value.
fn reward_curve(report: &RegretReport, algo: &str, dist: u32) -> (Vec<f64>, f64) {
    let rows: Vec<&RegretRecord> = report
        .records
        .iter()
        .filter(|r| r.algo == algo && r.task_dist_id == dist)
        .collect();
    let t = report.metadata.episodes as usize;
    let seeds = report.metadata.tasks as f64;
    let mut curve = vec![0.0; t];
    let mut v_star = 0.0;
    for r in &rows {
        curve[r.episode as usize - 1] += r.reward / seeds;
        v_star += (r.reward + r.instant_regret) / rows.len() as f64;
    }
    (curve, v_star)
}

/// First episode whose trailing mean reaches `target`, or `T + 1`.
fn episodes_to(curve: &[f64], target: f64) -> usize {
    (TRAILING..=curve.len())
        .find(|&e| curve[e - TRAILING..e].iter().sum::<f64>() / TRAILING as f64 >= target)
        .unwrap_or(curve.len() + 1)
}

fn criterion_7() -> Outcome {
    let cfg = config("deepsea-goals.toml");
    let report = run_deepsea_suite(&cfg).unwrap();
    let id = |name: &str| report.metadata.distributions.iter().find(|d| d.name == name).unwrap().id;
    let (corner, uniform) = (id("corner"), id("uniform"));

    let (ce, v_c) = reward_curve(&report, "experior-bootdqn", corner);
    let (cn, _) = reward_curve(&report, "naive-bootdqn", corner);
    let te = episodes_to(&ce, REACH_FRACTION * v_c);
    let tn = episodes_to(&cn, REACH_FRACTION * v_c);

    let (ue, v_u) = reward_curve(&report, "experior-bootdqn", uniform);
    let (un, _) = reward_curve(&report, "naive-bootdqn", uniform);
    let tail = |c: &[f64]| c[c.len() - FINAL_WINDOW..].iter().sum::<f64>() / FINAL_WINDOW as f64;
    let gap = (tail(&ue) - tail(&un)).abs();

    outcome(
        te <= REACH_BY && (te as f64) < REACH_RATIO * tn as f64 && gap < UNIFORM_GAP * v_u,
        format!(
            "corner: episodes to {REACH_FRACTION}·V* (trailing {TRAILING}-episode mean over seeds; T+1 if never) experior {te} (≤ {REACH_BY}), naive {tn}, ratio {:.3} (< {REACH_RATIO}); uniform: final-{FINAL_WINDOW} rewards {:.3} vs {:.3}, gap {:.3}·V* (< {UNIFORM_GAP})",
            te as f64 / tn as f64,
            tail(&ue),
            tail(&un),
            gap / v_u
        ),
    )
}

// 8 -----------------------------------------------------------------------

/// Best return from `cell` over every action sequence, summed back to front.
fn best_return(spec: &DeepSeaSpec, cell: Cell, goal: usize) -> f64 {
    [LEFT, RIGHT]
        .into_iter()
        .map(|a| first_action_return(spec, cell, a, goal))
        .fold(f64::NEG_INFINITY, f64::max)
}

fn first_action_return(spec: &DeepSeaSpec, cell: Cell, action: usize, goal: usize) -> f64 {
    let step = spec.step(cell, action, goal).unwrap();
    if step.done {
        step.reward
    } else {
        step.reward + best_return(spec, step.next, goal)
    }
}

fn criterion_8(bandit: &(ExperimentConfig, RegretReport)) -> Outcome {
    let mut dp_ok = true;
    for m in 2..=5 {
        let spec = DeepSeaSpec::new(m, GoalDistribution::Uniform).unwrap();
        for goal in 0..m {
            let (q, v) = solve_deep_sea_q(&spec, goal);
            dp_ok &= v == best_return(&spec, spec.start(), goal);
            for s in 0..spec.num_states() {
                for a in [LEFT, RIGHT] {
                    dp_ok &= q.0[2 * s + a] == first_action_return(&spec, spec.cell(s), a, goal);
                }
            }
        }
    }

    let mut rng = Rng::seed_from_u64(8);
    let params: Vec<(f64, f64)> = (0..5).map(|_| (rng.random_range(0.1..4.0), rng.random_range(0.1..4.0))).collect();
    let mut oracle = OracleTsAgent::new(&TaskDistribution::BetaProduct(params.clone()), 8).unwrap();
    let (mut s, mut f) = (vec![0.0; 5], vec![0.0; 5]);
    let mut conj_ok = true;
    for _ in 0..500 {
        let arm = rng.random_range(0..5);
        let r = if rng.random_bool(0.4) { 1.0 } else { 0.0 };
        oracle.observe(arm, r).unwrap();
        s[arm] += r;
        f[arm] += 1.0 - r;
        let expected: Vec<(f64, f64)> = params.iter().enumerate().map(|(k, &(a, b))| (a + s[k], b + f[k])).collect();
        conj_ok &= oracle.posterior_params() == expected;
    }

    let (cfg, report) = bandit;
    let entries = cfg.task_distributions().unwrap();
    let mut identity_ok = true;
    let mut cells = std::collections::BTreeMap::<(String, u32, u32), Vec<&RegretRecord>>::new();
    for r in &report.records {
        cells.entry((r.algo.clone(), r.task_dist_id, r.task_id)).or_default().push(r);
    }
    for ((_, d, t), rows) in &cells {
        let task = cell_task(cfg, &entries[*d as usize], *t).unwrap();
        let best = task.optimal_value;
        let mut chosen_sum = 0.0;
        for r in rows {
            let arm = task.param.0.iter().position(|&th| best - th == r.instant_regret);
            match arm {
                Some(a) => chosen_sum += task.param.0[a],
                None => identity_ok = false,
            }
        }
        let regret_sum: f64 = rows.iter().map(|r| r.instant_regret).sum();
        let total = rows.len() as f64 * best;
        identity_ok &= (regret_sum + chosen_sum - total).abs() <= REGRET_IDENTITY_TOL * total.max(1.0);
    }

    outcome(
        dp_ok && conj_ok && identity_ok,
        format!(
            "deep sea DP = enumeration for 2 ≤ M ≤ 5 (exact): {dp_ok}; oracle-ts conjugate updates exact: {conj_ok}; regret identity over {} cells (rel tol {REGRET_IDENTITY_TOL}): {identity_ok}",
            cells.len()
        ),
    )
}

fn main() {
    // `cargo test` passes harness flags; a name filter that excludes
    // "acceptance" skips the suite.
    let args: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    if !args.is_empty() && !args.iter().any(|a| "acceptance".contains(a.as_str())) {
        return;
    }

    let mut failed = 0;
    let mut report = |n: usize, name: &str, start: Instant, o: Outcome| {
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        if !o.pass {
            failed += 1;
        }
        println!(
            "criterion {n} ({name}): {verdict} [{:.1}s] {}",
            start.elapsed().as_secs_f64(),
            o.detail
        );
    };

    let t = Instant::now();
    report(1, "dual optimization", t, criterion_1());
    let t = Instant::now();
    report(2, "gradient suites", t, criterion_2());
    let t = Instant::now();
    report(3, "SGLD calibration", t, criterion_3());
    let t = Instant::now();
    report(4, "closed-form identities", t, criterion_4());

    let t = Instant::now();
    let cfg5 = config("bandit-entropy-bins.toml");
    let run5 = run_bandit_suite(&cfg5).unwrap();
    report(5, "binned bandit ordering", t, criterion_5(&cfg5, &run5));
    let t = Instant::now();
    report(6, "regret vs T, entropy and K", t, criterion_6());
    let t = Instant::now();
    report(7, "deep sea ordering", t, criterion_7());
    let bandit = (cfg5, run5);
    let t = Instant::now();
    report(8, "exact oracles", t, criterion_8(&bandit));
    let t = Instant::now();
    report(9, "determinism across workers", t, criterion_9(&bandit.0, &bandit.1));

    println!("{} of 9 criteria passed", 9 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
