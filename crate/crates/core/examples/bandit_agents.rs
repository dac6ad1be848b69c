//! Every bandit agent on the same task, sharing the reward stream.

use std::sync::Arc;

use rand::SeedableRng;

use expert_prior::agents::{build_bandit_agent, AgentConfig, AgentKind, BanditContext};
use expert_prior::envs::{generate_demos, sample_task, BernoulliBanditSpec, EnvSpec, TaskDistribution};
use expert_prior::harness::play_bandit;
use expert_prior::maxent::{fit_prior, PriorOptions, ReferencePrior};
use expert_prior::seed::Rng;

fn main() -> expert_prior::Result<()> {
    let arms = 6;
    let env = EnvSpec::Bandit(BernoulliBanditSpec::new(arms)?);
    let mut params = vec![(1.0, 8.0); arms];
    params[4] = (8.0, 1.0);
    let dist = TaskDistribution::BetaProduct(params);

    let mut rng = Rng::seed_from_u64(11);
    let demos = generate_demos(&env, &dist, f64::INFINITY, 100, &mut rng)?;
    let fit = fit_prior(&demos, &ReferencePrior::UniformBox { dim: arms }, &env.q_model(), &PriorOptions::default())?;
    let prior = Arc::new(fit.prior);
    let task = sample_task(&dist, &env, &mut rng)?;
    println!("task theta {:.3?}", task.param.0);

    let ctx = BanditContext {
        arms,
        prior: &prior,
        demos: &demos,
        true_dist: &dist,
    };
    for kind in [
        AgentKind::OracleTs,
        AgentKind::ExperiorTs,
        AgentKind::NaiveTs,
        AgentKind::NaiveUcb,
        AgentKind::UcbExplore,
        AgentKind::Bc,
    ] {
        let mut agent = build_bandit_agent(&AgentConfig::new(kind), &ctx, 1)?;
        let steps = play_bandit(agent.as_mut(), &task, 200, &mut Rng::seed_from_u64(99))?;
        let regret: f64 = steps.iter().map(|s| s.instant_regret).sum();
        println!("{:<12} cumulative regret after 200 pulls: {regret:7.2}", kind.to_string());
    }
    Ok(())
}
