//! Bootstrapped DQN on Deep Sea, with and without an expert-informed
//! ensemble initialisation.

use rand::SeedableRng;

use expert_prior::agents::{init_ensemble, BootDqnAgent, BootDqnConfig, DeepSeaEpisode};
use expert_prior::envs::{generate_demos, solve_deep_sea_q, DeepSeaSpec, EnvSpec, GoalDistribution, TaskDistribution};
use expert_prior::harness::play_episodes;
use expert_prior::maxent::{fit_prior, PriorOptions, ReferencePrior};
use expert_prior::seed::Rng;

fn main() -> expert_prior::Result<()> {
    let spec = DeepSeaSpec::new(8, GoalDistribution::Corner)?;
    let env = EnvSpec::DeepSea(spec.clone());
    let model = env.q_model();
    let goal = spec.size - 1;
    let (_, v_star) = solve_deep_sea_q(&spec, goal);

    let mut rng = Rng::seed_from_u64(2);
    let demos = generate_demos(&env, &TaskDistribution::goals(&spec), f64::INFINITY, 50, &mut rng)?;
    let opts = PriorOptions {
        samples: 8192,
        beta_eff: 100.0,
        ..PriorOptions::default()
    };
    let reference = ReferencePrior::Gaussian { dim: model.dim(), std: 0.1 };
    let prior = fit_prior(&demos, &reference, &model, &opts)?.prior;

    let cfg = BootDqnConfig::default();
    for (name, prior) in [("informed", Some(&prior)), ("naive", None)] {
        let ensemble = init_ensemble(prior, &model, &cfg, 3)?;
        let mut agent = BootDqnAgent::new(model.clone(), ensemble, cfg.clone(), 4)?;
        let mut episode = DeepSeaEpisode::new(&spec, goal)?;
        let rewards = play_episodes(&mut agent, &mut episode, 300)?;
        let hits = rewards.iter().filter(|&&r| r > 0.5 * v_star).count();
        println!("{name:<8} reached the treasure in {hits} of 300 episodes");
    }
    Ok(())
}
