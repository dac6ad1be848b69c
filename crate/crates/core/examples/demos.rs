//! Sample task distributions and generate Boltzmann-rational expert
//! demonstrations for a bandit and for Deep Sea.

use rand::SeedableRng;

use expert_prior::agents::demo_arm_counts;
use expert_prior::envs::{
    generate_demos, optimal_action_entropy, sample_beta_product_distribution, BernoulliBanditSpec,
    DeepSeaSpec, EnvSpec, GoalDistribution, TaskDistribution,
};
use expert_prior::seed::Rng;

fn main() -> expert_prior::Result<()> {
    let mut rng = Rng::seed_from_u64(7);

    let bandit = EnvSpec::Bandit(BernoulliBanditSpec::new(5)?);
    let dist = sample_beta_product_distribution(5, &mut rng)?;
    let h = optimal_action_entropy(&bandit, &dist, 4096, &mut rng)?;
    println!("bandit distribution {dist:?}");
    println!("optimal-arm entropy {h:.3} nats");
    for beta in [1.0, 10.0, f64::INFINITY] {
        let demos = generate_demos(&bandit, &dist, beta, 200, &mut rng)?;
        println!("beta {beta:>4}: arm counts {:?}", demo_arm_counts(&demos, 5)?);
    }

    let spec = DeepSeaSpec::new(6, GoalDistribution::Corner)?;
    let deep_sea = EnvSpec::DeepSea(spec.clone());
    let demos = generate_demos(&deep_sea, &TaskDistribution::goals(&spec), 10.0, 3, &mut rng)?;
    for (i, t) in demos.trajectories.iter().enumerate() {
        println!("deep sea demo {i}: {} steps", t.steps.len());
    }
    Ok(())
}
