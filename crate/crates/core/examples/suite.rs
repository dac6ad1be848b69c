//! Run the small bandit benchmark from an inline config.

use expert_prior::harness::{aggregate, run_bandit_suite, ExperimentConfig, GroupBy};

const CONFIG: &str = r#"
seed = 3
workers = 2
episodes = 100
tasks = 4
demos = 100

[env]
kind = "bandit"
arms = 5

[distributions]
kind = "random-beta"
count = 3

[prior]
samples = 1024

[[agents]]
kind = "oracle-ts"

[[agents]]
kind = "experior-ts"
sgld = { steps = 50 }

[[agents]]
kind = "naive-ts"
sgld = { steps = 50 }

[[agents]]
kind = "naive-ucb"
"#;

fn main() -> expert_prior::Result<()> {
    let cfg = ExperimentConfig::from_toml(CONFIG)?;
    let report = run_bandit_suite(&cfg)?;
    println!("{} records, {} failures", report.records.len(), report.metadata.failures.len());
    for row in aggregate(&report, &GroupBy::All)?.iter().filter(|r| r.episode == 100) {
        println!("{:<12} {:7.2} ± {:.2}", row.algo, row.mean_cum_regret, row.stderr);
    }
    Ok(())
}
