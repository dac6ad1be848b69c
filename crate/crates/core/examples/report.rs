//! Aggregate regret records three ways and regress final regret on
//! entropy. Writes the CSV/JSON outputs to a temporary directory.

use expert_prior::harness::{
    aggregate, regret_vs_entropy, run_bandit_suite, ExperimentConfig, GroupBy, RegretReport,
};

const CONFIG: &str = r#"
seed = 8
episodes = 60
tasks = 3
demos = 50

[env]
kind = "bandit"
arms = 4

[distributions]
kind = "entropy-sweep"
count = 5
max_concentration = 8.0

[[agents]]
kind = "naive-ucb"

[[agents]]
kind = "bc"
"#;

fn main() -> expert_prior::Result<()> {
    let cfg = ExperimentConfig::from_toml(CONFIG)?;
    let report = run_bandit_suite(&cfg)?;

    for by in [GroupBy::All, GroupBy::EntropyBin(cfg.entropy_thresholds), GroupBy::Distribution] {
        println!("{by:?}");
        for row in aggregate(&report, &by)?.iter().filter(|r| r.episode == 60) {
            println!("  {:<10} {:<8} {:7.2} ± {:.2}", row.algo, row.group, row.mean_cum_regret, row.stderr);
        }
    }
    for algo in &report.metadata.algos {
        let fit = regret_vs_entropy(&report, algo)?;
        println!("{algo}: slope {:.2}, spearman {:?}", fit.slope, fit.spearman);
    }

    let dir = std::env::temp_dir().join("expert-prior-report-example");
    report.write_dir(&dir, &GroupBy::Distribution)?;
    let back = RegretReport::read_json(std::fs::File::open(dir.join("report.json"))?)?;
    assert_eq!(back.records.len(), report.records.len());
    println!("wrote {}", dir.display());
    Ok(())
}
