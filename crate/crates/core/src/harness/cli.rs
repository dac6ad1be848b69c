//! `expert-prior` command line.

use std::ffi::OsString;
use std::fs::File;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::domain::DemoDataset;
use crate::error::{Error, Result};
use crate::maxent::{fit_prior, prior_normalization_check};

use super::{
    aggregate, distribution_demos, distribution_prior_options, regret_vs_entropy,
    run_bandit_suite, run_deepsea_suite, write_aggregate_csv, DistributionInfo, EnvConfig,
    ExperimentConfig, GroupBy, RegretReport,
};

#[derive(Debug, Parser)]
#[command(name = "expert-prior", version, about = "Expert-informed priors and regret benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample the task distributions and write expert demonstrations.
    GenDemos(Common),
    /// Fit one maximum-entropy prior per task distribution.
    FitPrior(Common),
    /// Run the bandit suite and write regret records.
    RunBandit(Common),
    /// Run the Deep Sea suite and write reward/regret records.
    RunDeepsea(Common),
    /// Aggregate an existing report.json from the output directory.
    Report(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Overrides the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the worker count.
    #[arg(long)]
    workers: Option<usize>,
    /// Overrides the output directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(w) = self.workers {
            cfg.workers = w;
        }
        if let Some(o) = &self.out {
            cfg.out.clone_from(o);
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Runs the CLI and returns the process exit code: 0 on success, 1 on usage
/// or config errors, 2 on runtime failures.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let (common, action): (&Common, fn(&ExperimentConfig) -> Result<()>) = match &cli.command {
        Command::GenDemos(c) => (c, gen_demos),
        Command::FitPrior(c) => (c, fit_priors),
        Command::RunBandit(c) => (c, run_bandit),
        Command::RunDeepsea(c) => (c, run_deepsea),
        Command::Report(c) => (c, report),
    };
    let cfg = match common.load() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    match action(&cfg) {
        Ok(()) => 0,
        Err(e @ Error::Config(_)) => {
            eprintln!("error: {e}");
            1
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn pool<T: Send>(cfg: &ExperimentConfig, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    Ok(pool.install(f))
}

fn demo_path(out: &Path, id: u32) -> PathBuf {
    out.join("demos").join(format!("d{id}.jsonl"))
}

fn gen_demos(cfg: &ExperimentConfig) -> Result<()> {
    let entries = cfg.task_distributions()?;
    std::fs::create_dir_all(cfg.out.join("demos"))?;
    let infos: Vec<DistributionInfo> = entries
        .iter()
        .map(|e| DistributionInfo {
            id: e.id,
            name: e.name.clone(),
            entropy: e.entropy,
            distribution: e.dist.clone(),
        })
        .collect();
    serde_json::to_writer_pretty(File::create(cfg.out.join("distributions.json"))?, &infos)?;
    pool(cfg, || {
        entries.par_iter().try_for_each(|e| {
            let demos = distribution_demos(cfg, e)?;
            demos.save(demo_path(&cfg.out, e.id))
        })
    })??;
    println!("wrote demos for {} distributions to {}", entries.len(), cfg.out.join("demos").display());
    Ok(())
}

fn fit_priors(cfg: &ExperimentConfig) -> Result<()> {
    let entries = cfg.task_distributions()?;
    std::fs::create_dir_all(cfg.out.join("priors"))?;
    let lines = pool(cfg, || {
        entries
            .par_iter()
            .map(|e| {
                let path = demo_path(&cfg.out, e.id);
                let demos = if path.exists() {
                    DemoDataset::load(&path)?
                } else {
                    distribution_demos(cfg, e)?
                };
                let opts = distribution_prior_options(cfg, e);
                let fit = fit_prior(&demos, &cfg.reference(&e.env), &e.env.q_model(), &opts)?;
                let dir = cfg.out.join("priors");
                fit.prior.to_file().save(dir.join(format!("d{}.json", e.id)))?;
                fit.report.write_csv(File::create(dir.join(format!("d{}_fit.csv", e.id)))?)?;
                let check = prior_normalization_check(&fit.prior, opts.samples, opts.seed)?;
                Ok(format!(
                    "d{} {}: dual {:.6}, |grad| {:.2e}, ess {:.3}",
                    e.id, e.name, fit.report.dual, fit.report.grad_norm, check.ess_ratio
                ))
            })
            .collect::<Result<Vec<String>>>()
    })??;
    for l in lines {
        println!("{l}");
    }
    Ok(())
}

fn group_by(cfg: &ExperimentConfig) -> GroupBy {
    match cfg.env {
        EnvConfig::Bandit { .. } => GroupBy::EntropyBin(cfg.entropy_thresholds),
        EnvConfig::DeepSea { .. } => GroupBy::Distribution,
    }
}

fn finish(cfg: &ExperimentConfig, report: &RegretReport) -> Result<()> {
    report.write_dir(&cfg.out, &group_by(cfg))?;
    summarize(cfg, report)?;
    if !report.metadata.failures.is_empty() {
        return Err(Error::Degenerate(format!(
            "{} cells failed; see report.json",
            report.metadata.failures.len()
        )));
    }
    Ok(())
}

fn summarize(cfg: &ExperimentConfig, report: &RegretReport) -> Result<()> {
    if report.records.is_empty() {
        println!("no records");
        return Ok(());
    }
    let rows = aggregate(report, &group_by(cfg))?;
    let last = report.metadata.episodes;
    for r in rows.iter().filter(|r| r.episode == last) {
        println!(
            "{:<18} {:<14} cumulative regret {:>10.3} ± {:.3}",
            r.algo, r.group, r.mean_cum_regret, r.stderr
        );
    }
    if report.metadata.distributions.len() >= 3 {
        for algo in &report.metadata.algos {
            if let Ok(fit) = regret_vs_entropy(report, algo) {
                println!(
                    "{algo:<18} regret vs entropy: slope {:.3}, pearson {}, spearman {}",
                    fit.slope,
                    fmt_corr(fit.pearson),
                    fmt_corr(fit.spearman)
                );
            }
        }
    }
    Ok(())
}

fn fmt_corr(c: Option<f64>) -> String {
    c.map_or("undefined".into(), |v| format!("{v:.3}"))
}

fn run_bandit(cfg: &ExperimentConfig) -> Result<()> {
    let report = run_bandit_suite(cfg)?;
    finish(cfg, &report)
}

fn run_deepsea(cfg: &ExperimentConfig) -> Result<()> {
    let report = run_deepsea_suite(cfg)?;
    finish(cfg, &report)
}

fn report(cfg: &ExperimentConfig) -> Result<()> {
    let path = cfg.out.join("report.json");
    let report = RegretReport::read_json(
        File::open(&path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?,
    )?;
    if !report.records.is_empty() {
        let rows = aggregate(&report, &group_by(cfg))?;
        write_aggregate_csv(&rows, File::create(cfg.out.join("aggregate.csv"))?)?;
    }
    summarize(cfg, &report)
}
