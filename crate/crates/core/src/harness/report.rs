use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::domain::RegretRecord;
use crate::error::{Error, Result};

use super::RegretReport;

pub const RECORDS_HEADER: [&str; 7] = [
    "algo",
    "task_dist_id",
    "task_id",
    "seed",
    "episode",
    "reward",
    "instant_regret",
];

pub const AGGREGATE_HEADER: [&str; 5] = ["algo", "group", "episode", "mean_cum_regret", "stderr"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EntropyBin {
    Low,
    Medium,
    High,
}

impl EntropyBin {
    pub const ALL: [EntropyBin; 3] = [EntropyBin::Low, EntropyBin::Medium, EntropyBin::High];

    /// Low below the first threshold, high above the second.
    pub fn from_entropy(entropy: f64, (lo, hi): (f64, f64)) -> Self {
        if entropy < lo {
            EntropyBin::Low
        } else if entropy > hi {
            EntropyBin::High
        } else {
            EntropyBin::Medium
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            EntropyBin::Low => "low",
            EntropyBin::Medium => "medium",
            EntropyBin::High => "high",
        }
    }
}

pub fn entropy_bin(entropy: f64, thresholds: (f64, f64)) -> EntropyBin {
    EntropyBin::from_entropy(entropy, thresholds)
}

#[derive(Debug, Clone, PartialEq)]
pub enum GroupBy {
    EntropyBin((f64, f64)),
    Distribution,
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub algo: String,
    pub group: String,
    pub episode: u32,
    pub mean_cum_regret: f64,
    pub stderr: f64,
}

/// Cumulative regret curves keyed by (algo, distribution), one per task.
type Curves = BTreeMap<(String, u32), BTreeMap<u32, Vec<f64>>>;

fn cumulative_curves(records: &[RegretRecord]) -> Result<Curves> {
    let mut raw: BTreeMap<(String, u32), BTreeMap<u32, Vec<(u32, f64)>>> = BTreeMap::new();
    for r in records {
        raw.entry((r.algo.clone(), r.task_dist_id))
            .or_default()
            .entry(r.task_id)
            .or_default()
            .push((r.episode, r.instant_regret));
    }
    let mut out = Curves::new();
    for (key, tasks) in raw {
        let mut curves = BTreeMap::new();
        for (task, mut eps) in tasks {
            eps.sort_by_key(|&(e, _)| e);
            if eps.iter().enumerate().any(|(i, &(e, _))| e as usize != i + 1) {
                return Err(Error::Dataset(format!(
                    "{} distribution {} task {task}: episodes are not 1..T",
                    key.0, key.1
                )));
            }
            let mut acc = 0.0;
            curves.insert(
                task,
                eps.into_iter()
                    .map(|(_, r)| {
                        acc += r;
                        acc
                    })
                    .collect(),
            );
        }
        out.insert(key, curves);
    }
    Ok(out)
}

fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Mean cumulative regret per episode and group, averaged over tasks within
/// a distribution and then over the group's distributions. The standard
/// error is across distributions, or across tasks when a group holds a
/// single distribution.
pub fn aggregate(report: &RegretReport, group_by: &GroupBy) -> Result<Vec<AggregateRow>> {
    if report.records.is_empty() {
        return Err(Error::Degenerate("empty report".into()));
    }
    let curves = cumulative_curves(&report.records)?;
    let group_of = |dist: u32| -> Result<(usize, String)> {
        Ok(match group_by {
            GroupBy::All => (0, "all".to_string()),
            GroupBy::Distribution => (dist as usize, format!("d{dist}")),
            GroupBy::EntropyBin(th) => {
                let info = report
                    .distribution(dist)
                    .ok_or_else(|| Error::Dataset(format!("no entropy for distribution {dist}")))?;
                let bin = entropy_bin(info.entropy, *th);
                (bin as usize, bin.name().to_string())
            }
        })
    };
    let mut groups: BTreeMap<(String, usize, String), Vec<&BTreeMap<u32, Vec<f64>>>> = BTreeMap::new();
    for ((algo, dist), tasks) in &curves {
        let (order, name) = group_of(*dist)?;
        groups.entry((algo.clone(), order, name)).or_default().push(tasks);
    }
    let mut rows = Vec::new();
    for ((algo, _, group), dists) in groups {
        let horizon = dists
            .iter()
            .flat_map(|d| d.values().map(Vec::len))
            .min()
            .unwrap_or(0);
        for t in 0..horizon {
            let (mean, stderr) = if dists.len() == 1 {
                let per_task: Vec<f64> = dists[0].values().map(|c| c[t]).collect();
                mean_and_stderr(&per_task)
            } else {
                let per_dist: Vec<f64> = dists
                    .iter()
                    .map(|d| d.values().map(|c| c[t]).sum::<f64>() / d.len() as f64)
                    .collect();
                mean_and_stderr(&per_dist)
            };
            rows.push(AggregateRow {
                algo: algo.clone(),
                group: group.clone(),
                episode: t as u32 + 1,
                mean_cum_regret: mean,
                stderr,
            });
        }
    }
    Ok(rows)
}

/// `(distribution id, entropy, mean cumulative regret at the last episode)`
/// for one algorithm, in id order.
pub fn final_regret_by_distribution(report: &RegretReport, algo: &str) -> Result<Vec<(u32, f64, f64)>> {
    final_regret_at(report, algo, None)
}

/// As [`final_regret_by_distribution`], at `episode` when given.
pub(crate) fn final_regret_at(
    report: &RegretReport,
    algo: &str,
    episode: Option<u32>,
) -> Result<Vec<(u32, f64, f64)>> {
    let records: Vec<RegretRecord> = report.records.iter().filter(|r| r.algo == algo).cloned().collect();
    if records.is_empty() {
        return Err(Error::Degenerate(format!("no records for `{algo}`")));
    }
    cumulative_curves(&records)?
        .into_iter()
        .map(|((_, dist), tasks)| {
            let entropy = report
                .distribution(dist)
                .ok_or_else(|| Error::Dataset(format!("no entropy for distribution {dist}")))?
                .entropy;
            let vals: Vec<f64> = tasks
                .values()
                .map(|c| match episode {
                    Some(e) => c.get(e as usize - 1).copied().ok_or_else(|| {
                        Error::invalid(format!("episode {e} beyond horizon {}", c.len()))
                    }),
                    None => Ok(*c.last().expect("nonempty curve")),
                })
                .collect::<Result<_>>()?;
            Ok((dist, entropy, vals.iter().sum::<f64>() / vals.len() as f64))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyRegression {
    pub slope: f64,
    pub intercept: f64,
    /// `None` when the regrets are constant.
    pub pearson: Option<f64>,
    pub spearman: Option<f64>,
    pub points: usize,
}

/// Least squares of `y` on `x` plus Pearson and Spearman correlations.
pub fn regress(points: &[(f64, f64)]) -> Result<EntropyRegression> {
    if points.len() < 3 {
        return Err(Error::Degenerate(format!("{} points, need at least 3", points.len())));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx <= 0.0 {
        return Err(Error::Degenerate("entropies are all equal".into()));
    }
    let slope = sxy / sxx;
    let (pearson, spearman) = if syy <= 0.0 {
        (None, None)
    } else {
        let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
        let rx = ranks(&xs);
        let ry = ranks(&ys);
        (Some(sxy / (sxx * syy).sqrt()), pearson_of(&rx, &ry))
    };
    Ok(EntropyRegression {
        slope,
        intercept: my - slope * mx,
        pearson,
        spearman,
        points: points.len(),
    })
}

fn pearson_of(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}

/// 1-based ranks, ties sharing their average rank.
fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut out = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = avg;
        }
        i = j + 1;
    }
    out
}

/// Final cumulative regret of `algo` against distribution entropy.
pub fn regret_vs_entropy(report: &RegretReport, algo: &str) -> Result<EntropyRegression> {
    let points: Vec<(f64, f64)> = final_regret_by_distribution(report, algo)?
        .into_iter()
        .map(|(_, h, r)| (h, r))
        .collect();
    regress(&points)
}

pub fn write_records_csv<W: Write>(records: &[RegretRecord], w: W) -> Result<()> {
    let mut wr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    wr.write_record(RECORDS_HEADER)?;
    for r in records {
        wr.serialize(r)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_records_csv<R: Read>(r: R) -> Result<Vec<RegretRecord>> {
    let mut rd = csv::Reader::from_reader(r);
    if rd.headers()?.iter().ne(RECORDS_HEADER) {
        return Err(Error::Dataset(format!("unexpected records header {:?}", rd.headers()?)));
    }
    Ok(rd.deserialize().collect::<std::result::Result<_, _>>()?)
}

pub fn write_aggregate_csv<W: Write>(rows: &[AggregateRow], w: W) -> Result<()> {
    let mut wr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    wr.write_record(AGGREGATE_HEADER)?;
    for r in rows {
        wr.serialize(r)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_aggregate_csv<R: Read>(r: R) -> Result<Vec<AggregateRow>> {
    let mut rd = csv::Reader::from_reader(r);
    if rd.headers()?.iter().ne(AGGREGATE_HEADER) {
        return Err(Error::Dataset(format!("unexpected aggregate header {:?}", rd.headers()?)));
    }
    Ok(rd.deserialize().collect::<std::result::Result<_, _>>()?)
}
