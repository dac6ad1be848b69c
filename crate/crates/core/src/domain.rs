//! Shared data types: task parameters, demonstrations, online histories and
//! regret records, plus demo-file IO and dataset validation.

use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Vector of task parameters. For bandits these are arm means in `[0, 1]`;
/// for tabular MDPs they are optimal-Q estimates indexed `state * |A| + action`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TaskParam(pub Vec<f64>);

impl TaskParam {
    /// Arm means, checked to be finite and inside `[0, 1]`.
    pub fn bandit(values: Vec<f64>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && (0.0..=1.0).contains(*v))) {
            return Err(Error::invalid(format!("arm mean {v} outside [0, 1]")));
        }
        Ok(TaskParam(values))
    }

    /// Q-table for an environment with `states * actions` entries.
    pub fn q_table(values: Vec<f64>, states: usize, actions: usize) -> Result<Self> {
        if values.len() != states * actions {
            return Err(Error::Dimension {
                expected: states * actions,
                actual: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite Q-table entry"));
        }
        Ok(TaskParam(values))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Identifies the environment family a dataset or prior belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EnvSignature {
    Bandit { arms: usize },
    DeepSea { size: usize },
    LinearBandit { contexts: usize, arms: usize },
}

impl EnvSignature {
    pub fn num_states(&self) -> usize {
        match *self {
            EnvSignature::Bandit { .. } => 1,
            EnvSignature::DeepSea { size } => size * size,
            EnvSignature::LinearBandit { contexts, .. } => contexts,
        }
    }

    pub fn num_actions(&self) -> usize {
        match *self {
            EnvSignature::Bandit { arms } | EnvSignature::LinearBandit { arms, .. } => arms,
            EnvSignature::DeepSea { .. } => 2,
        }
    }

    pub fn horizon(&self) -> usize {
        match *self {
            EnvSignature::DeepSea { size } => size,
            _ => 1,
        }
    }

    /// Terminal ids are only meaningful for Deep Sea, where reaching the
    /// bottom row at column `c` ends in state `size * size + c`.
    fn terminal_range(&self) -> Option<std::ops::Range<usize>> {
        match *self {
            EnvSignature::DeepSea { size } => Some(size * size..size * size + size),
            _ => None,
        }
    }
}

impl fmt::Display for EnvSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EnvSignature::Bandit { arms } => write!(f, "bandit:{arms}"),
            EnvSignature::DeepSea { size } => write!(f, "deepsea:{size}"),
            EnvSignature::LinearBandit { contexts, arms } => write!(f, "linear:{contexts}x{arms}"),
        }
    }
}

impl FromStr for EnvSignature {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Dataset(format!("unrecognised env signature `{s}`"));
        let (kind, rest) = s.split_once(':').ok_or_else(bad)?;
        let num = |x: &str| x.parse::<usize>().map_err(|_| bad());
        match kind {
            "bandit" => Ok(EnvSignature::Bandit { arms: num(rest)? }),
            "deepsea" => Ok(EnvSignature::DeepSea { size: num(rest)? }),
            "linear" => {
                let (c, a) = rest.split_once('x').ok_or_else(bad)?;
                Ok(EnvSignature::LinearBandit {
                    contexts: num(c)?,
                    arms: num(a)?,
                })
            }
            _ => Err(bad()),
        }
    }
}

impl Serialize for EnvSignature {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for EnvSignature {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One expert demonstration: states and actions only, never rewards or the
/// task that generated it.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Trajectory {
    pub steps: Vec<(usize, usize)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terminal: Option<usize>,
}

impl Trajectory {
    /// Single-step bandit demonstration in the dummy state 0.
    pub fn arm(action: usize) -> Self {
        Trajectory {
            steps: vec![(0, action)],
            terminal: None,
        }
    }

    pub fn horizon(&self) -> usize {
        self.steps.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemoDataset {
    pub env: EnvSignature,
    pub trajectories: Vec<Trajectory>,
}

#[derive(Serialize, Deserialize)]
struct DemoHeader {
    env: EnvSignature,
    horizon: usize,
}

impl DemoDataset {
    pub fn new(env: EnvSignature, trajectories: Vec<Trajectory>) -> Self {
        DemoDataset { env, trajectories }
    }

    pub fn empty(env: EnvSignature) -> Self {
        DemoDataset::new(env, Vec::new())
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn horizon(&self) -> usize {
        self.trajectories
            .first()
            .map_or_else(|| self.env.horizon(), Trajectory::horizon)
    }

    /// Writes the line-oriented JSON format: a header line followed by one
    /// trajectory per line.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        let header = DemoHeader {
            env: self.env,
            horizon: self.horizon(),
        };
        serde_json::to_writer(&mut w, &header)?;
        w.write_all(b"\n")?;
        for t in &self.trajectories {
            serde_json::to_writer(&mut w, t)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Dataset("missing header line".into()))??;
        let header: DemoHeader = serde_json::from_str(&header)?;
        let mut trajectories = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let t: Trajectory = serde_json::from_str(&line)
                .map_err(|e| Error::Dataset(format!("line {}: {e}", i + 2)))?;
            if t.horizon() != header.horizon {
                return Err(Error::Dataset(format!(
                    "line {}: horizon {} differs from header horizon {}",
                    i + 2,
                    t.horizon(),
                    header.horizon
                )));
            }
            trajectories.push(t);
        }
        Ok(DemoDataset::new(header.env, trajectories))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_jsonl(f)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let f = std::io::BufReader::new(std::fs::File::open(path)?);
        Self::read_jsonl(f)
    }
}

/// Result of a successful validation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Validated {
    pub empty: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationIssue {
    /// `None` for dataset-level problems.
    pub trajectory: Option<usize>,
    pub message: String,
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.trajectory {
            Some(i) => write!(f, "trajectory {i}: {}", self.message),
            None => write!(f, "{}", self.message),
        }
    }
}

/// Checks every dataset invariant against `expected`, collecting all
/// violations rather than stopping at the first.
pub fn validate_dataset(
    demos: &DemoDataset,
    expected: EnvSignature,
) -> std::result::Result<Validated, Vec<ValidationIssue>> {
    let mut issues = Vec::new();
    if demos.env != expected {
        issues.push(ValidationIssue {
            trajectory: None,
            message: format!("env signature {} does not match {expected}", demos.env),
        });
    }
    let (states, actions) = (expected.num_states(), expected.num_actions());
    let horizon = demos.trajectories.first().map(Trajectory::horizon);
    for (i, t) in demos.trajectories.iter().enumerate() {
        let mut push = |message: String| {
            issues.push(ValidationIssue {
                trajectory: Some(i),
                message,
            })
        };
        if t.steps.is_empty() {
            push("empty trajectory".into());
        }
        if Some(t.horizon()) != horizon {
            push(format!(
                "horizon {} differs from first trajectory's {}",
                t.horizon(),
                horizon.unwrap_or(0)
            ));
        } else if i == 0 && t.horizon() != expected.horizon() {
            push(format!("horizon {} but {expected} requires {}", t.horizon(), expected.horizon()));
        }
        for &(s, a) in &t.steps {
            if a >= actions {
                push(format!("action {a} ≥ K={actions}"));
            }
            if s >= states {
                push(format!("state {s} ≥ |S|={states}"));
            }
        }
        if let (Some(term), Some(range)) = (t.terminal, expected.terminal_range()) {
            if !range.contains(&term) {
                push(format!("terminal state {term} outside {range:?}"));
            }
        }
    }
    if issues.is_empty() {
        Ok(Validated {
            empty: demos.is_empty(),
        })
    } else {
        Err(issues)
    }
}

/// One step of online interaction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: usize,
    pub action: usize,
    pub reward: f64,
    pub next_state: usize,
    /// `next_state` is terminal; its continuation value is zero.
    pub done: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct OnlineHistory {
    pub episodes: Vec<Vec<Transition>>,
}

impl OnlineHistory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push_episode(&mut self, episode: Vec<Transition>) {
        self.episodes.push(episode);
    }

    pub fn transitions(&self) -> impl Iterator<Item = &Transition> {
        self.episodes.iter().flatten()
    }

    pub fn is_empty(&self) -> bool {
        self.episodes.iter().all(Vec::is_empty)
    }
}

/// Per-episode regret row; column order matches the records CSV schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretRecord {
    pub algo: String,
    pub task_dist_id: u32,
    pub task_id: u32,
    pub seed: u64,
    /// 1-based episode index.
    pub episode: u32,
    pub reward: f64,
    pub instant_regret: f64,
}
