//! Deep Sea: an `M x M` grid where the agent starts top-left, moves one
//! column left or right while descending one row per step, and is paid only
//! on reaching the goal column of the bottom row.

use serde::{Deserialize, Serialize};

use crate::domain::{EnvSignature, TaskParam};
use crate::error::{Error, Result};

pub const LEFT: usize = 0;
pub const RIGHT: usize = 1;

/// Where the goal column is placed across tasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GoalDistribution {
    Corner,
    RightQuarter,
    RightHalf,
    Uniform,
}

impl GoalDistribution {
    pub const ALL: [GoalDistribution; 4] = [
        GoalDistribution::Corner,
        GoalDistribution::RightQuarter,
        GoalDistribution::RightHalf,
        GoalDistribution::Uniform,
    ];

    /// Categorical over goal columns `0..size`.
    pub fn probs(self, size: usize) -> Vec<f64> {
        let width = match self {
            GoalDistribution::Corner => 1,
            GoalDistribution::RightQuarter => (size / 4).max(1),
            GoalDistribution::RightHalf => (size / 2).max(1),
            GoalDistribution::Uniform => size,
        };
        (0..size)
            .map(|c| if c >= size - width { 1.0 / width as f64 } else { 0.0 })
            .collect()
    }

    pub fn name(self) -> &'static str {
        match self {
            GoalDistribution::Corner => "corner",
            GoalDistribution::RightQuarter => "right-quarter",
            GoalDistribution::RightHalf => "right-half",
            GoalDistribution::Uniform => "uniform",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Cell {
    pub row: usize,
    pub col: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub next: Cell,
    pub reward: f64,
    pub done: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeepSeaSpec {
    pub size: usize,
    pub goals: GoalDistribution,
    /// Charged for every `right` action.
    pub move_cost: f64,
}

impl DeepSeaSpec {
    /// Spec with the default move cost `0.01 / size`.
    pub fn new(size: usize, goals: GoalDistribution) -> Result<Self> {
        if size < 2 {
            return Err(Error::invalid(format!("Deep Sea size {size} < 2")));
        }
        Ok(DeepSeaSpec {
            size,
            goals,
            move_cost: 0.01 / size as f64,
        })
    }

    pub fn signature(&self) -> EnvSignature {
        EnvSignature::DeepSea { size: self.size }
    }

    pub fn num_states(&self) -> usize {
        self.size * self.size
    }

    pub fn start(&self) -> Cell {
        Cell { row: 0, col: 0 }
    }

    /// Ids `0..size²` are the grid cells above the bottom; arriving at the
    /// bottom in column `c` gives terminal id `size² + c`.
    pub fn state_id(&self, cell: Cell) -> usize {
        if cell.row >= self.size {
            self.size * self.size + cell.col
        } else {
            cell.row * self.size + cell.col
        }
    }

    pub fn cell(&self, id: usize) -> Cell {
        let m = self.size;
        if id >= m * m {
            Cell { row: m, col: id - m * m }
        } else {
            Cell { row: id / m, col: id % m }
        }
    }

    pub fn step(&self, state: Cell, action: usize, goal: usize) -> Result<Step> {
        if state.row >= self.size {
            return Err(Error::TerminalStep);
        }
        let col = match action {
            LEFT => state.col.saturating_sub(1),
            RIGHT => (state.col + 1).min(self.size - 1),
            _ => return Err(Error::invalid(format!("Deep Sea action {action}"))),
        };
        let next = Cell {
            row: state.row + 1,
            col,
        };
        let done = next.row == self.size;
        let mut reward = if action == RIGHT { -self.move_cost } else { 0.0 };
        if done && col == goal {
            reward += 1.0;
        }
        Ok(Step { next, reward, done })
    }
}

/// Exact backward induction. Returns the optimal Q-table (indexed
/// `state_id * 2 + action`) and the optimal value of the start state.
pub fn solve_deep_sea_q(spec: &DeepSeaSpec, goal: usize) -> (TaskParam, f64) {
    let m = spec.size;
    let mut q = vec![0.0f64; m * m * 2];
    for row in (0..m).rev() {
        for col in 0..m {
            let cell = Cell { row, col };
            for action in [LEFT, RIGHT] {
                let step = spec.step(cell, action, goal).expect("non-terminal cell");
                let cont = if step.done {
                    0.0
                } else {
                    let s = spec.state_id(step.next);
                    q[2 * s].max(q[2 * s + 1])
                };
                q[2 * spec.state_id(cell) + action] = step.reward + cont;
            }
        }
    }
    let v = q[0].max(q[1]);
    (TaskParam(q), v)
}
