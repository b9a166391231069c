//! Tabular Q-learning: dense value table, TD update and the ε-greedy policy.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::discretizer::{ActionIndex, DiscreteState, StateGrid};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnParams {
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon: f64,
}

impl Default for LearnParams {
    fn default() -> Self {
        LearnParams {
            alpha: 0.1,
            gamma: 0.95,
            epsilon: 0.1,
        }
    }
}

impl LearnParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::invalid("alpha", self.alpha, "must lie in (0, 1]"));
        }
        if !(self.gamma >= 0.0 && self.gamma < 1.0) {
            return Err(Error::invalid("gamma", self.gamma, "must lie in [0, 1)"));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::invalid(
                "epsilon",
                self.epsilon,
                "exploration probability must lie in the open interval (0, 1)",
            ));
        }
        Ok(())
    }
}

/// Shape of a Q-table: the four state-grid bin counts and the action count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TableDims {
    pub dist_bins: usize,
    pub angle_bins: usize,
    pub speed_bins: usize,
    pub goal_bins: usize,
    pub n_actions: usize,
}

impl TableDims {
    pub fn new(grid: &StateGrid, n_actions: usize) -> Self {
        TableDims {
            dist_bins: grid.dist_bins(),
            angle_bins: grid.angle_bins,
            speed_bins: grid.speed_bins(),
            goal_bins: grid.goal_bins(),
            n_actions,
        }
    }

    pub fn n_states(&self) -> usize {
        self.dist_bins * self.angle_bins * self.speed_bins * self.goal_bins
    }

    fn row(&self, s: DiscreteState) -> usize {
        ((s.dist_bin * self.angle_bins + s.angle_bin) * self.speed_bins + s.speed_bin) * self.goal_bins + s.goal_bin
    }
}

/// Dense action-value table, zero-initialised.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    dims: TableDims,
    values: Vec<f64>,
}

impl QTable {
    pub fn new(dims: TableDims) -> Self {
        QTable {
            dims,
            values: alloc::vec![0.0; dims.n_states() * dims.n_actions],
        }
    }

    pub fn for_grid(grid: &StateGrid, n_actions: usize) -> Self {
        QTable::new(TableDims::new(grid, n_actions))
    }

    pub fn dims(&self) -> TableDims {
        self.dims
    }

    pub fn n_actions(&self) -> usize {
        self.dims.n_actions
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, s: DiscreteState) -> &[f64] {
        let start = self.dims.row(s) * self.dims.n_actions;
        &self.values[start..start + self.dims.n_actions]
    }

    pub fn row_mut(&mut self, s: DiscreteState) -> &mut [f64] {
        let start = self.dims.row(s) * self.dims.n_actions;
        &mut self.values[start..start + self.dims.n_actions]
    }

    pub fn get(&self, s: DiscreteState, a: ActionIndex) -> f64 {
        self.row(s)[a]
    }

    pub fn set(&mut self, s: DiscreteState, a: ActionIndex, value: f64) {
        self.row_mut(s)[a] = value;
    }

    /// Checks that the table was built for `grid` and `n_actions`.
    pub fn check_dims(&self, grid: &StateGrid, n_actions: usize) -> Result<()> {
        let want = TableDims::new(grid, n_actions);
        let checks = [
            ("distance bins", want.dist_bins, self.dims.dist_bins),
            ("angle bins", want.angle_bins, self.dims.angle_bins),
            ("speed bins", want.speed_bins, self.dims.speed_bins),
            ("goal bins", want.goal_bins, self.dims.goal_bins),
            ("action count", want.n_actions, self.dims.n_actions),
        ];
        for (what, expected, found) in checks {
            if expected != found {
                return Err(Error::DimensionMismatch {
                    what,
                    expected,
                    found,
                });
            }
        }
        Ok(())
    }

    /// Text form: a `qtable` header with the five dimensions, then one line
    /// per flattened state holding the action values in shortest round-trip
    /// decimal notation.
    pub fn to_text(&self) -> String {
        let d = self.dims;
        let mut out = String::new();
        let _ = writeln!(
            out,
            "qtable {} {} {} {} {}",
            d.dist_bins, d.angle_bins, d.speed_bins, d.goal_bins, d.n_actions
        );
        for row in self.values.chunks(d.n_actions) {
            for (i, v) in row.iter().enumerate() {
                if i > 0 {
                    out.push(' ');
                }
                let _ = write!(out, "{v:?}");
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<QTable> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::invalid("qtable", "empty input", "missing header"))?;
        let mut fields = header.split_whitespace();
        if fields.next() != Some("qtable") {
            return Err(Error::invalid("qtable.header", header, "must start with `qtable`"));
        }
        let mut dim = |name: &'static str| -> Result<usize> {
            let raw = fields
                .next()
                .ok_or_else(|| Error::invalid(name, "missing", "header needs 5 dimensions"))?;
            match raw.parse::<usize>() {
                Ok(n) if n > 0 => Ok(n),
                _ => Err(Error::invalid(name, raw, "must be a positive integer")),
            }
        };
        let dims = TableDims {
            dist_bins: dim("dist_bins")?,
            angle_bins: dim("angle_bins")?,
            speed_bins: dim("speed_bins")?,
            goal_bins: dim("goal_bins")?,
            n_actions: dim("n_actions")?,
        };
        let mut values = Vec::with_capacity(dims.n_states() * dims.n_actions);
        let mut rows = 0;
        for line in lines {
            let before = values.len();
            for tok in line.split_whitespace() {
                let v: f64 = tok
                    .parse()
                    .map_err(|_| Error::invalid("qtable.value", tok, "must be a decimal number"))?;
                if !v.is_finite() {
                    return Err(Error::invalid("qtable.value", tok, "must be finite"));
                }
                values.push(v);
            }
            if values.len() - before != dims.n_actions {
                return Err(Error::DimensionMismatch {
                    what: "values per row",
                    expected: dims.n_actions,
                    found: values.len() - before,
                });
            }
            rows += 1;
        }
        if rows != dims.n_states() {
            return Err(Error::DimensionMismatch {
                what: "row count",
                expected: dims.n_states(),
                found: rows,
            });
        }
        Ok(QTable { dims, values })
    }
}

pub fn max_q(table: &QTable, s: DiscreteState) -> f64 {
    table.row(s).iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Lowest index among the maximal entries of row `s`.
pub fn argmax_q(table: &QTable, s: DiscreteState) -> ActionIndex {
    let mut best = 0;
    let row = table.row(s);
    for (i, &q) in row.iter().enumerate() {
        if q > row[best] {
            best = i;
        }
    }
    best
}

/// One-step Q-learning update of entry `(s, a)`.
pub fn q_update(
    table: &mut QTable,
    s: DiscreteState,
    a: ActionIndex,
    reward: f64,
    s_next: DiscreteState,
    params: &LearnParams,
) {
    let target = reward + params.gamma * max_q(table, s_next);
    let q = table.get(s, a);
    table.set(s, a, q + params.alpha * (target - q));
}

/// Outcome of an ε-greedy draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EpsilonChoice {
    pub action: ActionIndex,
    /// True when the uniform-random branch fired.
    pub explored: bool,
}

/// Draws the exploration coin, then either a uniform action or `greedy()`.
///
/// Always consumes one uniform for the coin, plus one integer draw when
/// exploring, so the two ε-greedy policies advance the RNG identically.
pub fn epsilon_greedy<R: Rng + ?Sized>(
    n_actions: usize,
    epsilon: f64,
    rng: &mut R,
    greedy: impl FnOnce() -> ActionIndex,
) -> EpsilonChoice {
    let coin: f64 = rng.gen();
    if coin < epsilon {
        EpsilonChoice {
            action: rng.gen_range(0..n_actions),
            explored: true,
        }
    } else {
        EpsilonChoice {
            action: greedy(),
            explored: false,
        }
    }
}

/// ε-greedy policy over the Q-table. `epsilon = 0` forces the greedy branch and
/// `epsilon = 1` forces the random branch.
pub fn pi_q<R: Rng + ?Sized>(
    table: &QTable,
    s: DiscreteState,
    epsilon: f64,
    rng: &mut R,
) -> EpsilonChoice {
    epsilon_greedy(table.n_actions(), epsilon, rng, || argmax_q(table, s))
}
