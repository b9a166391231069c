//! State encoding and the discrete action set.
//!
//! States are expressed in a goal-anchored frame whose first axis points from
//! the goal centre through the chased target. The herder bearing is measured
//! in that frame, and actions are herder velocities in that same frame, so a
//! learned (state, action) pair means the same manoeuvre wherever the target
//! sits around the goal.
//!
//! A fourth, optional coordinate bins the chased target's distance to the goal
//! centre. With the default single edge at the goal radius it tells apart a
//! target that is already contained from one that still has to be driven in.

use alloc::vec::Vec;
use core::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vec2::{normalize_angle, Vec2};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StateGrid {
    pub dist_edges: Vec<f64>,
    pub angle_bins: usize,
    pub speed_edges: Vec<f64>,
    /// Edges on the target's distance to the goal centre; empty disables the
    /// coordinate (a single bin).
    pub goal_edges: Vec<f64>,
}

impl Default for StateGrid {
    fn default() -> Self {
        StateGrid {
            dist_edges: alloc::vec![0.5, 1.0, 1.5, 2.0],
            angle_bins: 8,
            speed_edges: alloc::vec![0.2, 0.6],
            goal_edges: alloc::vec![1.0],
        }
    }
}

fn check_edges(field: &'static str, edges: &[f64]) -> Result<()> {
    if edges.is_empty() {
        return Err(Error::invalid(field, "[]", "needs at least one edge (two bins)"));
    }
    if edges.iter().any(|e| !e.is_finite()) {
        return Err(Error::invalid(field, alloc::format!("{edges:?}"), "edges must be finite"));
    }
    if edges.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid(
            field,
            alloc::format!("{edges:?}"),
            "edges must be strictly increasing",
        ));
    }
    Ok(())
}

/// Index of the half-open bin `[e_i, e_{i+1})` holding `value`; values below
/// the first edge land in bin 0 and values at or above the last edge in the
/// overflow bin `edges.len()`.
pub fn bin_index(value: f64, edges: &[f64]) -> usize {
    edges.partition_point(|&e| e <= value)
}

impl StateGrid {
    pub fn validate(&self) -> Result<()> {
        check_edges("dist_edges", &self.dist_edges)?;
        check_edges("speed_edges", &self.speed_edges)?;
        if !self.goal_edges.is_empty() {
            check_edges("goal_edges", &self.goal_edges)?;
        }
        if self.angle_bins < 4 {
            return Err(Error::invalid("angle_bins", self.angle_bins, "must be >= 4"));
        }
        Ok(())
    }

    pub fn dist_bins(&self) -> usize {
        self.dist_edges.len() + 1
    }

    pub fn speed_bins(&self) -> usize {
        self.speed_edges.len() + 1
    }

    pub fn goal_bins(&self) -> usize {
        self.goal_edges.len() + 1
    }

    pub fn n_states(&self) -> usize {
        self.dist_bins() * self.angle_bins * self.speed_bins() * self.goal_bins()
    }

    /// Row-major flattening: distance, angle, speed, goal distance.
    pub fn flatten(&self, s: DiscreteState) -> usize {
        ((s.dist_bin * self.angle_bins + s.angle_bin) * self.speed_bins() + s.speed_bin) * self.goal_bins()
            + s.goal_bin
    }

    pub fn unflatten(&self, index: usize) -> DiscreteState {
        let goal_bin = index % self.goal_bins();
        let rest = index / self.goal_bins();
        let speed_bin = rest % self.speed_bins();
        let rest = rest / self.speed_bins();
        DiscreteState {
            dist_bin: rest / self.angle_bins,
            angle_bin: rest % self.angle_bins,
            speed_bin,
            goal_bin,
        }
    }

    pub fn contains(&self, s: DiscreteState) -> bool {
        s.dist_bin < self.dist_bins()
            && s.angle_bin < self.angle_bins
            && s.speed_bin < self.speed_bins()
            && s.goal_bin < self.goal_bins()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DiscreteState {
    pub dist_bin: usize,
    pub angle_bin: usize,
    pub speed_bin: usize,
    pub goal_bin: usize,
}

/// Goal-anchored frame of a chased target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GoalFrame {
    /// World angle of the frame's first axis.
    pub heading: f64,
}

impl GoalFrame {
    /// Frame whose first axis points from `x_g` through `x_t`; the world frame
    /// when the target sits exactly on the goal centre.
    pub fn new(x_t: Vec2, x_g: Vec2) -> Self {
        GoalFrame {
            heading: (x_t - x_g).angle().unwrap_or(0.0),
        }
    }

    pub fn to_world(&self, v: Vec2) -> Vec2 {
        v.rotate(self.heading)
    }

    pub fn to_local(&self, v: Vec2) -> Vec2 {
        v.rotate(-self.heading)
    }
}

/// Bearing of the herder around the target, measured counter-clockwise from
/// the goal→target ray, in `[0, 2π)`. Zero when the herder sits on the target.
pub fn herder_bearing(x_t: Vec2, x_h: Vec2, x_g: Vec2) -> f64 {
    match (x_h - x_t).angle() {
        Some(a) => normalize_angle(a - GoalFrame::new(x_t, x_g).heading),
        None => 0.0,
    }
}

pub fn encode_state(
    x_t: Vec2,
    x_h: Vec2,
    x_g: Vec2,
    target_speed: f64,
    grid: &StateGrid,
) -> DiscreteState {
    let sector = TAU / grid.angle_bins as f64;
    let bearing = herder_bearing(x_t, x_h, x_g);
    let angle_bin = ((bearing / sector) as usize).min(grid.angle_bins - 1);
    DiscreteState {
        dist_bin: bin_index((x_t - x_h).norm(), &grid.dist_edges),
        angle_bin,
        speed_bin: bin_index(target_speed.max(0.0), &grid.speed_edges),
        goal_bin: bin_index((x_t - x_g).norm(), &grid.goal_edges),
    }
}

/// Parameters of the polar action grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ActionSpec {
    pub n_dirs: usize,
    pub speeds: Vec<f64>,
}

impl Default for ActionSpec {
    fn default() -> Self {
        ActionSpec {
            n_dirs: 8,
            speeds: alloc::vec![1.0, 2.0],
        }
    }
}

/// Index into an [`ActionSet`].
pub type ActionIndex = usize;

/// Finite set of herder velocities, expressed in the goal frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionSet {
    actions: Vec<Vec2>,
}

impl ActionSet {
    /// Wraps an explicit list; it must be non-empty, duplicate-free, contain
    /// the zero action and respect the speed cap.
    pub fn new(actions: Vec<Vec2>, v_h_max: f64) -> Result<Self> {
        if actions.is_empty() {
            return Err(Error::invalid("actions", "[]", "must be non-empty"));
        }
        if !actions.contains(&Vec2::ZERO) {
            return Err(Error::invalid("actions", "set", "must contain the zero action"));
        }
        for (i, a) in actions.iter().enumerate() {
            if a.norm().partial_cmp(&v_h_max).is_none_or(|o| o.is_gt()) {
                return Err(Error::invalid(
                    "actions",
                    a.norm(),
                    alloc::format!("speed must be <= v_h_max = {v_h_max}"),
                ));
            }
            if actions[..i].contains(a) {
                return Err(Error::invalid(
                    "actions",
                    alloc::format!("({}, {})", a.x, a.y),
                    "duplicate action",
                ));
            }
        }
        Ok(ActionSet { actions })
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn get(&self, index: ActionIndex) -> Vec2 {
        self.actions[index]
    }

    pub fn as_slice(&self) -> &[Vec2] {
        &self.actions
    }
}

/// Zero action followed by every speed along `n_dirs` evenly spaced headings
/// (speed-major order).
pub fn build_action_set(n_dirs: usize, speeds: &[f64], v_h_max: f64) -> Result<ActionSet> {
    if n_dirs < 4 {
        return Err(Error::invalid("n_dirs", n_dirs, "must be >= 4"));
    }
    if speeds.is_empty() {
        return Err(Error::invalid("speeds", "[]", "must list at least one speed"));
    }
    for &s in speeds {
        if !(s > 0.0 && s <= v_h_max) {
            return Err(Error::invalid(
                "speeds",
                s,
                alloc::format!("each speed must lie in (0, v_h_max = {v_h_max}]"),
            ));
        }
    }
    let mut actions = Vec::with_capacity(1 + n_dirs * speeds.len());
    actions.push(Vec2::ZERO);
    for &s in speeds {
        for m in 0..n_dirs {
            actions.push(Vec2::polar(s, TAU * m as f64 / n_dirs as f64));
        }
    }
    ActionSet::new(actions, v_h_max)
}

/// Index of the action closest to `v`; ties go to the lowest index.
pub fn nearest_action(v: Vec2, actions: &ActionSet) -> ActionIndex {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, &a) in actions.as_slice().iter().enumerate() {
        let d = (v - a).norm_squared();
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    best
}
