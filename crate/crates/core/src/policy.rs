//! Action selection for herders: the control-tutored switch between the
//! Q-policy and the tutor, the chase/engage controller, the shaped reward,
//! target assignment and the two baselines.

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::discretizer::{encode_state, ActionIndex, ActionSet, DiscreteState, GoalFrame, StateGrid};
use crate::env::{clamp_herder_input, in_goal, EnvParams, WorldState};
use crate::error::{Error, Result};
use crate::learner::{max_q, pi_q, QTable};
use crate::tutor::{pi_t, surrogate_velocity, tutor_control, TutorParams, VelocityEstimator};
use crate::vec2::Vec2;

/// Which rule produced a discrete action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ActionSource {
    Tutor,
    QGreedy,
    Random,
}

impl ActionSource {
    pub fn as_str(self) -> &'static str {
        match self {
            ActionSource::Tutor => "Tutor",
            ActionSource::QGreedy => "QGreedy",
            ActionSource::Random => "Random",
        }
    }
}

/// Branch of the switching policy that was taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Branch {
    Tutor,
    Q,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyMode {
    Ctql,
    PureQ,
    PureTutor,
}

impl PolicyMode {
    pub const ALL: [PolicyMode; 3] = [PolicyMode::Ctql, PolicyMode::PureQ, PolicyMode::PureTutor];

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyMode::Ctql => "ctql",
            PolicyMode::PureQ => "pureq",
            PolicyMode::PureTutor => "puretutor",
        }
    }

    pub fn learns(self) -> bool {
        !matches!(self, PolicyMode::PureTutor)
    }
}

impl fmt::Display for PolicyMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ctql" => Ok(PolicyMode::Ctql),
            "pureq" => Ok(PolicyMode::PureQ),
            "puretutor" => Ok(PolicyMode::PureTutor),
            _ => Err(Error::invalid("mode", s, "one of ctql, pureq, puretutor")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardParams {
    pub w_goal: f64,
    pub w_chase: f64,
    pub w_trespass: f64,
}

impl Default for RewardParams {
    fn default() -> Self {
        RewardParams {
            w_goal: 10.0,
            w_chase: 1.0,
            w_trespass: 5.0,
        }
    }
}

impl RewardParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.w_goal > 0.0 && self.w_goal.is_finite()) {
            return Err(Error::invalid("w_goal", self.w_goal, "must be > 0"));
        }
        if !(self.w_chase >= 0.0 && self.w_chase.is_finite()) {
            return Err(Error::invalid("w_chase", self.w_chase, "must be >= 0"));
        }
        if !(self.w_trespass >= 0.0 && self.w_trespass.is_finite()) {
            return Err(Error::invalid("w_trespass", self.w_trespass, "must be >= 0"));
        }
        Ok(())
    }
}

/// A discrete action together with how it was chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Selection {
    pub action: ActionIndex,
    pub source: ActionSource,
    pub branch: Branch,
}

fn from_q(choice: crate::learner::EpsilonChoice) -> Selection {
    Selection {
        action: choice.action,
        source: if choice.explored {
            ActionSource::Random
        } else {
            ActionSource::QGreedy
        },
        branch: Branch::Q,
    }
}

fn from_tutor(choice: crate::learner::EpsilonChoice) -> Selection {
    Selection {
        action: choice.action,
        source: if choice.explored {
            ActionSource::Random
        } else {
            ActionSource::Tutor
        },
        branch: Branch::Tutor,
    }
}

/// Switching policy: follow the Q-table where its best entry is strictly
/// positive, the tutor otherwise. `v` is the tutor command in the action
/// frame.
pub fn ctql_select<R: Rng + ?Sized>(
    s: DiscreteState,
    table: &QTable,
    v: Vec2,
    actions: &ActionSet,
    epsilon: f64,
    rng: &mut R,
) -> Selection {
    if max_q(table, s) > 0.0 {
        from_q(pi_q(table, s, epsilon, rng))
    } else {
        from_tutor(pi_t(v, actions, epsilon, rng))
    }
}

/// Shaped reward for one control interval: progress of the chased target
/// towards the goal region (the shrinking gap to its boundary, zero once
/// inside), minus the herder's excess distance beyond `rho_t_hat`, minus a
/// penalty when the herder ends inside the goal region.
pub fn reward(
    x_t_before: Vec2,
    x_t_after: Vec2,
    x_h_after: Vec2,
    params: &RewardParams,
    rho_t_hat: f64,
    env: &EnvParams,
) -> f64 {
    let gap = |x: Vec2| ((x - env.x_g).norm() - env.rho_g).max(0.0);
    let progress = gap(x_t_before) - gap(x_t_after);
    let slack = ((x_t_after - x_h_after).norm() - rho_t_hat).max(0.0);
    let trespass = if in_goal(x_h_after, env) { 1.0 } else { 0.0 };
    params.w_goal * progress - params.w_chase * slack - params.w_trespass * trespass
}

fn nearest(from: Vec2, targets: &[Vec2], candidates: impl Iterator<Item = usize>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for i in candidates {
        let d = (targets[i] - from).norm_squared();
        if best.is_none_or(|(_, bd)| d < bd) {
            best = Some((i, d));
        }
    }
    best.map(|(i, _)| i)
}

/// Greedy herder→target assignment, herders served in index order.
///
/// Each herder takes the nearest target outside the goal region that no
/// earlier herder claimed; when every uncontained target is claimed it takes
/// the nearest uncontained one; when all targets are contained it patrols its
/// nearest target.
pub fn assign_targets(herders: &[Vec2], targets: &[Vec2], env: &EnvParams) -> Vec<usize> {
    let outside: Vec<usize> = (0..targets.len()).filter(|&i| !in_goal(targets[i], env)).collect();
    let mut claimed = alloc::vec![false; targets.len()];
    herders
        .iter()
        .map(|&x_h| {
            let pick = nearest(x_h, targets, outside.iter().copied().filter(|&i| !claimed[i]))
                .or_else(|| nearest(x_h, targets, outside.iter().copied()))
                .or_else(|| nearest(x_h, targets, 0..targets.len()))
                .expect("at least one target");
            claimed[pick] = true;
            pick
        })
        .collect()
}

/// Everything a herder needs to pick an action, borrowed from the run.
pub struct PolicyContext<'a> {
    pub mode: PolicyMode,
    pub env: &'a EnvParams,
    pub grid: &'a StateGrid,
    pub actions: &'a ActionSet,
    pub tutor: &'a TutorParams,
    pub epsilon: f64,
}

/// Engage-phase decision of one herder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EngageDecision {
    pub state: DiscreteState,
    /// `None` for the continuous pure-tutor baseline.
    pub selection: Option<Selection>,
    pub max_q: f64,
}

/// Command issued to one herder for the next control interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HerderCommand {
    /// World-frame velocity input.
    pub input: Vec2,
    /// `None` during the chase phase.
    pub engage: Option<EngageDecision>,
    /// Estimated velocity of the chased target.
    pub target_velocity: Vec2,
}

impl HerderCommand {
    /// Learning tuple `(s, a)` for the subsequent Q-update, if any.
    pub fn learning_tuple(&self) -> Option<(DiscreteState, ActionIndex)> {
        self.engage
            .and_then(|e| e.selection.map(|sel| (e.state, sel.action)))
    }
}

/// Chase-then-engage controller for herder `j` chasing target `i`.
///
/// Beyond `rho_t_hat` the herder runs at full speed toward the target. At or
/// inside it, the mode's policy picks the input. `estimator` tracks target
/// `i` and is fed on every call.
#[allow(clippy::too_many_arguments)]
pub fn herder_command<R: Rng + ?Sized>(
    j: usize,
    i: usize,
    state: &WorldState,
    table: &QTable,
    estimator: &mut VelocityEstimator,
    ctx: &PolicyContext<'_>,
    rng: &mut R,
) -> Result<HerderCommand> {
    let x_t = state.targets[i];
    let x_h = state.herders[j];
    let offset = x_t - x_h;
    let dist = offset.norm();
    if dist == 0.0 {
        return Err(Error::CoincidentPositions { target: i, herder: j });
    }
    let fallback = surrogate_velocity(x_t, x_h, ctx.tutor);
    let xdot = estimator.observe(x_t, state.t, fallback)?;

    if dist > ctx.tutor.rho_t_hat {
        return Ok(HerderCommand {
            input: offset * (ctx.env.v_h_max / dist),
            engage: None,
            target_velocity: xdot,
        });
    }

    let s = encode_state(x_t, x_h, ctx.env.x_g, xdot.norm(), ctx.grid);
    let best = max_q(table, s);
    let v = tutor_control(xdot, ctx.tutor);
    let frame = GoalFrame::new(x_t, ctx.env.x_g);
    let selection = match ctx.mode {
        PolicyMode::PureTutor => None,
        PolicyMode::PureQ => Some(from_q(pi_q(table, s, ctx.epsilon, rng))),
        PolicyMode::Ctql => Some(ctql_select(
            s,
            table,
            frame.to_local(v),
            ctx.actions,
            ctx.epsilon,
            rng,
        )),
    };
    let input = match selection {
        Some(sel) => frame.to_world(ctx.actions.get(sel.action)),
        None => clamp_herder_input(v, ctx.env.v_h_max),
    };
    Ok(HerderCommand {
        input,
        engage: Some(EngageDecision {
            state: s,
            selection,
            max_q: best,
        }),
        target_velocity: xdot,
    })
}
