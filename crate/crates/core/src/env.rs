//! Ground-truth herding dynamics.
//!
//! Targets move with the saturated sum of a repulsion from nearby herders and
//! a piecewise-constant random drift. Herders are velocity-controlled
//! integrators with a speed cap. Time is advanced with explicit Euler steps
//! of `sim_dt`.

use alloc::vec::Vec;
use core::f64::consts::TAU;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vec2::Vec2;

/// Physical parameters of the herding world.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvParams {
    /// Repulsion gain (m³/s).
    pub mu: f64,
    /// True influence radius of the targets (m).
    pub rho_t: f64,
    /// Target speed cap (m/s).
    pub v_t_max: f64,
    /// Herder speed cap (m/s).
    pub v_h_max: f64,
    /// Upper bound of the drift magnitude (m/s).
    pub beta_max: f64,
    /// Interval between drift resamples (s).
    pub drift_resample_dt: f64,
    /// Integration step (s).
    pub sim_dt: f64,
    pub x_g: Vec2,
    pub rho_g: f64,
    pub n_targets: usize,
    pub n_herders: usize,
    /// Half-width of the square around `x_g` in which agents are spawned (m).
    pub spawn_half_width: f64,
}

impl Default for EnvParams {
    fn default() -> Self {
        EnvParams {
            mu: 2.0,
            rho_t: 2.5,
            v_t_max: 1.0,
            v_h_max: 2.0,
            beta_max: 0.5,
            drift_resample_dt: 0.1,
            sim_dt: 0.01,
            x_g: Vec2::ZERO,
            rho_g: 1.0,
            n_targets: 1,
            n_herders: 1,
            spawn_half_width: 5.0,
        }
    }
}

impl EnvParams {
    pub fn validate(&self) -> Result<()> {
        positive("mu", self.mu)?;
        positive("rho_t", self.rho_t)?;
        positive("v_t_max", self.v_t_max)?;
        positive("v_h_max", self.v_h_max)?;
        if !(self.beta_max >= 0.0 && self.beta_max.is_finite()) {
            return Err(Error::invalid("beta_max", self.beta_max, "must be >= 0"));
        }
        positive("rho_g", self.rho_g)?;
        positive("sim_dt", self.sim_dt)?;
        positive("drift_resample_dt", self.drift_resample_dt)?;
        if self.sim_dt > self.drift_resample_dt {
            return Err(Error::invalid(
                "sim_dt",
                self.sim_dt,
                alloc::format!(
                    "must not exceed drift_resample_dt = {}",
                    self.drift_resample_dt
                ),
            ));
        }
        if !self.x_g.is_finite() {
            return Err(Error::invalid(
                "x_g",
                alloc::format!("({}, {})", self.x_g.x, self.x_g.y),
                "must be finite",
            ));
        }
        if self.n_targets == 0 {
            return Err(Error::invalid("n_targets", 0, "must be >= 1"));
        }
        if self.n_herders == 0 {
            return Err(Error::invalid("n_herders", 0, "must be >= 1"));
        }
        if !(self.spawn_half_width > self.rho_g && self.spawn_half_width.is_finite()) {
            return Err(Error::invalid(
                "spawn_half_width",
                self.spawn_half_width,
                alloc::format!("must exceed rho_g = {}", self.rho_g),
            ));
        }
        Ok(())
    }
}

pub(crate) fn positive(field: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(field, value, "must be finite and > 0"))
    }
}

/// Piecewise-constant random drift of one target.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DriftState {
    pub beta: f64,
    pub theta: f64,
    pub time_since_resample: f64,
}

impl DriftState {
    pub fn velocity(&self) -> Vec2 {
        Vec2::polar(self.beta, self.theta)
    }
}

/// Draws a fresh drift magnitude in `[0, beta_max]` and heading in `[0, 2π)`.
pub fn resample_drift<R: Rng + ?Sized>(rng: &mut R, params: &EnvParams) -> DriftState {
    let u_beta: f64 = rng.gen();
    let u_theta: f64 = rng.gen();
    DriftState {
        beta: u_beta * params.beta_max,
        theta: u_theta * TAU,
        time_since_resample: 0.0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub targets: Vec<Vec2>,
    pub herders: Vec<Vec2>,
    pub drifts: Vec<DriftState>,
    pub t: f64,
}

impl WorldState {
    /// Samples initial conditions: targets uniform in the spawn square outside
    /// the goal region, herders uniform in the spawn square. Drifts get their
    /// first draw from `drift_rng`.
    pub fn spawn<R: Rng + ?Sized, D: Rng + ?Sized>(
        params: &EnvParams,
        spawn_rng: &mut R,
        drift_rng: &mut D,
    ) -> WorldState {
        let h = params.spawn_half_width;
        let sample = |rng: &mut R| {
            let ux: f64 = rng.gen();
            let uy: f64 = rng.gen();
            params.x_g + Vec2::new((2.0 * ux - 1.0) * h, (2.0 * uy - 1.0) * h)
        };
        let mut targets = Vec::with_capacity(params.n_targets);
        while targets.len() < params.n_targets {
            let p = sample(spawn_rng);
            if !in_goal(p, params) {
                targets.push(p);
            }
        }
        let mut herders = Vec::with_capacity(params.n_herders);
        while herders.len() < params.n_herders {
            let p = sample(spawn_rng);
            if targets.iter().all(|&x| x.distance(p) > 1e-6) {
                herders.push(p);
            }
        }
        let drifts = (0..params.n_targets)
            .map(|_| resample_drift(drift_rng, params))
            .collect();
        WorldState {
            targets,
            herders,
            drifts,
            t: 0.0,
        }
    }
}

/// Interaction kernel: 1 when `x_t` lies strictly inside radius `rho` of `x_h`.
pub fn step_interaction(x_t: Vec2, x_h: Vec2, rho: f64) -> u8 {
    u8::from((x_t - x_h).norm() < rho)
}

/// Inverse-square repulsion exerted on a target by the herders within `rho_t`.
///
/// Herders are referenced by their index in `herders` in the error.
pub fn herder_repulsion(x_t: Vec2, herders: &[Vec2], mu: f64, rho_t: f64) -> Result<Vec2> {
    let mut acc = Vec2::ZERO;
    for (j, &x_h) in herders.iter().enumerate() {
        if step_interaction(x_t, x_h, rho_t) == 0 {
            continue;
        }
        let d = x_t - x_h;
        let r = d.norm();
        if r == 0.0 {
            return Err(Error::CoincidentPositions {
                target: usize::MAX,
                herder: j,
            });
        }
        acc += d * (1.0 / (r * r * r));
    }
    Ok(acc * mu)
}

/// Caps `f` at `cap` while preserving its direction.
pub fn saturate(f: Vec2, cap: f64) -> Vec2 {
    let n = f.norm();
    if n < cap {
        f
    } else {
        f * (cap / n)
    }
}

/// Velocity of target `i`: saturated repulsion plus drift.
pub fn target_velocity(i: usize, state: &WorldState, params: &EnvParams) -> Result<Vec2> {
    let x_t = state.targets[i];
    let f1 = herder_repulsion(x_t, &state.herders, params.mu, params.rho_t).map_err(|e| match e {
        Error::CoincidentPositions { herder, .. } => Error::CoincidentPositions { target: i, herder },
        other => other,
    })?;
    let f = f1 + state.drifts[i].velocity();
    Ok(saturate(f, params.v_t_max))
}

pub fn clamp_herder_input(u: Vec2, v_h_max: f64) -> Vec2 {
    u.clamp_norm(v_h_max)
}

/// Open goal disk membership.
pub fn in_goal(x: Vec2, params: &EnvParams) -> bool {
    (x - params.x_g).norm() < params.rho_g
}

/// Advances the world by one `sim_dt`.
///
/// All target velocities are evaluated on the pre-step state, so agent order
/// does not matter. Drifts whose age reaches `drift_resample_dt` are redrawn
/// after the position update.
pub fn env_step<R: Rng + ?Sized>(
    state: &WorldState,
    herder_inputs: &[Vec2],
    params: &EnvParams,
    rng: &mut R,
) -> Result<WorldState> {
    if herder_inputs.len() != state.herders.len() {
        return Err(Error::DimensionMismatch {
            what: "herder input count",
            expected: state.herders.len(),
            found: herder_inputs.len(),
        });
    }
    let dt = params.sim_dt;
    let mut next = state.clone();
    for i in 0..state.targets.len() {
        next.targets[i] += target_velocity(i, state, params)? * dt;
    }
    for (x_h, &u) in next.herders.iter_mut().zip(herder_inputs) {
        *x_h += clamp_herder_input(u, params.v_h_max) * dt;
    }
    // Relative slack so that ten steps of 0.01 count as 0.1.
    let due = params.drift_resample_dt * (1.0 - 1e-9);
    for drift in next.drifts.iter_mut() {
        drift.time_since_resample += dt;
        if drift.time_since_resample >= due {
            *drift = resample_drift(rng, params);
        }
    }
    next.t = state.t + dt;
    Ok(next)
}
