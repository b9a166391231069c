//! Control tutor: surrogate target model, quadratic Lyapunov function,
//! proportional velocity feedback and the ε-greedy projection onto the action
//! set.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::discretizer::{nearest_action, ActionSet};
use crate::error::{Error, Result};
use crate::learner::{epsilon_greedy, EpsilonChoice};
use crate::vec2::Vec2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TutorParams {
    /// Surrogate coupling intensity (1/s).
    pub delta: f64,
    /// Conservative estimate of the target influence radius (m).
    pub rho_t_hat: f64,
    /// Feedback gain, strictly greater than one.
    pub k: f64,
}

impl Default for TutorParams {
    fn default() -> Self {
        TutorParams {
            delta: 0.5,
            rho_t_hat: 2.0,
            k: 2.0,
        }
    }
}

impl TutorParams {
    /// `rho_t` is the true influence radius the estimate must stay below.
    pub fn validate(&self, rho_t: f64) -> Result<()> {
        if !(self.k > 1.0 && self.k.is_finite()) {
            return Err(Error::invalid(
                "k",
                self.k,
                "the feedback gain of v = k * xdot_t must satisfy k > 1",
            ));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::invalid("delta", self.delta, "must be > 0"));
        }
        if !(self.rho_t_hat > 0.0 && self.rho_t_hat < rho_t) {
            return Err(Error::invalid(
                "rho_t_hat",
                self.rho_t_hat,
                alloc::format!(
                    "must be a conservative estimate of the influence radius: 0 < rho_t_hat < rho_t = {rho_t}"
                ),
            ));
        }
        Ok(())
    }
}

/// Rough target model: linear repulsion inside the estimated radius.
pub fn surrogate_velocity(x_t: Vec2, x_h: Vec2, params: &TutorParams) -> Vec2 {
    let d = x_t - x_h;
    if d.norm() < params.rho_t_hat {
        d * params.delta
    } else {
        Vec2::ZERO
    }
}

/// `½‖x_t − x_g‖²`.
pub fn lyapunov_value(x_t: Vec2, x_g: Vec2) -> f64 {
    0.5 * (x_t - x_g).norm_squared()
}

/// Time derivative of [`lyapunov_value`] along `xdot_t`.
pub fn lyapunov_derivative(x_t: Vec2, x_g: Vec2, xdot_t: Vec2) -> f64 {
    (x_t - x_g).dot(xdot_t)
}

/// Finite-difference estimate of a target's velocity from successive
/// observations.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct VelocityEstimator {
    last: Option<(Vec2, f64)>,
}

impl VelocityEstimator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn reset(&mut self) {
        self.last = None;
    }

    pub fn has_history(&self) -> bool {
        self.last.is_some()
    }

    /// Records `x_t` at time `t` and returns the velocity since the previous
    /// observation, or `fallback` on the first call.
    pub fn observe(&mut self, x_t: Vec2, t: f64, fallback: Vec2) -> Result<Vec2> {
        let estimate = match self.last {
            Some((prev, prev_t)) => {
                if t.partial_cmp(&prev_t) != Some(core::cmp::Ordering::Greater) {
                    return Err(Error::NonAdvancingTime {
                        previous: prev_t,
                        current: t,
                    });
                }
                (x_t - prev) * (1.0 / (t - prev_t))
            }
            None => fallback,
        };
        self.last = Some((x_t, t));
        Ok(estimate)
    }
}

/// Functional form of [`VelocityEstimator::observe`].
pub fn estimate_target_velocity(
    est: VelocityEstimator,
    x_t: Vec2,
    t: f64,
    fallback: Vec2,
) -> Result<(Vec2, VelocityEstimator)> {
    let mut next = est;
    let v = next.observe(x_t, t, fallback)?;
    Ok((v, next))
}

/// Proportional feedback `v = k · xdot_t`.
pub fn tutor_control(xdot_t: Vec2, params: &TutorParams) -> Vec2 {
    xdot_t * params.k
}

/// ε-greedy tutor policy: the action nearest to `v`, or a uniform action with
/// probability `epsilon`. `v` must be expressed in the action set's frame.
pub fn pi_t<R: Rng + ?Sized>(
    v: Vec2,
    actions: &ActionSet,
    epsilon: f64,
    rng: &mut R,
) -> EpsilonChoice {
    epsilon_greedy(actions.len(), epsilon, rng, || nearest_action(v, actions))
}
