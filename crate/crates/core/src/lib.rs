//! Control-tutored Q-learning for the multi-agent herding problem.
//!
//! Herders learn a tabular Q-policy over a goal-anchored state encoding. In
//! states where the table holds no positive value yet, a feedback-control
//! tutor picks the action instead. The crate is `no_std` (with `alloc`) and
//! holds the dynamics, learner, tutor, policies and episode harness; file
//! formats and the command line live in the `ctql` crate.

#![no_std]

extern crate alloc;

pub mod discretizer;
pub mod env;
pub mod error;
pub mod harness;
pub mod learner;
pub mod policy;
pub mod tutor;
pub mod vec2;

pub use discretizer::{ActionIndex, ActionSet, ActionSpec, DiscreteState, StateGrid};
pub use env::{EnvParams, WorldState};
pub use error::{Error, Result};
pub use harness::{
    AgentKind, EpisodeOptions, EpisodeResult, EvalSummary, RowSource, RunConfig, TrainOutput, TrajectoryRow, TrialMetrics,
};
pub use learner::{LearnParams, QTable};
pub use policy::{ActionSource, PolicyMode, RewardParams};
pub use tutor::TutorParams;
pub use vec2::Vec2;
