//! Episode orchestration, training over repeated trials, evaluation and mode
//! comparison.
//!
//! Every episode derives three independent ChaCha8 streams from its seed:
//! spawn positions, target drift and policy exploration. Spawns therefore
//! depend on the seed alone and are identical across policy modes.

use alloc::string::String;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::discretizer::{build_action_set, encode_state, ActionSet, ActionSpec, DiscreteState, StateGrid};
use crate::env::{env_step, in_goal, EnvParams, WorldState};
use crate::error::{Error, Result};
use crate::learner::{q_update, LearnParams, QTable};
use crate::policy::{
    assign_targets, herder_command, reward, ActionSource, Branch, PolicyContext, PolicyMode, RewardParams,
};
use crate::tutor::{TutorParams, VelocityEstimator};
use crate::vec2::Vec2;

const SPAWN_STREAM: u64 = 0;
const DRIFT_STREAM: u64 = 1;
const POLICY_STREAM: u64 = 2;

/// Offset separating evaluation seeds from training seeds.
pub const EVAL_SEED_OFFSET: u64 = 1 << 32;

/// Fraction of final-half steps with every target contained that counts as
/// remaining in the goal.
pub const CONTAINMENT_THRESHOLD: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub env: EnvParams,
    pub grid: StateGrid,
    pub actions: ActionSpec,
    pub learn: LearnParams,
    pub tutor: TutorParams,
    pub reward: RewardParams,
    pub mode: PolicyMode,
    pub n_trials: usize,
    /// Control steps per episode.
    pub steps_per_trial: usize,
    /// Integration steps per control step; actions are held in between.
    pub substeps: usize,
    pub seed: u64,
    pub eval_trials: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            env: EnvParams::default(),
            grid: StateGrid::default(),
            actions: ActionSpec::default(),
            learn: LearnParams::default(),
            tutor: TutorParams::default(),
            reward: RewardParams::default(),
            mode: PolicyMode::Ctql,
            n_trials: 50,
            steps_per_trial: 2000,
            substeps: 10,
            seed: 0,
            eval_trials: 20,
        }
    }
}

impl RunConfig {
    /// Checks every nested invariant, reporting the dotted field path.
    pub fn validate(&self) -> Result<()> {
        self.env.validate().map_err(|e| e.in_section("env"))?;
        self.grid.validate().map_err(|e| e.in_section("grid"))?;
        self.learn.validate().map_err(|e| e.in_section("learn"))?;
        self.tutor
            .validate(self.env.rho_t)
            .map_err(|e| e.in_section("tutor"))?;
        self.reward.validate().map_err(|e| e.in_section("reward"))?;
        self.action_set()?;
        if self.n_trials == 0 {
            return Err(Error::invalid("n_trials", 0, "must be >= 1"));
        }
        if self.steps_per_trial == 0 {
            return Err(Error::invalid("steps_per_trial", 0, "must be >= 1"));
        }
        if self.substeps == 0 {
            return Err(Error::invalid("substeps", 0, "must be >= 1"));
        }
        if self.eval_trials == 0 {
            return Err(Error::invalid("eval_trials", 0, "must be >= 1"));
        }
        Ok(())
    }

    pub fn action_set(&self) -> Result<ActionSet> {
        build_action_set(self.actions.n_dirs, &self.actions.speeds, self.env.v_h_max)
            .map_err(|e| e.in_section("actions"))
    }

    /// Duration of one control step (s).
    pub fn control_dt(&self) -> f64 {
        self.env.sim_dt * self.substeps as f64
    }

    /// Fresh zero tables, one per herder.
    pub fn empty_tables(&self) -> Result<Vec<QTable>> {
        let n_actions = self.action_set()?.len();
        Ok((0..self.env.n_herders)
            .map(|_| QTable::for_grid(&self.grid, n_actions))
            .collect())
    }

    pub fn training_seed(&self, trial: usize) -> u64 {
        self.seed.wrapping_add(trial as u64)
    }

    pub fn eval_seed(&self, index: usize) -> u64 {
        self.seed
            .wrapping_add(EVAL_SEED_OFFSET)
            .wrapping_add(index as u64)
    }
}

/// Per-episode switches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EpisodeOptions {
    /// Apply Q-updates after every engage step.
    pub learn: bool,
    /// Use the configured ε; otherwise ε = 0 on both policy branches.
    pub explore: bool,
    /// Keep every k-th control step in the trajectory; `None` records nothing.
    pub record_every: Option<usize>,
    /// Keep one audit record per engage decision.
    pub audit: bool,
    /// Trial number written into trajectory rows.
    pub trial: usize,
}

impl EpisodeOptions {
    pub fn training(trial: usize) -> Self {
        EpisodeOptions {
            learn: true,
            explore: true,
            record_every: None,
            audit: false,
            trial,
        }
    }

    pub fn evaluation(trial: usize) -> Self {
        EpisodeOptions {
            learn: false,
            explore: false,
            record_every: None,
            audit: false,
            trial,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentKind {
    Target,
    Herder,
}

impl AgentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AgentKind::Target => "target",
            AgentKind::Herder => "herder",
        }
    }
}

/// Source tag of a trajectory row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RowSource {
    Tutor,
    QGreedy,
    Random,
    Chase,
    None,
}

impl RowSource {
    pub fn as_str(self) -> &'static str {
        match self {
            RowSource::Tutor => "Tutor",
            RowSource::QGreedy => "QGreedy",
            RowSource::Random => "Random",
            RowSource::Chase => "Chase",
            RowSource::None => "None",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "Tutor" => RowSource::Tutor,
            "QGreedy" => RowSource::QGreedy,
            "Random" => RowSource::Random,
            "Chase" => RowSource::Chase,
            "None" => RowSource::None,
            _ => return None,
        })
    }
}

impl From<ActionSource> for RowSource {
    fn from(s: ActionSource) -> Self {
        match s {
            ActionSource::Tutor => RowSource::Tutor,
            ActionSource::QGreedy => RowSource::QGreedy,
            ActionSource::Random => RowSource::Random,
        }
    }
}

/// One agent at the end of one control step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub t: f64,
    pub trial: usize,
    pub agent_kind: AgentKind,
    pub agent_id: usize,
    pub x: f64,
    pub y: f64,
    pub radial: f64,
    pub in_goal: bool,
    pub action_source: RowSource,
    pub reward: Option<f64>,
}

/// One engage-phase decision, kept for switching audits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecisionRecord {
    pub step: usize,
    pub herder: usize,
    pub state: DiscreteState,
    pub max_q: f64,
    pub source: Option<ActionSource>,
    pub branch: Option<Branch>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SourceCounts {
    pub tutor: usize,
    pub q_greedy: usize,
    pub random: usize,
}

impl SourceCounts {
    pub fn total(&self) -> usize {
        self.tutor + self.q_greedy + self.random
    }

    fn bump(&mut self, s: ActionSource) {
        match s {
            ActionSource::Tutor => self.tutor += 1,
            ActionSource::QGreedy => self.q_greedy += 1,
            ActionSource::Random => self.random += 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeResult {
    pub seed: u64,
    pub initial: WorldState,
    /// Fraction of final-half control steps with every target in the goal.
    pub containment_fraction: f64,
    pub final_all_in_goal: bool,
    pub cumulative_reward: f64,
    pub sources: SourceCounts,
    pub engage_steps: usize,
    /// Exits from the goal region that were later followed by re-entry.
    pub recollections: usize,
    pub steps_completed: usize,
    /// Diagnostic of an aborted episode.
    pub failure: Option<Error>,
    pub rows: Vec<TrajectoryRow>,
    pub decisions: Vec<DecisionRecord>,
}

impl EpisodeResult {
    pub fn succeeded(&self) -> bool {
        self.failure.is_none() && self.final_all_in_goal
    }
}

/// First index of the "final half" over which containment is measured.
pub fn final_half_start(steps: usize) -> usize {
    steps / 2
}

struct EpisodeRngs {
    spawn: ChaCha8Rng,
    drift: ChaCha8Rng,
    policy: ChaCha8Rng,
}

impl EpisodeRngs {
    fn new(seed: u64) -> Self {
        let stream = |id| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(id);
            rng
        };
        EpisodeRngs {
            spawn: stream(SPAWN_STREAM),
            drift: stream(DRIFT_STREAM),
            policy: stream(POLICY_STREAM),
        }
    }
}

/// Initial world for `seed`, independent of the policy mode.
pub fn spawn_world(env: &EnvParams, seed: u64) -> WorldState {
    let mut rngs = EpisodeRngs::new(seed);
    WorldState::spawn(env, &mut rngs.spawn, &mut rngs.drift)
}

struct Pending {
    herder: usize,
    target: usize,
    state: DiscreteState,
    action: Option<usize>,
    target_before: Vec2,
}

/// Runs one episode of `config.steps_per_trial` control steps from the
/// initial conditions of `seed`. With `options.learn`, `tables` (one per
/// herder) are updated in place after every engage step.
pub fn run_episode(
    config: &RunConfig,
    tables: &mut [QTable],
    seed: u64,
    options: &EpisodeOptions,
) -> Result<EpisodeResult> {
    let actions = config.action_set()?;
    if tables.len() != config.env.n_herders {
        return Err(Error::DimensionMismatch {
            what: "table count",
            expected: config.env.n_herders,
            found: tables.len(),
        });
    }
    for t in tables.iter() {
        t.check_dims(&config.grid, actions.len())?;
    }
    let env = &config.env;
    let ctx = PolicyContext {
        mode: config.mode,
        env,
        grid: &config.grid,
        actions: &actions,
        tutor: &config.tutor,
        epsilon: if options.explore { config.learn.epsilon } else { 0.0 },
    };
    let learn = options.learn && config.mode.learns();
    let mut rngs = EpisodeRngs::new(seed);
    let mut world = WorldState::spawn(env, &mut rngs.spawn, &mut rngs.drift);
    let n_t = env.n_targets;
    let n_h = env.n_herders;
    let steps = config.steps_per_trial;
    let half = final_half_start(steps);
    let control_dt = config.control_dt();

    let mut result = EpisodeResult {
        seed,
        initial: world.clone(),
        containment_fraction: 0.0,
        final_all_in_goal: false,
        cumulative_reward: 0.0,
        sources: SourceCounts::default(),
        engage_steps: 0,
        recollections: 0,
        steps_completed: 0,
        failure: None,
        rows: Vec::new(),
        decisions: Vec::new(),
    };

    let mut estimators = alloc::vec![VelocityEstimator::new(); n_h];
    let mut assigned: Vec<Option<usize>> = alloc::vec![None; n_h];
    let mut was_inside: Vec<bool> = world.targets.iter().map(|&x| in_goal(x, env)).collect();
    let mut exited = alloc::vec![false; n_t];
    let mut contained_steps = 0usize;
    let mut inputs = alloc::vec![Vec2::ZERO; n_h];
    let mut row_sources = alloc::vec![RowSource::None; n_h];
    let mut row_rewards: Vec<Option<f64>> = alloc::vec![None; n_h];
    let mut pending: Vec<Pending> = Vec::with_capacity(n_h);

    for step in 0..steps {
        let assignment = assign_targets(&world.herders, &world.targets, env);
        pending.clear();
        for j in 0..n_h {
            let i = assignment[j];
            if assigned[j] != Some(i) {
                estimators[j].reset();
                assigned[j] = Some(i);
            }
            let cmd = match herder_command(j, i, &world, &tables[j], &mut estimators[j], &ctx, &mut rngs.policy) {
                Ok(c) => c,
                Err(e) => {
                    result.failure = Some(e);
                    break;
                }
            };
            inputs[j] = cmd.input;
            row_rewards[j] = None;
            match cmd.engage {
                None => row_sources[j] = RowSource::Chase,
                Some(e) => {
                    result.engage_steps += 1;
                    let source = e.selection.map_or(ActionSource::Tutor, |s| s.source);
                    result.sources.bump(source);
                    row_sources[j] = source.into();
                    if options.audit {
                        result.decisions.push(DecisionRecord {
                            step,
                            herder: j,
                            state: e.state,
                            max_q: e.max_q,
                            source: e.selection.map(|s| s.source),
                            branch: e.selection.map(|s| s.branch),
                        });
                    }
                    pending.push(Pending {
                        herder: j,
                        target: i,
                        state: e.state,
                        action: e.selection.map(|s| s.action),
                        target_before: world.targets[i],
                    });
                }
            }
        }
        if result.failure.is_some() {
            break;
        }

        for _ in 0..config.substeps {
            match env_step(&world, &inputs, env, &mut rngs.drift) {
                Ok(next) => world = next,
                Err(e) => {
                    result.failure = Some(e);
                    break;
                }
            }
        }
        if result.failure.is_some() {
            break;
        }

        for p in &pending {
            let x_t = world.targets[p.target];
            let x_h = world.herders[p.herder];
            let r = reward(p.target_before, x_t, x_h, &config.reward, config.tutor.rho_t_hat, env);
            result.cumulative_reward += r;
            row_rewards[p.herder] = Some(r);
            if let (true, Some(a)) = (learn, p.action) {
                let speed = (x_t - p.target_before).norm() / control_dt;
                let s_next = encode_state(x_t, x_h, env.x_g, speed, &config.grid);
                q_update(&mut tables[p.herder], p.state, a, r, s_next, &config.learn);
            }
        }

        let mut all_in = true;
        for (i, &x) in world.targets.iter().enumerate() {
            let inside = in_goal(x, env);
            all_in &= inside;
            if was_inside[i] && !inside {
                exited[i] = true;
            } else if !was_inside[i] && inside && exited[i] {
                result.recollections += 1;
                exited[i] = false;
            }
            was_inside[i] = inside;
        }
        if step >= half && all_in {
            contained_steps += 1;
        }
        result.final_all_in_goal = all_in;
        result.steps_completed = step + 1;

        if let Some(k) = options.record_every {
            if k > 0 && step % k == 0 {
                record_rows(&mut result.rows, &world, env, options.trial, &row_sources, &row_rewards);
            }
        }
    }

    if result.failure.is_some() {
        result.final_all_in_goal = false;
    }
    result.containment_fraction = contained_steps as f64 / (steps - half) as f64;
    Ok(result)
}

fn record_rows(
    rows: &mut Vec<TrajectoryRow>,
    world: &WorldState,
    env: &EnvParams,
    trial: usize,
    sources: &[RowSource],
    rewards: &[Option<f64>],
) {
    let mut push = |kind, id, p: Vec2, source, reward| {
        rows.push(TrajectoryRow {
            t: world.t,
            trial,
            agent_kind: kind,
            agent_id: id,
            x: p.x,
            y: p.y,
            radial: (p - env.x_g).norm(),
            in_goal: in_goal(p, env),
            action_source: source,
            reward,
        })
    };
    for (i, &p) in world.targets.iter().enumerate() {
        push(AgentKind::Target, i, p, RowSource::None, None);
    }
    for (j, &p) in world.herders.iter().enumerate() {
        push(AgentKind::Herder, j, p, sources[j], rewards[j]);
    }
}

/// Summary of one episode, as stored in metric series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialMetrics {
    pub trial: usize,
    pub seed: u64,
    pub containment_fraction: f64,
    pub final_all_in_goal: bool,
    pub cumulative_reward: f64,
    pub tutor: usize,
    pub q_greedy: usize,
    pub random: usize,
    pub recollections: usize,
    pub failed: bool,
}

impl TrialMetrics {
    pub fn from_result(trial: usize, r: &EpisodeResult) -> Self {
        TrialMetrics {
            trial,
            seed: r.seed,
            containment_fraction: r.containment_fraction,
            final_all_in_goal: r.final_all_in_goal,
            cumulative_reward: r.cumulative_reward,
            tutor: r.sources.tutor,
            q_greedy: r.sources.q_greedy,
            random: r.sources.random,
            recollections: r.recollections,
            failed: r.failure.is_some(),
        }
    }
}

pub struct TrainOutput {
    pub tables: Vec<QTable>,
    pub metrics: Vec<TrialMetrics>,
    /// Trajectory rows of every trial when recording was requested.
    pub rows: Vec<TrajectoryRow>,
}

/// Trains for `config.n_trials` episodes, continuing from `tables`. Trial
/// `k` uses seed `config.seed + k`.
pub fn train_from(config: &RunConfig, mut tables: Vec<QTable>, record_every: Option<usize>) -> Result<TrainOutput> {
    config.validate()?;
    if !config.mode.learns() {
        return Err(Error::NotTrainable(config.mode.as_str()));
    }
    let mut metrics = Vec::with_capacity(config.n_trials);
    let mut rows = Vec::new();
    for trial in 0..config.n_trials {
        let seed = config.training_seed(trial);
        let options = EpisodeOptions {
            record_every,
            ..EpisodeOptions::training(trial)
        };
        let mut r = run_episode(config, &mut tables, seed, &options)?;
        metrics.push(TrialMetrics::from_result(trial, &r));
        rows.append(&mut r.rows);
    }
    Ok(TrainOutput { tables, metrics, rows })
}

pub fn train(config: &RunConfig) -> Result<TrainOutput> {
    config.validate()?;
    train_from(config, config.empty_tables()?, None)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub mode: PolicyMode,
    pub episodes: usize,
    pub mean_containment: f64,
    pub min_containment: f64,
    pub std_containment: f64,
    /// Fraction of episodes ending with every target in the goal.
    pub success_rate: f64,
    /// Fraction of episodes whose containment reaches [`CONTAINMENT_THRESHOLD`].
    pub contained_rate: f64,
    pub mean_reward: f64,
    pub recollections: usize,
    pub failures: usize,
    pub per_episode: Vec<TrialMetrics>,
}

impl EvalSummary {
    pub fn from_metrics(mode: PolicyMode, per_episode: Vec<TrialMetrics>) -> Self {
        let n = per_episode.len().max(1) as f64;
        let fracs = per_episode.iter().map(|m| m.containment_fraction);
        let mean = fracs.clone().sum::<f64>() / n;
        let var = fracs.clone().map(|c| (c - mean) * (c - mean)).sum::<f64>() / n;
        EvalSummary {
            mode,
            episodes: per_episode.len(),
            mean_containment: mean,
            min_containment: fracs.fold(f64::INFINITY, f64::min),
            std_containment: libm::sqrt(var),
            success_rate: per_episode.iter().filter(|m| m.final_all_in_goal).count() as f64 / n,
            contained_rate: per_episode
                .iter()
                .filter(|m| m.containment_fraction >= CONTAINMENT_THRESHOLD)
                .count() as f64
                / n,
            mean_reward: per_episode.iter().map(|m| m.cumulative_reward).sum::<f64>() / n,
            recollections: per_episode.iter().map(|m| m.recollections).sum(),
            failures: per_episode.iter().filter(|m| m.failed).count(),
            per_episode,
        }
    }
}

/// Evaluation episode `index` with learning and exploration disabled. The
/// tables are only read.
pub fn evaluate_episode(
    config: &RunConfig,
    tables: &[QTable],
    index: usize,
    record_every: Option<usize>,
) -> Result<EpisodeResult> {
    let mut scratch = tables.to_vec();
    let options = EpisodeOptions {
        record_every,
        ..EpisodeOptions::evaluation(index)
    };
    run_episode(config, &mut scratch, config.eval_seed(index), &options)
}

/// Runs `config.eval_trials` evaluation episodes on seeds
/// `config.seed + EVAL_SEED_OFFSET + i`.
pub fn evaluate(config: &RunConfig, tables: &[QTable]) -> Result<EvalSummary> {
    config.validate()?;
    let mut per_episode = Vec::with_capacity(config.eval_trials);
    for i in 0..config.eval_trials {
        let r = evaluate_episode(config, tables, i, None)?;
        per_episode.push(TrialMetrics::from_result(i, &r));
    }
    Ok(EvalSummary::from_metrics(config.mode, per_episode))
}

/// One line of a mode comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub mode: PolicyMode,
    pub trained_trials: usize,
    pub summary: EvalSummary,
}

/// Trains (where the mode learns) then evaluates one configuration.
pub fn train_and_evaluate(config: &RunConfig) -> Result<ComparisonRow> {
    config.validate()?;
    let (tables, trained) = if config.mode.learns() {
        (train(config)?.tables, config.n_trials)
    } else {
        (config.empty_tables()?, 0)
    };
    Ok(ComparisonRow {
        mode: config.mode,
        trained_trials: trained,
        summary: evaluate(config, &tables)?,
    })
}

/// Checks that the configurations share the environment, grid and seed base,
/// so that evaluation episodes start from identical spawns.
pub fn check_matched(configs: &[RunConfig]) -> Result<()> {
    let Some(first) = configs.first() else {
        return Err(Error::invalid("configs", "[]", "need at least one mode"));
    };
    for c in &configs[1..] {
        let mismatch = if c.env != first.env {
            Some("env")
        } else if c.grid != first.grid {
            Some("grid")
        } else if c.seed != first.seed {
            Some("seed")
        } else if c.eval_trials != first.eval_trials {
            Some("eval_trials")
        } else if c.steps_per_trial != first.steps_per_trial {
            Some("steps_per_trial")
        } else {
            None
        };
        if let Some(field) = mismatch {
            return Err(Error::invalid(
                field,
                c.mode.as_str(),
                String::from("must match across compared modes"),
            ));
        }
    }
    Ok(())
}

/// Sequential comparison of several modes on matched seeds.
pub fn compare(configs: &[RunConfig]) -> Result<Vec<ComparisonRow>> {
    check_matched(configs)?;
    configs.iter().map(train_and_evaluate).collect()
}

/// Configurations for the three modes derived from `base`, with the pure
/// Q-learning baseline given its own trial budget.
pub fn mode_configs(base: &RunConfig, ctql_trials: usize, pureq_trials: usize) -> [RunConfig; 3] {
    [
        RunConfig {
            mode: PolicyMode::Ctql,
            n_trials: ctql_trials,
            ..base.clone()
        },
        RunConfig {
            mode: PolicyMode::PureQ,
            n_trials: pureq_trials,
            ..base.clone()
        },
        RunConfig {
            mode: PolicyMode::PureTutor,
            ..base.clone()
        },
    ]
}
