//! Command implementations. Each command computes everything in memory first
//! and then commits its output files together, so a failure leaves no partial
//! output behind.

use std::path::{Path, PathBuf};

use ctql_core::harness::{
    evaluate_episode, mode_configs, train_from, ComparisonRow, EvalSummary, TrialMetrics,
};
use ctql_core::{PolicyMode, QTable, RunConfig, TrajectoryRow};
use rayon::prelude::*;

use crate::error::{CliError, Result};
use crate::formats::{self, SummaryRecord};
use crate::fsio::Staged;

pub const TRAIN_METRICS: &str = "train_metrics.csv";
pub const TRAIN_TRAJECTORY: &str = "train_trajectory.csv";
pub const EVAL_TRAJECTORY: &str = "trajectory.csv";
pub const EVAL_METRICS: &str = "eval_metrics.csv";
pub const EVAL_SUMMARY: &str = "eval_summary.csv";
pub const COMPARE_REPORT: &str = "compare.csv";
pub const RESOLVED_CONFIG: &str = "run_config.toml";

/// Command-line overrides applied on top of the configuration file.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub mode: Option<PolicyMode>,
}

impl Overrides {
    pub fn apply(&self, mut config: RunConfig) -> Result<RunConfig> {
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(mode) = self.mode {
            config.mode = mode;
        }
        config.validate()?;
        Ok(config)
    }
}

/// Evaluates `config.eval_trials` episodes in parallel. Results come back in
/// episode order, so the outcome does not depend on the thread count.
pub fn evaluate_parallel(
    config: &RunConfig,
    tables: &[QTable],
    record_every: Option<usize>,
) -> Result<(EvalSummary, Vec<TrajectoryRow>)> {
    config.validate()?;
    let episodes = (0..config.eval_trials)
        .into_par_iter()
        .map(|i| evaluate_episode(config, tables, i, record_every))
        .collect::<Result<Vec<_>, _>>()?;
    let mut rows = Vec::new();
    let mut metrics = Vec::with_capacity(episodes.len());
    for (i, mut ep) in episodes.into_iter().enumerate() {
        metrics.push(TrialMetrics::from_result(i, &ep));
        rows.append(&mut ep.rows);
    }
    Ok((EvalSummary::from_metrics(config.mode, metrics), rows))
}

/// Trains where the mode learns, then evaluates on the shared seeds.
pub fn train_and_evaluate(config: &RunConfig) -> Result<ComparisonRow> {
    let (tables, trained) = if config.mode.learns() {
        (train_from(config, config.empty_tables()?, None)?.tables, config.n_trials)
    } else {
        (config.empty_tables()?, 0)
    };
    let (summary, _) = evaluate_parallel(config, &tables, None)?;
    Ok(ComparisonRow {
        mode: config.mode,
        trained_trials: trained,
        summary,
    })
}

/// Runs the three modes concurrently on matched seeds.
pub fn compare_parallel(base: &RunConfig, ctql_trials: usize, pureq_trials: usize) -> Result<Vec<ComparisonRow>> {
    let configs = mode_configs(base, ctql_trials, pureq_trials);
    ctql_core::harness::check_matched(&configs)?;
    configs.par_iter().map(train_and_evaluate).collect()
}

fn resolved_config(config: &RunConfig) -> Vec<u8> {
    toml::to_string(config)
        .expect("run configuration serialises to TOML")
        .into_bytes()
}

/// Trains from zero tables; writes one table per herder, the per-trial
/// metrics and, with `record_every`, the training trajectories.
pub fn cmd_train(config: &RunConfig, out: &Path, record_every: Option<usize>) -> Result<Vec<PathBuf>> {
    let trained = train_from(config, config.empty_tables()?, record_every)?;
    let mut stage = Staged::new();
    for (j, t) in trained.tables.iter().enumerate() {
        stage.add(formats::table_path(out, j), t.to_text().as_bytes())?;
    }
    stage.add(out.join(TRAIN_METRICS), &formats::metrics_csv(&trained.metrics))?;
    if record_every.is_some() {
        stage.add(out.join(TRAIN_TRAJECTORY), &formats::trajectory_csv(&trained.rows))?;
    }
    stage.add(out.join(RESOLVED_CONFIG), &resolved_config(config))?;
    stage.commit()
}

/// Evaluates saved tables (or, for the pure tutor, no tables at all).
pub fn cmd_eval(
    config: &RunConfig,
    tables_dir: Option<&Path>,
    out: &Path,
    record_every: Option<usize>,
) -> Result<Vec<PathBuf>> {
    let tables = load_tables(config, tables_dir)?;
    let (summary, rows) = evaluate_parallel(config, &tables, record_every)?;
    let mut stage = Staged::new();
    stage.add(out.join(EVAL_TRAJECTORY), &formats::trajectory_csv(&rows))?;
    stage.add(out.join(EVAL_METRICS), &formats::metrics_csv(&summary.per_episode))?;
    let trained = if config.mode.learns() { config.n_trials } else { 0 };
    stage.add(
        out.join(EVAL_SUMMARY),
        &formats::summary_csv(&[SummaryRecord::new(&summary, trained)]),
    )?;
    stage.commit()
}

pub fn cmd_compare(
    config: &RunConfig,
    out: &Path,
    ctql_trials: usize,
    pureq_trials: usize,
) -> Result<(Vec<SummaryRecord>, Vec<PathBuf>)> {
    let rows = compare_parallel(config, ctql_trials, pureq_trials)?;
    let records: Vec<SummaryRecord> = rows.iter().map(SummaryRecord::from).collect();
    let mut stage = Staged::new();
    stage.add(out.join(COMPARE_REPORT), &formats::summary_csv(&records))?;
    Ok((records, stage.commit()?))
}

/// Re-emits saved tables in canonical text form after checking them against
/// the configuration, plus a long-form CSV view of each.
pub fn cmd_export(config: &RunConfig, tables_dir: &Path, out: &Path) -> Result<Vec<PathBuf>> {
    let tables = load_tables_from(config, tables_dir)?;
    let actions = config.action_set()?;
    let mut stage = Staged::new();
    for (j, t) in tables.iter().enumerate() {
        stage.add(formats::table_path(out, j), t.to_text().as_bytes())?;
        stage.add(
            out.join(format!("qtable_h{j}.csv")),
            &formats::table_long_csv(t, &config.grid, &actions),
        )?;
    }
    stage.commit()
}

fn load_tables(config: &RunConfig, dir: Option<&Path>) -> Result<Vec<QTable>> {
    match dir {
        Some(dir) => load_tables_from(config, dir),
        None if !config.mode.learns() => Ok(config.empty_tables()?),
        None => Err(CliError::Usage(format!(
            "mode `{}` needs trained tables (--tables DIR)",
            config.mode
        ))),
    }
}

fn load_tables_from(config: &RunConfig, dir: &Path) -> Result<Vec<QTable>> {
    let tables = formats::read_tables(dir, config.env.n_herders)?;
    let n_actions = config.action_set()?.len();
    for (j, t) in tables.iter().enumerate() {
        t.check_dims(&config.grid, n_actions).map_err(|source| CliError::Invalid {
            path: formats::table_path(dir, j),
            source,
        })?;
    }
    Ok(tables)
}
