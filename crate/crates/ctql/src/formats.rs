//! Comma-separated outputs and Q-table files.
//!
//! Trajectory coordinates, times and rewards are stored at 9 significant
//! digits; metric and summary files keep full precision (shortest
//! round-trip decimals). Q-tables use the learner's own text format, one file
//! per herder.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use ctql_core::harness::{ComparisonRow, EvalSummary, TrialMetrics};
use ctql_core::{AgentKind, PolicyMode, QTable, RowSource, TrajectoryRow};
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{CliError, Result};

pub const TRAJECTORY_HEADER: &str = "t,trial,agent_kind,agent_id,x,y,radial,in_goal,action_source,reward";

/// Rounds to 9 significant digits, the precision kept in trajectory files.
pub fn round_sig9(v: f64) -> f64 {
    if !v.is_finite() || v == 0.0 {
        return v;
    }
    format!("{v:.8e}").parse().unwrap_or(v)
}

fn sig9<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(round_sig9(*v))
}

fn sig9_opt<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match v {
        Some(v) => s.serialize_f64(round_sig9(*v)),
        None => s.serialize_none(),
    }
}

mod bit {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &bool, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(*v as u8)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<bool, D::Error> {
        match u8::deserialize(d)? {
            0 => Ok(false),
            1 => Ok(true),
            n => Err(serde::de::Error::custom(format!("in_goal must be 0 or 1, got {n}"))),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct TrajectoryRecord {
    #[serde(serialize_with = "sig9")]
    t: f64,
    trial: usize,
    agent_kind: AgentKind,
    agent_id: usize,
    #[serde(serialize_with = "sig9")]
    x: f64,
    #[serde(serialize_with = "sig9")]
    y: f64,
    #[serde(serialize_with = "sig9")]
    radial: f64,
    #[serde(with = "bit")]
    in_goal: bool,
    action_source: RowSource,
    #[serde(serialize_with = "sig9_opt")]
    reward: Option<f64>,
}

impl From<&TrajectoryRow> for TrajectoryRecord {
    fn from(r: &TrajectoryRow) -> Self {
        TrajectoryRecord {
            t: r.t,
            trial: r.trial,
            agent_kind: r.agent_kind,
            agent_id: r.agent_id,
            x: r.x,
            y: r.y,
            radial: r.radial,
            in_goal: r.in_goal,
            action_source: r.action_source,
            reward: r.reward,
        }
    }
}

impl From<TrajectoryRecord> for TrajectoryRow {
    fn from(r: TrajectoryRecord) -> Self {
        TrajectoryRow {
            t: r.t,
            trial: r.trial,
            agent_kind: r.agent_kind,
            agent_id: r.agent_id,
            x: r.x,
            y: r.y,
            radial: r.radial,
            in_goal: r.in_goal,
            action_source: r.action_source,
            reward: r.reward,
        }
    }
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> CliError + '_ {
    move |source| CliError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

fn write_records<T: Serialize>(items: impl IntoIterator<Item = T>, header_only: &[&str]) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new().has_headers(true).from_writer(Vec::new());
    let mut any = false;
    for item in items {
        w.serialize(item).expect("in-memory csv write");
        any = true;
    }
    if !any {
        w.write_record(header_only).expect("in-memory csv write");
    }
    w.into_inner().expect("in-memory csv flush")
}

fn read_records<T: for<'de> Deserialize<'de>>(input: impl Read, path: &Path) -> Result<Vec<T>> {
    csv::Reader::from_reader(input)
        .deserialize()
        .collect::<Result<Vec<T>, _>>()
        .map_err(csv_err(path))
}

pub fn trajectory_csv(rows: &[TrajectoryRow]) -> Vec<u8> {
    let header: Vec<&str> = TRAJECTORY_HEADER.split(',').collect();
    write_records(rows.iter().map(TrajectoryRecord::from), &header)
}

pub fn parse_trajectory(input: impl Read, path: &Path) -> Result<Vec<TrajectoryRow>> {
    let records: Vec<TrajectoryRecord> = read_records(input, path)?;
    Ok(records.into_iter().map(Into::into).collect())
}

pub fn read_trajectory(path: &Path) -> Result<Vec<TrajectoryRow>> {
    parse_trajectory(open(path)?, path)
}

const METRICS_HEADER: [&str; 10] = [
    "trial",
    "seed",
    "containment_fraction",
    "final_all_in_goal",
    "cumulative_reward",
    "tutor",
    "q_greedy",
    "random",
    "recollections",
    "failed",
];

/// Per-trial (training) or per-episode (evaluation) metric series.
pub fn metrics_csv(metrics: &[TrialMetrics]) -> Vec<u8> {
    write_records(metrics, &METRICS_HEADER)
}

pub fn read_metrics(path: &Path) -> Result<Vec<TrialMetrics>> {
    read_records(open(path)?, path)
}

/// One aggregate line per evaluated mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRecord {
    pub mode: PolicyMode,
    pub trained_trials: usize,
    pub episodes: usize,
    pub mean_containment: f64,
    pub min_containment: f64,
    pub std_containment: f64,
    pub success_rate: f64,
    pub contained_rate: f64,
    pub mean_reward: f64,
    pub recollections: usize,
    pub failures: usize,
}

impl SummaryRecord {
    pub fn new(summary: &EvalSummary, trained_trials: usize) -> Self {
        SummaryRecord {
            mode: summary.mode,
            trained_trials,
            episodes: summary.episodes,
            mean_containment: summary.mean_containment,
            min_containment: summary.min_containment,
            std_containment: summary.std_containment,
            success_rate: summary.success_rate,
            contained_rate: summary.contained_rate,
            mean_reward: summary.mean_reward,
            recollections: summary.recollections,
            failures: summary.failures,
        }
    }
}

impl From<&ComparisonRow> for SummaryRecord {
    fn from(row: &ComparisonRow) -> Self {
        SummaryRecord::new(&row.summary, row.trained_trials)
    }
}

const SUMMARY_HEADER: [&str; 11] = [
    "mode",
    "trained_trials",
    "episodes",
    "mean_containment",
    "min_containment",
    "std_containment",
    "success_rate",
    "contained_rate",
    "mean_reward",
    "recollections",
    "failures",
];

pub fn summary_csv(records: &[SummaryRecord]) -> Vec<u8> {
    write_records(records, &SUMMARY_HEADER)
}

pub fn read_summary(path: &Path) -> Result<Vec<SummaryRecord>> {
    read_records(open(path)?, path)
}

pub fn table_path(dir: &Path, herder: usize) -> PathBuf {
    dir.join(format!("qtable_h{herder}.txt"))
}

pub fn read_table(path: &Path) -> Result<QTable> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    QTable::from_text(&text).map_err(|source| CliError::Invalid {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads `qtable_h0.txt .. qtable_h{n-1}.txt` from `dir`.
pub fn read_tables(dir: &Path, n_herders: usize) -> Result<Vec<QTable>> {
    (0..n_herders).map(|j| read_table(&table_path(dir, j))).collect()
}

/// Long-form view of a table: one line per (state, action) pair with the
/// action's velocity in the goal-anchored frame.
pub fn table_long_csv(
    table: &QTable,
    grid: &ctql_core::StateGrid,
    actions: &ctql_core::ActionSet,
) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "dist_bin", "angle_bin", "speed_bin", "goal_bin", "action", "vx", "vy", "q",
    ])
    .expect("in-memory csv write");
    for index in 0..grid.n_states() {
        let s = grid.unflatten(index);
        for (a, q) in table.row(s).iter().enumerate() {
            let v = actions.get(a);
            w.write_record(&[
                s.dist_bin.to_string(),
                s.angle_bin.to_string(),
                s.speed_bin.to_string(),
                s.goal_bin.to_string(),
                a.to_string(),
                format!("{:?}", v.x),
                format!("{:?}", v.y),
                format!("{q:?}"),
            ])
            .expect("in-memory csv write");
        }
    }
    w.flush().expect("in-memory csv flush");
    w.into_inner().expect("in-memory csv flush")
}

fn open(path: &Path) -> Result<fs::File> {
    fs::File::open(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })
}

/// Human-readable comparison table for the terminal.
pub fn write_report(out: &mut impl Write, records: &[SummaryRecord]) -> std::io::Result<()> {
    writeln!(
        out,
        "{:<10} {:>7} {:>9} {:>8} {:>8} {:>9} {:>9} {:>12}",
        "mode", "trained", "episodes", "mean", "min", "success", "contained", "mean_reward"
    )?;
    for r in records {
        writeln!(
            out,
            "{:<10} {:>7} {:>9} {:>8.3} {:>8.3} {:>9.2} {:>9.2} {:>12.1}",
            r.mode.as_str(),
            r.trained_trials,
            r.episodes,
            r.mean_containment,
            r.min_containment,
            r.success_rate,
            r.contained_rate,
            r.mean_reward
        )?;
    }
    Ok(())
}
