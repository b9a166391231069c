use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ctql::ctql_core::PolicyMode;
use ctql::run::{self, Overrides};
use ctql::{parse_config, CliError};

#[derive(Parser)]
#[command(name = "ctql", version, about = "Control-tutored Q-learning for multi-agent herding")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train Q-tables and write them with the per-trial metrics.
    Train {
        #[command(flatten)]
        common: Common,
        /// Number of training trials.
        #[arg(long)]
        trials: Option<usize>,
        /// Also write training trajectories, keeping every K-th control step.
        #[arg(long, value_name = "K")]
        record_every: Option<usize>,
    },
    /// Evaluate saved tables on the evaluation seeds.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Directory holding qtable_h<j>.txt (not needed for puretutor).
        #[arg(long, value_name = "DIR")]
        tables: Option<PathBuf>,
        /// Number of evaluation episodes.
        #[arg(long)]
        trials: Option<usize>,
        /// Keep every K-th control step in the trajectory file.
        #[arg(long, value_name = "K", default_value_t = 1)]
        record_every: usize,
    },
    /// Train and evaluate all three modes on matched seeds.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Training trials for the tutored learner.
        #[arg(long)]
        trials: Option<usize>,
        /// Training trials for plain Q-learning (defaults to --trials).
        #[arg(long)]
        pureq_trials: Option<usize>,
    },
    /// Check saved tables against the configuration and write them in
    /// canonical text form, plus a long-form CSV view.
    Export {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "DIR")]
        tables: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, value_name = "DIR", default_value = ".")]
    out: PathBuf,
    /// Overrides the configured policy mode.
    #[arg(long, value_parser = parse_mode)]
    mode: Option<PolicyMode>,
}

fn parse_mode(s: &str) -> Result<PolicyMode, String> {
    s.parse().map_err(|e: ctql::ctql_core::Error| e.to_string())
}

impl Common {
    fn load(&self) -> Result<ctql::ctql_core::RunConfig, CliError> {
        Overrides {
            seed: self.seed,
            mode: self.mode,
        }
        .apply(parse_config(&self.config)?)
    }
}

fn positive(name: &str, k: usize) -> Result<usize, CliError> {
    if k == 0 {
        return Err(CliError::Usage(format!("--{name} must be at least 1")));
    }
    Ok(k)
}

fn execute(cli: Cli) -> Result<Vec<PathBuf>, CliError> {
    match cli.command {
        Command::Train {
            common,
            trials,
            record_every,
        } => {
            let mut config = common.load()?;
            if let Some(n) = trials {
                config.n_trials = positive("trials", n)?;
            }
            let record_every = record_every.map(|k| positive("record-every", k)).transpose()?;
            run::cmd_train(&config, &common.out, record_every)
        }
        Command::Eval {
            common,
            tables,
            trials,
            record_every,
        } => {
            let mut config = common.load()?;
            if let Some(n) = trials {
                config.eval_trials = positive("trials", n)?;
            }
            let k = positive("record-every", record_every)?;
            run::cmd_eval(&config, tables.as_deref(), &common.out, Some(k))
        }
        Command::Compare {
            common,
            trials,
            pureq_trials,
        } => {
            let config = common.load()?;
            let ctql_trials = positive("trials", trials.unwrap_or(config.n_trials))?;
            let pureq_trials = positive("pureq-trials", pureq_trials.unwrap_or(ctql_trials))?;
            let (records, paths) = run::cmd_compare(&config, &common.out, ctql_trials, pureq_trials)?;
            ctql::formats::write_report(&mut std::io::stdout().lock(), &records)
                .map_err(|source| CliError::Write {
                    path: "<stdout>".into(),
                    source,
                })?;
            Ok(paths)
        }
        Command::Export { common, tables } => {
            let config = common.load()?;
            run::cmd_export(&config, &tables, &common.out)
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(paths) => {
            for p in paths {
                eprintln!("wrote {}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
