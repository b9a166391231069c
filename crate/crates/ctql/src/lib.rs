//! Configuration files, output formats and command implementations for
//! control-tutored Q-learning herding experiments. The simulation itself is
//! in [`ctql_core`].

pub mod config;
pub mod error;
pub mod formats;
pub mod fsio;
pub mod run;

pub use config::{parse_config, parse_config_str};
pub use ctql_core;
pub use error::{CliError, Result};
