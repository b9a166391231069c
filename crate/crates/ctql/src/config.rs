//! TOML run configuration. Every table and key is optional; omitted values
//! take the library defaults.

use std::fs;
use std::path::Path;

use ctql_core::RunConfig;

use crate::error::{CliError, Result};

/// Reads and validates a configuration file.
pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config_str(&text).map_err(|e| match e {
        CliError::Syntax { source, .. } => CliError::Syntax {
            path: path.to_path_buf(),
            source,
        },
        CliError::Invalid { source, .. } => CliError::Invalid {
            path: path.to_path_buf(),
            source,
        },
        other => other,
    })
}

pub fn parse_config_str(text: &str) -> Result<RunConfig> {
    let config: RunConfig = toml::from_str(text).map_err(|source| CliError::Syntax {
        path: "<config>".into(),
        source,
    })?;
    config.validate().map_err(|source| CliError::Invalid {
        path: "<config>".into(),
        source,
    })?;
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ctql_core::PolicyMode;

    #[test]
    fn empty_config_is_all_defaults() {
        assert_eq!(parse_config_str("").unwrap(), RunConfig::default());
        let c = parse_config_str("seed = 7\nmode = \"pureq\"\n[env]\nn_targets = 5\n").unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.mode, PolicyMode::PureQ);
        assert_eq!(c.env.n_targets, 5);
        assert_eq!(c.env.rho_t, RunConfig::default().env.rho_t);
    }

    #[test]
    fn invariant_errors_name_the_field() {
        let msg = parse_config_str("[tutor]\nk = 0.5\n").unwrap_err().to_string();
        assert!(msg.contains("tutor.k") && msg.contains("0.5") && msg.contains("k > 1"), "{msg}");
        let msg = parse_config_str("[env]\nrho_t = 2.0\n[tutor]\nrho_t_hat = 3.0\n")
            .unwrap_err()
            .to_string();
        assert!(msg.contains("tutor.rho_t_hat") && msg.contains('3') && msg.contains("rho_t = 2"), "{msg}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let e = parse_config_str("[env]\nmu_typo = 1.0\n").unwrap_err();
        assert!(matches!(e, CliError::Syntax { .. }));
        assert!(e.to_string().contains("mu_typo"));
    }

    #[test]
    fn missing_file() {
        let e = parse_config(Path::new("/nonexistent/ctql.toml")).unwrap_err();
        assert!(matches!(e, CliError::Read { .. }));
    }
}
