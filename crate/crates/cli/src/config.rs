//! Run configuration: a flat JSON file overlaid by command-line flags.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use compass_core::analysis::default_grid;
use compass_core::grid::GridSpec;
use compass_core::{CompassParams, ReservoirParams};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
    /// JSON header line followed by little-endian f64 values; grids only.
    Bin,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
            Format::Bin => "bin",
        }
    }
}

/// On-disk form. Every key is optional; absent keys fall back to defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub x0: Option<f64>,
    pub p: Option<usize>,
    pub q: Option<usize>,
    pub nbar: Option<f64>,
    pub grid_l: Option<f64>,
    pub grid_n: Option<usize>,
    pub tau_schedule: Option<Vec<f64>>,
    pub theta: Option<Vec<f64>>,
    pub output_dir: Option<PathBuf>,
    pub format: Option<Format>,
    pub threads: Option<usize>,
    pub cutoff: Option<usize>,
}

impl ConfigFile {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Usage(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Fields set in `flags` replace those in `self`.
    pub fn overlay(self, flags: ConfigFile) -> ConfigFile {
        ConfigFile {
            x0: flags.x0.or(self.x0),
            p: flags.p.or(self.p),
            q: flags.q.or(self.q),
            nbar: flags.nbar.or(self.nbar),
            grid_l: flags.grid_l.or(self.grid_l),
            grid_n: flags.grid_n.or(self.grid_n),
            tau_schedule: flags.tau_schedule.or(self.tau_schedule),
            theta: flags.theta.or(self.theta),
            output_dir: flags.output_dir.or(self.output_dir),
            format: flags.format.or(self.format),
            threads: flags.threads.or(self.threads),
            cutoff: flags.cutoff.or(self.cutoff),
        }
    }
}

pub const DEFAULT_X0: f64 = 3.0;
pub const DEFAULT_NBAR: f64 = 0.5;

/// Validated configuration. Grid and schedule stay optional because each
/// command has its own defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub state: CompassParams,
    pub reservoir: ReservoirParams,
    pub grid_l: Option<f64>,
    pub grid_n: Option<usize>,
    pub tau_schedule: Option<Vec<f64>>,
    pub theta: Option<Vec<f64>>,
    pub output_dir: Option<PathBuf>,
    pub format: Format,
    pub threads: Option<usize>,
    pub cutoff: Option<usize>,
}

fn usage(e: compass_core::Error) -> CliError {
    CliError::Usage(e.to_string())
}

impl RunConfig {
    pub fn resolve(file: ConfigFile) -> Result<Self, CliError> {
        let state = CompassParams::new(
            file.x0.unwrap_or(DEFAULT_X0),
            file.p.unwrap_or(0),
            file.q.unwrap_or(0),
        )
        .map_err(usage)?;
        let reservoir = ReservoirParams::new(file.nbar.unwrap_or(DEFAULT_NBAR)).map_err(usage)?;
        if let Some(l) = file.grid_l {
            if !(l.is_finite() && l > 0.0) {
                return Err(CliError::Usage(format!("grid_l must be positive, got {l}")));
            }
        }
        if let Some(n) = file.grid_n {
            if n < 3 || n % 2 == 0 {
                return Err(CliError::Usage(format!(
                    "grid_n must be odd and >= 3, got {n}"
                )));
            }
        }
        if let Some(taus) = &file.tau_schedule {
            if taus.is_empty() {
                return Err(CliError::Usage("tau_schedule must not be empty".into()));
            }
            if taus.iter().any(|t| !t.is_finite() || *t < 0.0) {
                return Err(CliError::Usage("tau values must be finite and >= 0".into()));
            }
            if taus.windows(2).any(|w| w[1] < w[0]) {
                return Err(CliError::Usage("tau_schedule must be sorted".into()));
            }
        }
        if let Some(thetas) = &file.theta {
            if thetas.is_empty() || thetas.iter().any(|t| !t.is_finite()) {
                return Err(CliError::Usage("theta values must be finite".into()));
            }
        }
        if file.threads == Some(0) {
            return Err(CliError::Usage("threads must be positive".into()));
        }
        if file.cutoff == Some(0) {
            return Err(CliError::Usage("cutoff must be positive".into()));
        }
        Ok(Self {
            state,
            reservoir,
            grid_l: file.grid_l,
            grid_n: file.grid_n,
            tau_schedule: file.tau_schedule,
            theta: file.theta,
            output_dir: file.output_dir,
            format: file.format.unwrap_or_default(),
            threads: file.threads,
            cutoff: file.cutoff,
        })
    }

    /// Square grid from the configured `L` and `n`, each falling back to
    /// `fallback`.
    pub fn grid_or(&self, fallback: GridSpec) -> Result<GridSpec, CliError> {
        let l = self.grid_l.unwrap_or(fallback.x_max);
        let n = self.grid_n.unwrap_or(fallback.nx);
        GridSpec::square(l, n).map_err(usage)
    }

    pub fn analysis_grid(&self) -> Result<GridSpec, CliError> {
        self.grid_or(default_grid(&self.state).map_err(usage)?)
    }

    pub fn taus_or(&self, fallback: &[f64]) -> Vec<f64> {
        self.tau_schedule
            .clone()
            .unwrap_or_else(|| fallback.to_vec())
    }

    /// The single time of commands that work at one `τ`.
    pub fn single_tau(&self) -> Result<f64, CliError> {
        match self.tau_schedule.as_deref() {
            None => Ok(0.0),
            Some([t]) => Ok(*t),
            Some(_) => Err(CliError::Usage("this command takes a single --tau".into())),
        }
    }

    pub fn meta(&self, command: &str) -> serde_json::Value {
        serde_json::json!({
            "command": command,
            "x0": self.state.x0,
            "p": self.state.p,
            "q": self.state.q,
            "nbar": self.reservoir.n_bar,
            "version": env!("CARGO_PKG_VERSION"),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_win_over_file() {
        let file =
            ConfigFile::from_json(r#"{"x0": 2.0, "p": 3, "tau_schedule": [0.0, 0.1]}"#).unwrap();
        let flags = ConfigFile {
            x0: Some(1.0),
            ..Default::default()
        };
        let cfg = RunConfig::resolve(file.overlay(flags)).unwrap();
        assert_eq!(cfg.state, CompassParams::new(1.0, 3, 0).unwrap());
        assert_eq!(cfg.tau_schedule, Some(vec![0.0, 0.1]));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(
            ConfigFile::from_json(r#"{"x_0": 1}"#),
            Err(CliError::Usage(_))
        ));
    }

    #[test]
    fn invalid_values_name_the_field() {
        for (json, field) in [
            (r#"{"x0": -1}"#, "x0"),
            (r#"{"nbar": -0.1}"#, "nbar"),
            (r#"{"grid_n": 40}"#, "grid_n"),
            (r#"{"tau_schedule": [0.2, 0.1]}"#, "tau_schedule"),
        ] {
            match RunConfig::resolve(ConfigFile::from_json(json).unwrap()) {
                Err(CliError::Usage(msg)) => assert!(msg.contains(field), "{msg}"),
                other => panic!("{json}: {other:?}"),
            }
        }
    }

    #[test]
    fn grid_falls_back_per_field() {
        let cfg = RunConfig::resolve(ConfigFile {
            grid_n: Some(11),
            ..Default::default()
        })
        .unwrap();
        let g = cfg.grid_or(GridSpec::square(4.0, 41).unwrap()).unwrap();
        assert_eq!((g.x_max, g.nx), (4.0, 11));
    }
}
