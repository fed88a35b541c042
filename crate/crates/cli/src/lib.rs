//! Experiment runner behind the `hsmix` binary: configuration, the
//! subcommand registry, artifact writers and exit-code mapping.

pub mod config;
pub mod experiments;
pub mod output;

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};

pub use config::{ConfigError, RunConfig};
pub use experiments::{chaos_pipeline, experiments, ChaosOutcome, Experiment};

pub mod exit {
    pub const OK: i32 = 0;
    pub const FAILURE: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const PATHOLOGY: i32 = 3;
    pub const NUMERICAL: i32 = 4;
}

/// Maps an error chain to the documented exit codes.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    use hsmix_core::Error as E;
    for cause in err.chain() {
        if cause.downcast_ref::<ConfigError>().is_some() {
            return exit::CONFIG;
        }
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::InvalidInput(_) | E::Validation(_) | E::ScalingInfeasible(_) | E::Domain(_) | E::EmptyDomain(_) => exit::CONFIG,
                E::Pathology(_) => exit::PATHOLOGY,
                E::HorizonTooLong(_) | E::NoConvergence(_) => exit::NUMERICAL,
                _ => exit::FAILURE,
            };
        }
    }
    exit::FAILURE
}

/// What a finished run produced.
pub struct RunOutcome {
    pub dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

/// Validates `cfg`, runs the named experiment into `cfg.output.dir` and
/// writes `manifest.json` next to the outputs. The manifest is also written
/// when the experiment fails after producing artifacts.
pub fn run(name: &str, cfg: &RunConfig) -> Result<RunOutcome> {
    let registry = experiments();
    let exp = registry.get(name)?;
    let warnings = cfg.validate_for(exp.sections())?;
    let dir = cfg.output.dir.clone();
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let start = Instant::now();
    let result = exp.run(cfg, &dir);
    let files = match &result {
        Ok(f) => f.clone(),
        Err(_) => Vec::new(),
    };
    let manifest = output::Manifest {
        subcommand: name.to_string(),
        seed: cfg.seed,
        git_describe: output::git_describe(),
        wall_time_s: start.elapsed().as_secs_f64(),
        timestamp_unix: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
        outputs: files.iter().filter_map(|p| p.file_name()).map(|n| n.to_string_lossy().into_owned()).collect(),
        warnings: warnings.clone(),
        config: cfg.clone(),
    };
    output::write_manifest(&dir, &manifest)?;
    result.map(|files| RunOutcome { dir, files, warnings })
}

/// Loads a configuration file, or the defaults when no path is given.
pub fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    Ok(match path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    })
}
