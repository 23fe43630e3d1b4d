//! Configuration, orchestration and persistence around `rovib-core`.

pub mod cache;
pub mod check;
pub mod config;
pub mod error;
pub mod jobs;
pub mod manifest;

use std::time::Instant;

use crate::check::{convergence_check, ConvergenceReport};
use crate::config::{JobConfig, RunConfig};
use crate::error::{CliError, Result};
use crate::jobs::{
    run_propagation_job, run_thermal_job, write_eigen_outputs, write_pulse_outputs, Setup,
};
use crate::manifest::{OutputDir, RunManifest};

pub use crate::error::{EXIT_CONFIG, EXIT_NOT_CONVERGED, EXIT_NUMERICAL, EXIT_OK};

/// What to do with a configuration.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Action {
    /// The configured job.
    Run,
    /// Only the eigen library and its tables.
    Eigen,
    /// Only the pulse tables.
    Export,
    /// The refinement check for whatever job is configured.
    Check,
}

/// Runs the configured job. A failed convergence check still writes its
/// report and a complete manifest, then returns [`CliError::NotConverged`].
pub fn run(config: &RunConfig) -> Result<RunManifest> {
    execute(config, Action::Run)
}

pub fn execute(config: &RunConfig, action: Action) -> Result<RunManifest> {
    config.validate()?;
    let started = Instant::now();
    let mut out = OutputDir::create(&config.output_dir)?;
    let mut manifest = RunManifest {
        job: match action {
            Action::Run => config.job.name().to_string(),
            Action::Eigen => "eigen".into(),
            Action::Export => "export".into(),
            Action::Check => "convergence_check".into(),
        },
        config_hash: config.hash(),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        library_hash: None,
        library_cache: None,
        wall_time_s: 0.0,
        complete: false,
        error: None,
        files: Vec::new(),
    };
    let outcome = body(config, action, &mut out, &mut manifest);
    manifest.wall_time_s = started.elapsed().as_secs_f64();
    match outcome {
        Ok(report) => {
            manifest.complete = true;
            let manifest = out.finish(manifest)?;
            match report {
                Some(r) if !r.passed => Err(CliError::NotConverged(Box::new(r))),
                _ => Ok(manifest),
            }
        }
        Err(e) => {
            manifest.error = Some(e.to_string());
            // The original error matters more than a failure to record it.
            let _ = out.finish(manifest);
            Err(e)
        }
    }
}

fn body(
    config: &RunConfig,
    action: Action,
    out: &mut OutputDir,
    manifest: &mut RunManifest,
) -> Result<Option<ConvergenceReport>> {
    let mut config_json = serde_json::to_string_pretty(config).expect("config serializes");
    config_json.push('\n');
    out.write("config.json", config_json)?;
    if action == Action::Export {
        write_pulse_outputs(config, out)?;
        return Ok(None);
    }
    let setup = Setup::new(config, config.grid)?;
    manifest.library_hash = Some(setup.library.hash().to_string());
    manifest.library_cache = Some(
        match setup.cache {
            cache::CacheOutcome::Hit => "hit",
            cache::CacheOutcome::Miss => "miss",
        }
        .to_string(),
    );
    write_eigen_outputs(&setup, out)?;
    match (action, &config.job) {
        (Action::Eigen, _) => Ok(None),
        (Action::Export, _) => unreachable!("handled above"),
        (Action::Check, JobConfig::ConvergenceCheck { tolerance, .. })
        | (Action::Run, JobConfig::ConvergenceCheck { tolerance, .. }) => {
            convergence_check(config, &setup, *tolerance, out).map(Some)
        }
        (Action::Check, _) => {
            convergence_check(config, &setup, config::drift_tolerance(), out).map(Some)
        }
        (Action::Run, JobConfig::Thermal { .. }) => {
            let spec = config.job.thermal_spec().expect("thermal job");
            write_pulse_outputs(config, out)?;
            run_thermal_job(config, &spec, &setup, out).map(|_| None)
        }
        (Action::Run, _) => {
            if !config.pulses.is_empty() {
                write_pulse_outputs(config, out)?;
            }
            run_propagation_job(config, &setup, out).map(|_| None)
        }
    }
}
