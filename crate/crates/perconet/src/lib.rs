//! Experiment runner for `perconet-core`: layered TOML configuration, a rayon
//! trial runner, CSV/JSON formats and reproducible run manifests.

pub mod config;
pub mod error;
pub mod experiments;
pub mod io;
pub mod manifest;
pub mod pool;

use std::path::{Path, PathBuf};

use config::ExperimentConfig;
use error::RunError;
use experiments::{Context, Subcommand};
use manifest::RunManifest;
use perconet_core::percolation::ThetaTable;
use pool::PoolRunner;

/// Runs one subcommand into `out_dir` and writes its manifest.
pub fn execute(
    cmd: Subcommand,
    config: &ExperimentConfig,
    out_dir: &Path,
    theta: Option<ThetaTable>,
) -> Result<RunManifest, RunError> {
    let runner = PoolRunner::new(config.runtime.workers);
    let started = manifest::now();
    let ctx = Context { config, runner: &runner, out_dir: out_dir.to_path_buf(), theta };
    let files = experiments::run(cmd, &ctx)?;
    let m = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        subcommand: cmd.name().to_string(),
        seed: config.runtime.seed,
        workers: runner.workers(),
        started,
        finished: manifest::now(),
        config: config.to_toml(),
        outputs: manifest::checksums(out_dir, &files)?,
    };
    m.write(out_dir)?;
    Ok(m)
}

/// Re-runs a manifest into `out_dir` and checks every output checksum.
pub fn replay(manifest_path: &Path, out_dir: Option<&Path>) -> Result<RunManifest, RunError> {
    let original = RunManifest::read(manifest_path)?;
    let cmd = Subcommand::parse(&original.subcommand)
        .ok_or_else(|| RunError::Format(format!("unknown subcommand `{}` in manifest", original.subcommand)))?;
    let config = config::parse_layered(&original.config, &config::EnvOverrides::default(), &[])?;
    let dir: PathBuf = match out_dir {
        Some(d) => d.to_path_buf(),
        None => manifest_path.parent().unwrap_or(Path::new(".")).join("replay"),
    };
    let again = execute(cmd, &config, &dir, None)?;
    let diff = original.differing_outputs(&again);
    if diff.is_empty() {
        Ok(again)
    } else {
        Err(RunError::Mismatch(diff.join(", ")))
    }
}
