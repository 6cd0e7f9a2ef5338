//! File-based front end: reads a TOML experiment, runs one command and
//! writes CSV tables, a manifest and optional SVG plots.

pub mod commands;
pub mod error;
pub mod manifest;
pub mod output;
mod plot;

use commands::CommandResult;
use error::{io_err, CliResult};
use manifest::Manifest;
use qtraj::config::{parse_config, Command, ExperimentConfig};
use std::path::{Path, PathBuf};
use std::time::Instant;

pub use error::CliError;

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub command: Option<Command>,
    pub seed: Option<u64>,
    pub trajectories: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out: PathBuf,
    pub threads: Option<usize>,
    pub plots: bool,
}

pub fn load_config(path: &Path) -> CliResult<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    Ok(parse_config(&text)?)
}

/// Applies overrides and re-checks the result.
pub fn apply_overrides(mut cfg: ExperimentConfig, o: &Overrides) -> CliResult<ExperimentConfig> {
    if let Some(c) = o.command {
        cfg.command = c;
    }
    if let Some(s) = o.seed {
        cfg.run.seed = s;
    }
    if let Some(n) = o.trajectories {
        cfg.run.trajectories = n;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Runs the configured command and writes everything under `opts.out`.
pub fn execute(cfg: &ExperimentConfig, opts: &RunOptions) -> CliResult<Manifest> {
    if opts.threads == Some(0) {
        return Err(CliError::Usage("--threads must be at least 1".into()));
    }
    let started = Instant::now();
    std::fs::create_dir_all(&opts.out).map_err(io_err(&opts.out))?;
    let CommandResult { outputs, criteria } = commands::run(cfg, opts.threads)?;

    let mut files = vec!["config.toml".to_string()];
    let cfg_path = opts.out.join("config.toml");
    std::fs::write(&cfg_path, cfg.to_toml()?).map_err(io_err(&cfg_path))?;
    for o in &outputs {
        o.table.write(&opts.out.join(o.file))?;
        files.push(o.file.to_string());
        if let (true, Some(spec)) = (opts.plots, &o.plot) {
            let x = o.table.column(&spec.x).unwrap_or_default();
            let ys: Vec<(String, Vec<f64>)> = spec
                .ys
                .iter()
                .filter_map(|h| o.table.column(h).map(|c| (h.clone(), c)))
                .collect();
            let series: Vec<plot::Series<'_>> = ys
                .iter()
                .map(|(label, y)| plot::Series { label, x: &x, y })
                .collect();
            let ylabel = spec.ys.join(", ");
            plot::line_plot(&opts.out.join(spec.file), spec.title, &spec.x, &ylabel, &series)?;
            files.push(spec.file.to_string());
        }
    }
    files.push("manifest.json".into());
    let success = criteria.iter().all(|c| c.passed);
    let manifest = Manifest {
        command: cfg.command.name().to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: cfg.hash()?,
        seed: cfg.run.seed,
        trajectories: cfg.run.trajectories,
        csv_schema_version: output::CSV_SCHEMA_VERSION,
        wall_seconds: started.elapsed().as_secs_f64(),
        files,
        criteria,
        success,
    };
    manifest.write(&opts.out.join("manifest.json"))?;
    Ok(manifest)
}
