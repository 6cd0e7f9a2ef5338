use clap::{Parser, ValueEnum};
use qtraj::config::{Command, ExperimentConfig};
use qtraj::oscillator::OscillatorParams;
use qtraj_cli::{apply_overrides, execute, load_config, Overrides, RunOptions};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Cmd {
    Simulate,
    Counting,
    Spectrum,
    Oracle,
    Validate,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Simulate => Command::Simulate,
            Cmd::Counting => Command::Counting,
            Cmd::Spectrum => Command::Spectrum,
            Cmd::Oracle => Command::Oracle,
            Cmd::Validate => Command::Validate,
        }
    }
}

/// Quantum trajectory simulator for a noisy driven oscillator.
#[derive(Debug, Parser)]
#[command(version, about)]
struct Args {
    /// Command to run; overrides `command` in the config file.
    command: Option<Cmd>,
    /// TOML experiment file. Without it only `validate` can run.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(short, long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trajectories: Option<u64>,
    /// Worker threads; defaults to all cores. Outputs do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
    /// Also write SVG plots.
    #[arg(long)]
    plots: bool,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let overrides = Overrides {
        command: args.command.map(Command::from),
        seed: args.seed,
        trajectories: args.trajectories,
    };
    let base = match &args.config {
        Some(path) => load_config(path),
        None if matches!(args.command, Some(Cmd::Validate)) => {
            // The acceptance suite builds its own models.
            Ok(ExperimentConfig::new(OscillatorParams {
                alpha1: qtraj::C64::new(1.0, 0.0),
                ..OscillatorParams::default()
            }))
        }
        None => {
            eprintln!("error: --config is required for this command");
            return ExitCode::from(2);
        }
    };
    let cfg = match base.and_then(|c| apply_overrides(c, &overrides)) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let opts = RunOptions {
        out: args.out,
        threads: args.threads,
        plots: args.plots,
    };
    match execute(&cfg, &opts) {
        Ok(m) => {
            for c in &m.criteria {
                println!(
                    "AC{} {} {}: {}",
                    c.id,
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.detail
                );
            }
            println!("{} written to {} ({:.2} s)", m.command, opts.out.display(), m.wall_seconds);
            if m.success {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
