use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use twoscale::diagnostics::{predicted_empty_zone_radius, predicted_equilibrium_distance};
use twoscale::scenario::{audit_dir, preset, run, RunOptions, ScenarioConfig, PRESET_NAMES};

/// Two-scale crowd simulator: individuals as point masses, crowds as densities.
#[derive(Parser)]
#[command(name = "twoscale", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario from a configuration file.
    Run {
        config: PathBuf,
        #[command(flatten)]
        opts: RunArgs,
    },
    /// Run a built-in scenario.
    Preset {
        /// One of: approach, blob, intrusion, intrusion-narrow, two-close,
        /// two-apart, leader, leader-strong, leader-wide.
        name: String,
        #[command(flatten)]
        opts: RunArgs,
    },
    /// Re-check conservation, positivity and entropy of a finished run.
    Audit { dir: PathBuf },
    /// Print a closed-form prediction.
    Predict {
        #[command(subcommand)]
        which: Predict,
    },
}

#[derive(Subcommand)]
enum Predict {
    /// Rest distance of two opposing individuals: F Rr / (speed + F).
    Eq { strength: f64, r_rep: f64, speed: f64 },
    /// Empty-zone radius in front of an intruder: M F Rr / (2 speed + M F).
    Zone { weight: f64, strength: f64, r_rep: f64, speed: f64 },
}

#[derive(Args)]
struct RunArgs {
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    steps: Option<u64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    allow_boundary_loss: bool,
    /// Also write PGM images of density frames.
    #[arg(long)]
    pgm: bool,
    /// Density shown as white in PGM images.
    #[arg(long)]
    pgm_scale: Option<f64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

fn execute(mut cfg: ScenarioConfig, args: RunArgs) -> Result<()> {
    if let Some(n) = args.steps {
        cfg.steps = n;
    }
    if let Some(dt) = args.dt {
        cfg.dt = dt;
    }
    cfg.flags.allow_boundary_loss |= args.allow_boundary_loss;
    cfg.validate()?;
    let opts = RunOptions { pgm: args.pgm, pgm_scale: args.pgm_scale, threads: args.threads };
    let start = Instant::now();
    let summary = run(&cfg, &args.out, &opts)?;
    println!(
        "{} steps, {} frames written to {} in {:.2?}",
        summary.steps,
        summary.frames,
        args.out.display(),
        start.elapsed()
    );
    if let Some(a) = summary.audit {
        println!(
            "entropy: worst step change {:e} (dt/2: {:e}), K = {:e}, shrink ratio {}",
            a.worst_increment,
            a.worst_increment_half,
            a.k_empirical(),
            a.shrink_ratio()
        );
    }
    Ok(())
}

fn audit(dir: &Path) -> Result<()> {
    let report = audit_dir(dir).with_context(|| format!("auditing {}", dir.display()))?;
    print!("{report}");
    if !report.passed() {
        bail!("audit failed");
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, opts } => ScenarioConfig::load(&config)
            .with_context(|| format!("loading {}", config.display()))
            .and_then(|c| execute(c, opts)),
        Command::Preset { name, opts } => preset(&name)
            .with_context(|| format!("known presets: {}", PRESET_NAMES.join(", ")))
            .and_then(|c| execute(c, opts)),
        Command::Audit { dir } => audit(&dir),
        Command::Predict { which } => {
            match which {
                Predict::Eq { strength, r_rep, speed } => {
                    println!("{}", predicted_equilibrium_distance(strength, r_rep, speed))
                }
                Predict::Zone { weight, strength, r_rep, speed } => {
                    println!("{}", predicted_empty_zone_radius(weight, strength, r_rep, speed))
                }
            }
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
