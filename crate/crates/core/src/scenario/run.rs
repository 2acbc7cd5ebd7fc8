//! The run loop: steps a scenario and writes frames and diagnostics.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use log::info;
use thiserror::Error;

use super::config::{ConfigError, ScenarioConfig};
use super::output::{
    format_frame, frame_name, opt_num, write_pgm, AUDIT_FILE, CONFIG_FILE, DIAGNOSTICS_FILE, DIAGNOSTICS_HEADER,
    PARTICLES_FILE, PARTICLES_HEADER,
};
use crate::diagnostics::{entropy, EntropyAudit, EntropyConfig};
use crate::error::SimError;
use crate::population::{Measure, SimState};
use crate::transport::{step, StepOptions, StepReport};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("cannot create thread pool: {0}")]
    Threads(String),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> RunError + '_ {
    move |source| RunError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOptions {
    /// Also write PGM images of every density frame.
    pub pgm: bool,
    /// Density mapped to white; defaults to the largest initial density.
    pub pgm_scale: Option<f64>,
    /// Worker threads for intra-step parallelism; `None` uses the global pool.
    pub threads: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub final_state: SimState<f64>,
    pub steps: u64,
    pub frames: usize,
    pub audit: Option<EntropyAudit<f64>>,
}

struct Writers {
    dir: PathBuf,
    particles: BufWriter<File>,
    diagnostics: BufWriter<File>,
    pgm_scale: Option<f64>,
}

impl Writers {
    fn create(dir: &Path, pgm_scale: Option<f64>) -> Result<Self, RunError> {
        let open = |name: &str, header: &str| -> Result<BufWriter<File>, RunError> {
            let path = dir.join(name);
            let mut w = BufWriter::new(File::create(&path).map_err(io_err(&path))?);
            writeln!(w, "{header}").map_err(io_err(&path))?;
            Ok(w)
        };
        Ok(Writers {
            dir: dir.to_path_buf(),
            particles: open(PARTICLES_FILE, PARTICLES_HEADER)?,
            diagnostics: open(DIAGNOSTICS_FILE, DIAGNOSTICS_HEADER)?,
            pgm_scale,
        })
    }

    fn frame(&mut self, state: &SimState<f64>) -> Result<(), RunError> {
        let n = state.step_index();
        let t = state.time();
        for p in state.populations() {
            match &p.measure {
                Measure::Density(f) => {
                    let path = self.dir.join(frame_name(&p.id, n, "txt"));
                    fs::write(&path, format_frame(f, t, &p.id)).map_err(io_err(&path))?;
                    if let Some(scale) = self.pgm_scale {
                        let path = self.dir.join(frame_name(&p.id, n, "pgm"));
                        let mut w = BufWriter::new(File::create(&path).map_err(io_err(&path))?);
                        write_pgm(&mut w, f, scale).and_then(|_| w.flush()).map_err(io_err(&path))?;
                    }
                }
                Measure::Discrete(d) => {
                    let path = self.dir.join(PARTICLES_FILE);
                    for (i, c) in d.centers().iter().enumerate() {
                        writeln!(self.particles, "{n},{t},{},{i},{},{}", p.id, c.x, c.y).map_err(io_err(&path))?;
                    }
                }
            }
        }
        Ok(())
    }

    fn diagnostics(
        &mut self,
        state: &SimState<f64>,
        entropy: Option<f64>,
        report: Option<&StepReport<f64>>,
    ) -> Result<(), RunError> {
        let n = state.step_index();
        let t = state.time();
        let min_pair = state.min_pairwise_distance();
        let path = self.dir.join(DIAGNOSTICS_FILE);
        for (i, p) in state.populations().iter().enumerate() {
            let max = p.as_density().map(|f| f.max_density());
            let loss = report.map_or(0.0, |r| r.populations[i].boundary_loss);
            writeln!(
                self.diagnostics,
                "{n},{t},{},{},{},{min_pair},{},{loss}",
                p.id,
                p.total_mass(),
                opt_num(max),
                opt_num(entropy)
            )
            .map_err(io_err(&path))?;
        }
        Ok(())
    }

    fn flush(&mut self) -> Result<(), RunError> {
        let p = self.dir.join(PARTICLES_FILE);
        self.particles.flush().map_err(io_err(&p))?;
        let d = self.dir.join(DIAGNOSTICS_FILE);
        self.diagnostics.flush().map_err(io_err(&d))
    }
}

fn initial_max_density(state: &SimState<f64>) -> f64 {
    state
        .populations()
        .iter()
        .filter_map(|p| p.as_density())
        .map(|f| f.max_density())
        .fold(0.0, f64::max)
}

/// Runs `config` and writes all outputs into `out_dir` (created if needed).
///
/// Files written before a failing step are kept and flushed.
pub fn run(config: &ScenarioConfig, out_dir: &Path, opts: &RunOptions) -> Result<RunSummary, RunError> {
    config.validate()?;
    match opts.threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| RunError::Threads(e.to_string()))?;
            pool.install(|| run_inner(config, out_dir, opts))
        }
        None => run_inner(config, out_dir, opts),
    }
}

fn run_inner(config: &ScenarioConfig, out_dir: &Path, opts: &RunOptions) -> Result<RunSummary, RunError> {
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let cfg_path = out_dir.join(CONFIG_FILE);
    fs::write(&cfg_path, config.to_config_string()).map_err(io_err(&cfg_path))?;

    let initial = config.build_state()?;
    let gate = if config.flags.entropy_audit {
        match EntropyConfig::from_state(&initial) {
            Ok(c) => Some(c),
            Err(e) => {
                info!("entropy audit skipped: {e}");
                None
            }
        }
    } else {
        None
    };
    let pgm_scale = opts.pgm.then(|| opts.pgm_scale.unwrap_or_else(|| initial_max_density(&initial)));
    let mut out = Writers::create(out_dir, pgm_scale)?;
    let step_opts = StepOptions { allow_boundary_loss: config.flags.allow_boundary_loss };

    let mut state = initial.clone();
    let mut frames = 0;
    let mut s_prev = gate.as_ref().map(|g| entropy(&state, g));
    let initial_entropy = s_prev;
    let mut worst = f64::INFINITY;
    out.frame(&state)?;
    frames += 1;
    out.diagnostics(&state, s_prev, None)?;
    for n in 1..=config.steps {
        let (next, report) = match step(&state, step_opts) {
            Ok(r) => r,
            Err(e) => {
                out.flush()?;
                return Err(e.into());
            }
        };
        state = next;
        let s = gate.as_ref().map(|g| entropy(&state, g));
        if let (Some(a), Some(b)) = (s_prev, s) {
            worst = worst.min(b - a);
        }
        s_prev = s;
        if n % config.frame_stride == 0 {
            out.frame(&state)?;
            frames += 1;
        }
        out.diagnostics(&state, s, Some(&report))?;
    }
    out.flush()?;

    let audit = match (&gate, initial_entropy, s_prev) {
        (Some(g), Some(s0), Some(s1)) => {
            let worst_half = half_step_worst(&initial, config.steps, g)?;
            let a = EntropyAudit {
                dt: config.dt,
                steps: config.steps as usize,
                initial_entropy: s0,
                final_entropy: s1,
                worst_increment: worst,
                worst_increment_half: worst_half,
            };
            let path = out_dir.join(AUDIT_FILE);
            fs::write(&path, format_audit(&a)).map_err(io_err(&path))?;
            Some(a)
        }
        _ => None,
    };
    Ok(RunSummary { final_state: state, steps: config.steps, frames, audit })
}

fn half_step_worst(initial: &SimState<f64>, steps: u64, cfg: &EntropyConfig<f64>) -> Result<f64, SimError> {
    let mut state = initial.clone().with_dt(initial.dt() / 2.0)?;
    let mut prev = entropy(&state, cfg);
    let mut worst = f64::INFINITY;
    for _ in 0..2 * steps {
        state = step(&state, StepOptions::default())?.0;
        let s = entropy(&state, cfg);
        worst = worst.min(s - prev);
        prev = s;
    }
    Ok(worst)
}

pub fn format_audit(a: &EntropyAudit<f64>) -> String {
    format!(
        "dt = {}\nsteps = {}\ninitial_entropy = {}\nfinal_entropy = {}\nworst_increment = {}\n\
         worst_increment_half_dt = {}\nk_empirical = {}\nshrink_ratio = {}\nconsistent = {}\n",
        a.dt,
        a.steps,
        a.initial_entropy,
        a.final_entropy,
        a.worst_increment,
        a.worst_increment_half,
        a.k_empirical(),
        a.shrink_ratio(),
        a.consistent()
    )
}
