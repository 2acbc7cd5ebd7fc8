//! Offline checks of a finished run, reading only the files it wrote.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;

use super::config::{PopulationKind, ScenarioConfig};
use super::output::{frame_path, parse_frame, CONFIG_FILE, DIAGNOSTICS_FILE, PARTICLES_FILE};
use super::run::RunError;
use crate::error::SimError;

/// Relative tolerance for mass bookkeeping.
pub const MASS_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AuditReport {
    pub checks: Vec<Check>,
    /// `min_n (S_{n+1} - S_n)` from the diagnostics file, if entropy was recorded.
    pub worst_entropy_increment: Option<f64>,
    /// Worst deficit divided by `dt^2`.
    pub k_empirical: Option<f64>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    fn push(&mut self, name: &str, passed: bool, detail: String) {
        self.checks.push(Check { name: name.into(), passed, detail });
    }
}

impl fmt::Display for AuditReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail)?;
        }
        match (self.worst_entropy_increment, self.k_empirical) {
            (Some(w), Some(k)) => writeln!(f, "entropy: worst step change {w:e}, K = {k:e}"),
            _ => writeln!(f, "entropy: not recorded"),
        }
    }
}

#[derive(Debug, Clone)]
struct DiagRow {
    mass: f64,
    entropy: Option<f64>,
    loss: f64,
}

fn bad(msg: impl Into<String>) -> RunError {
    RunError::Sim(SimError::Diagnostics(msg.into()))
}

fn read(path: &Path) -> Result<String, RunError> {
    fs::read_to_string(path).map_err(|source| RunError::Io { path: path.to_path_buf(), source })
}

fn parse_opt(s: &str, what: &str, line: usize) -> Result<Option<f64>, RunError> {
    if s.is_empty() {
        Ok(None)
    } else {
        s.parse().map(Some).map_err(|_| bad(format!("{DIAGNOSTICS_FILE} line {line}: bad {what} '{s}'")))
    }
}

/// Per population: step -> row.
type Diagnostics = BTreeMap<String, BTreeMap<u64, DiagRow>>;

fn read_diagnostics(dir: &Path) -> Result<Diagnostics, RunError> {
    let text = read(&dir.join(DIAGNOSTICS_FILE))?;
    let mut out: Diagnostics = BTreeMap::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 8 {
            return Err(bad(format!("{DIAGNOSTICS_FILE} line {}: expected 8 fields", i + 1)));
        }
        let step: u64 = f[0].parse().map_err(|_| bad(format!("{DIAGNOSTICS_FILE} line {}: bad step", i + 1)))?;
        let row = DiagRow {
            mass: parse_opt(f[3], "mass", i + 1)?.ok_or_else(|| bad("missing mass"))?,
            entropy: parse_opt(f[6], "entropy", i + 1)?,
            loss: parse_opt(f[7], "boundary_loss", i + 1)?.unwrap_or(0.0),
        };
        out.entry(f[2].to_string()).or_default().insert(step, row);
    }
    Ok(out)
}

/// Per population: step -> particle count.
fn read_particle_counts(dir: &Path) -> Result<BTreeMap<String, BTreeMap<u64, usize>>, RunError> {
    let text = read(&dir.join(PARTICLES_FILE))?;
    let mut out: BTreeMap<String, BTreeMap<u64, usize>> = BTreeMap::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 6 {
            return Err(bad(format!("{PARTICLES_FILE} line {}: expected 6 fields", i + 1)));
        }
        let step: u64 = f[0].parse().map_err(|_| bad(format!("{PARTICLES_FILE} line {}: bad step", i + 1)))?;
        *out.entry(f[2].to_string()).or_default().entry(step).or_default() += 1;
    }
    Ok(out)
}

fn rel(a: f64, b: f64, scale: f64) -> f64 {
    if scale > 0.0 {
        (a - b).abs() / scale
    } else {
        (a - b).abs()
    }
}

/// Re-checks positivity, mass bookkeeping, frame counts, particle counts and
/// the recorded entropy of the run stored in `dir`.
pub fn audit_dir(dir: &Path) -> Result<AuditReport, RunError> {
    let cfg = ScenarioConfig::load(dir.join(CONFIG_FILE))?;
    let diag = read_diagnostics(dir)?;
    let particles = read_particle_counts(dir)?;
    let mut report = AuditReport::default();
    let cell_area = (cfg.grid.length / cfg.grid.nx as f64) * (cfg.grid.width / cfg.grid.ny as f64);

    let last = diag.values().filter_map(|m| m.keys().next_back().copied()).min().unwrap_or(0);
    let frame_steps: Vec<u64> = (0..=last).step_by(cfg.frame_stride as usize).collect();
    report.push(
        "diagnostics rows",
        cfg.populations.iter().all(|p| diag.get(&p.id).is_some_and(|m| m.len() as u64 == last + 1)),
        format!("steps 0..={last} for {} populations", cfg.populations.len()),
    );

    for p in &cfg.populations {
        let rows = diag.get(&p.id).cloned().unwrap_or_default();
        let m0 = rows.get(&0).map_or(0.0, |r| r.mass);
        let mut worst = 0.0f64;
        for (n, r) in &rows {
            if let Some(prev) = n.checked_sub(1).and_then(|k| rows.get(&k)) {
                worst = worst.max(rel(r.mass + r.loss, prev.mass, m0));
            }
        }
        report.push(
            &format!("mass balance '{}'", p.id),
            worst <= MASS_TOL,
            format!("worst relative step imbalance {worst:e}"),
        );

        match &p.kind {
            PopulationKind::Density { .. } => {
                let mut negative = 0usize;
                let mut worst_mass = 0.0f64;
                let mut found = 0usize;
                for &n in &frame_steps {
                    let path = frame_path(dir, &p.id, n);
                    let frame = match fs::read_to_string(&path) {
                        Ok(t) => parse_frame(&t).map_err(|e| bad(format!("{}: {e}", path.display())))?,
                        Err(_) => continue,
                    };
                    found += 1;
                    negative += frame.values.iter().filter(|v| !(**v >= 0.0)).count();
                    let sum = frame.values.iter().fold(0.0, |a, &v| a + v) * cell_area;
                    if let Some(r) = rows.get(&n) {
                        worst_mass = worst_mass.max(rel(sum, r.mass, m0));
                    }
                }
                report.push(
                    &format!("frames '{}'", p.id),
                    found == frame_steps.len(),
                    format!("{found} of {} expected frames", frame_steps.len()),
                );
                report.push(&format!("positivity '{}'", p.id), negative == 0, format!("{negative} negative values"));
                report.push(
                    &format!("frame mass '{}'", p.id),
                    worst_mass <= MASS_TOL,
                    format!("worst relative mismatch against diagnostics {worst_mass:e}"),
                );
            }
            PopulationKind::Discrete { positions, weight } => {
                let counts = particles.get(&p.id).cloned().unwrap_or_default();
                let mut ok = counts.len() == frame_steps.len();
                let mut expected = positions.len();
                let mut prev_step = 0;
                for (&n, &c) in &counts {
                    if n > prev_step {
                        let lost: f64 = rows.range(prev_step + 1..=n).map(|(_, r)| r.loss).sum();
                        expected = expected.saturating_sub((lost / weight).round() as usize);
                    }
                    ok &= c == expected;
                    prev_step = n;
                }
                report.push(
                    &format!("particle count '{}'", p.id),
                    ok,
                    format!("{} frames, final count {expected}", counts.len()),
                );
            }
        }
    }

    let entropy: Vec<(u64, f64)> = diag
        .values()
        .next()
        .map(|m| m.iter().filter_map(|(n, r)| r.entropy.map(|s| (*n, s))).collect())
        .unwrap_or_default();
    if entropy.len() > 1 {
        let worst = entropy.windows(2).map(|w| w[1].1 - w[0].1).fold(f64::INFINITY, f64::min);
        report.worst_entropy_increment = Some(worst);
        report.k_empirical = Some((-worst).max(0.0) / (cfg.dt * cfg.dt));
    }
    Ok(report)
}
