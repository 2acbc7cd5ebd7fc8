//! File formats written by a run.
//!
//! * `density_<pop>_<step>.txt`: header `# t=<time> nx=<nx> ny=<ny> pop=<id>`,
//!   then `ny` lines of `nx` space-separated densities, bottom grid row first.
//!   The step is zero-padded to six digits.
//! * `density_<pop>_<step>.pgm`: optional 8-bit binary greymap, same row order.
//! * `particles.csv`: `step,t,pop,particle,x,y`, one row per particle per frame.
//! * `diagnostics.csv`: `step,t,pop,mass,max_density,min_pair_dist,entropy,boundary_loss`,
//!   one row per population per step. `max_density` is empty for particle
//!   populations, `entropy` is empty when the functional is unavailable, and
//!   `min_pair_dist` is `inf` with fewer than two particles.
//!
//! Numbers use the shortest decimal form that reads back to the same `f64`.

use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use crate::population::DensityField;

pub const PARTICLES_FILE: &str = "particles.csv";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.csv";
pub const CONFIG_FILE: &str = "config.ini";
pub const AUDIT_FILE: &str = "entropy_audit.txt";
pub const PARTICLES_HEADER: &str = "step,t,pop,particle,x,y";
pub const DIAGNOSTICS_HEADER: &str = "step,t,pop,mass,max_density,min_pair_dist,entropy,boundary_loss";

pub fn frame_name(pop: &str, step: u64, ext: &str) -> String {
    format!("density_{pop}_{step:06}.{ext}")
}

pub fn frame_path(dir: &Path, pop: &str, step: u64) -> PathBuf {
    dir.join(frame_name(pop, step, "txt"))
}

/// Text rendering of a density frame.
pub fn format_frame(field: &DensityField<f64>, t: f64, pop: &str) -> String {
    let g = field.grid();
    let (nx, ny) = (g.nx(), g.ny());
    let mut s = String::with_capacity(nx * ny * 8 + 64);
    let _ = writeln!(s, "# t={t} nx={nx} ny={ny} pop={pop}");
    for row in field.values().chunks(nx) {
        let mut first = true;
        for v in row {
            if !first {
                s.push(' ');
            }
            first = false;
            let _ = write!(s, "{v}");
        }
        s.push('\n');
    }
    s
}

/// Contents of a density frame file.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub t: f64,
    pub nx: usize,
    pub ny: usize,
    pub pop: String,
    /// Row-major, bottom row first.
    pub values: Vec<f64>,
}

pub fn parse_frame(text: &str) -> Result<Frame, String> {
    let mut lines = text.lines();
    let header = lines.next().ok_or("empty frame file")?;
    let header = header.strip_prefix("# ").ok_or("frame header must start with '# '")?;
    let (mut t, mut nx, mut ny, mut pop) = (None, None, None, None);
    for part in header.split_whitespace() {
        let (k, v) = part.split_once('=').ok_or_else(|| format!("bad header field '{part}'"))?;
        match k {
            "t" => t = Some(v.parse::<f64>().map_err(|e| format!("t: {e}"))?),
            "nx" => nx = Some(v.parse::<usize>().map_err(|e| format!("nx: {e}"))?),
            "ny" => ny = Some(v.parse::<usize>().map_err(|e| format!("ny: {e}"))?),
            "pop" => pop = Some(v.to_string()),
            _ => return Err(format!("unknown header field '{k}'")),
        }
    }
    let (t, nx, ny, pop) = match (t, nx, ny, pop) {
        (Some(t), Some(nx), Some(ny), Some(pop)) => (t, nx, ny, pop),
        _ => return Err("frame header needs t, nx, ny and pop".into()),
    };
    let mut values = Vec::with_capacity(nx * ny);
    let mut rows = 0;
    for (k, line) in lines.enumerate() {
        let before = values.len();
        for tok in line.split_whitespace() {
            values.push(tok.parse::<f64>().map_err(|e| format!("row {}: {e}", k + 1))?);
        }
        if values.len() - before != nx {
            return Err(format!("row {} has {} values, expected {nx}", k + 1, values.len() - before));
        }
        rows += 1;
    }
    if rows != ny {
        return Err(format!("found {rows} rows, expected {ny}"));
    }
    Ok(Frame { t, nx, ny, pop, values })
}

/// Binary P5 greymap with `round(255 min(rho / scale, 1))`.
pub fn write_pgm(w: &mut impl Write, field: &DensityField<f64>, scale: f64) -> io::Result<()> {
    let g = field.grid();
    write!(w, "P5\n{} {}\n255\n", g.nx(), g.ny())?;
    let bytes: Vec<u8> = field
        .values()
        .iter()
        .map(|&v| {
            let r = if scale > 0.0 { (v / scale).min(1.0) } else { 0.0 };
            (255.0 * r).round() as u8
        })
        .collect();
    w.write_all(&bytes)
}

/// Shortest round-trip decimal, empty for `None`.
pub fn opt_num(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}
