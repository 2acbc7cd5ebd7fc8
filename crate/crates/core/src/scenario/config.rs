//! Scenario configuration and its sectioned key-value file format.
//!
//! ```text
//! [grid]
//! L = 50
//! W = 50
//! nx = 50
//! ny = 50
//!
//! [time]
//! dt = 0.01
//! steps = 1500
//! frame_stride = 100
//!
//! [population "crowd"]
//! kind = density
//! block = 20,20,30,30
//! rho = 2
//! vdes = 1.34,0
//! sigma = 0.5
//!
//! [population "walker"]
//! kind = discrete
//! weight = 60
//! positions = 40,25; 41,27
//! vdes = -1.34,0
//!
//! [interaction]
//! src = walker
//! dst = crowd
//! kind = r
//! F = 0.03
//! Rr = 4
//!
//! [flags]
//! allow_boundary_loss = false
//! entropy_audit = false
//! ```
//!
//! `src` is the population exerting the influence, `dst` the one whose
//! velocity changes. Lines starting with `#` are comments. Unknown sections
//! and keys are errors. Defaults: the `[grid]` is 50 x 50 on `[0,50]^2`,
//! `dt = 0.01`, `steps = 1000`, `frame_stride = 100`, `vdes = 0,0`,
//! `sigma = 1`, both flags `false`.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::error::SimError;
use crate::grid::{Grid, Rect};
use crate::kernels::{Anisotropy, InteractionKernel};
use crate::population::{DensityField, DiscreteMeasure, InteractionMatrix, Population, SimState};
use crate::vec2::Vec2;

pub const DEFAULT_DT: f64 = 0.01;
pub const DEFAULT_STEPS: u64 = 1000;
pub const DEFAULT_FRAME_STRIDE: u64 = 100;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid {field}: {msg}")]
    Validation { field: String, msg: String },
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("unknown preset '{0}' (available: {list})", list = super::presets::PRESET_NAMES.join(", "))]
    UnknownPreset(String),
}

fn invalid(field: impl Into<String>, msg: impl Into<String>) -> ConfigError {
    ConfigError::Validation { field: field.into(), msg: msg.into() }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub length: f64,
    pub width: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { length: 50.0, width: 50.0, nx: 50, ny: 50 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PopulationKind {
    Discrete { weight: f64, positions: Vec<(f64, f64)> },
    /// Uniform density `rho` on the rectangle `[x0, x1] x [y0, y1]`.
    Density { block: [f64; 4], rho: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PopulationSpec {
    pub id: String,
    pub kind: PopulationKind,
    pub vdes: (f64, f64),
    pub sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelSpec {
    AttractRepel { strength: f64, r_rep: f64, r_att: f64 },
    RepelOnly { strength: f64, r_rep: f64 },
}

impl KernelSpec {
    pub fn build(&self) -> Result<InteractionKernel<f64>, SimError> {
        Ok(match *self {
            KernelSpec::AttractRepel { strength, r_rep, r_att } => InteractionKernel::attract_repel(strength, r_rep, r_att)?,
            KernelSpec::RepelOnly { strength, r_rep } => InteractionKernel::repel_only(strength, r_rep)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InteractionSpec {
    pub src: String,
    pub dst: String,
    pub kernel: KernelSpec,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Flags {
    pub allow_boundary_loss: bool,
    pub entropy_audit: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub grid: GridSpec,
    pub dt: f64,
    pub steps: u64,
    pub frame_stride: u64,
    pub populations: Vec<PopulationSpec>,
    pub interactions: Vec<InteractionSpec>,
    pub flags: Flags,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            grid: GridSpec::default(),
            dt: DEFAULT_DT,
            steps: DEFAULT_STEPS,
            frame_stride: DEFAULT_FRAME_STRIDE,
            populations: Vec::new(),
            interactions: Vec::new(),
            flags: Flags::default(),
        }
    }
}

#[derive(Debug)]
enum SectionKind {
    Grid,
    Time,
    Population(String),
    Interaction,
    Flags,
}

#[derive(Debug)]
struct Section {
    kind: SectionKind,
    line: usize,
    entries: BTreeMap<String, (usize, String)>,
}

impl Section {
    fn take(&mut self, key: &str) -> Option<(usize, String)> {
        self.entries.remove(key)
    }

    fn finish(self) -> Result<(), ConfigError> {
        match self.entries.into_iter().next() {
            Some((key, (line, _))) => Err(ConfigError::Parse { line, msg: format!("unknown or inapplicable key '{key}'") }),
            None => Ok(()),
        }
    }
}

fn parse_err(line: usize, msg: impl Into<String>) -> ConfigError {
    ConfigError::Parse { line, msg: msg.into() }
}

fn split_sections(text: &str) -> Result<Vec<Section>, ConfigError> {
    let mut sections: Vec<Section> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let s = raw.trim();
        if s.is_empty() || s.starts_with('#') {
            continue;
        }
        if let Some(inner) = s.strip_prefix('[') {
            let inner = inner.strip_suffix(']').ok_or_else(|| parse_err(line, "unterminated section header"))?.trim();
            let kind = match inner {
                "grid" => SectionKind::Grid,
                "time" => SectionKind::Time,
                "interaction" => SectionKind::Interaction,
                "flags" => SectionKind::Flags,
                _ => {
                    let rest = inner
                        .strip_prefix("population")
                        .ok_or_else(|| parse_err(line, format!("unknown section '[{inner}]'")))?
                        .trim();
                    let id = rest
                        .strip_prefix('"')
                        .and_then(|r| r.strip_suffix('"'))
                        .ok_or_else(|| parse_err(line, "population section needs a quoted id: [population \"name\"]"))?;
                    SectionKind::Population(id.to_string())
                }
            };
            sections.push(Section { kind, line, entries: BTreeMap::new() });
            continue;
        }
        let (key, value) = s.split_once('=').ok_or_else(|| parse_err(line, format!("expected 'key = value', got '{s}'")))?;
        let key = key.trim();
        let mut value = value.trim();
        if value.len() >= 2 && value.starts_with('"') && value.ends_with('"') {
            value = &value[1..value.len() - 1];
        }
        let sec = sections.last_mut().ok_or_else(|| parse_err(line, "key outside of any section"))?;
        if sec.entries.insert(key.to_string(), (line, value.to_string())).is_some() {
            return Err(parse_err(line, format!("duplicate key '{key}'")));
        }
    }
    Ok(sections)
}

fn num(line: usize, key: &str, v: &str) -> Result<f64, ConfigError> {
    let x: f64 = v.trim().parse().map_err(|_| parse_err(line, format!("{key}: '{v}' is not a number")))?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(parse_err(line, format!("{key}: '{v}' is not finite")))
    }
}

fn uint(line: usize, key: &str, v: &str) -> Result<u64, ConfigError> {
    v.trim().parse().map_err(|_| parse_err(line, format!("{key}: '{v}' is not a nonnegative integer")))
}

fn boolean(line: usize, key: &str, v: &str) -> Result<bool, ConfigError> {
    match v.trim() {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(parse_err(line, format!("{key}: expected true or false, got '{v}'"))),
    }
}

fn numbers<const N: usize>(line: usize, key: &str, v: &str) -> Result<[f64; N], ConfigError> {
    let parts: Vec<&str> = v.split(',').collect();
    if parts.len() != N {
        return Err(parse_err(line, format!("{key}: expected {N} comma-separated numbers, got '{v}'")));
    }
    let mut out = [0.0; N];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = num(line, key, p)?;
    }
    Ok(out)
}

fn required(sec: &mut Section, key: &str) -> Result<(usize, String), ConfigError> {
    let line = sec.line;
    sec.take(key).ok_or_else(|| parse_err(line, format!("missing required key '{key}'")))
}

impl ScenarioConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::parse(&text)
    }

    /// Parses and validates a configuration.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = ScenarioConfig::default();
        let mut seen_single = HashSet::new();
        for mut sec in split_sections(text)? {
            let single = match &sec.kind {
                SectionKind::Grid => Some("grid"),
                SectionKind::Time => Some("time"),
                SectionKind::Flags => Some("flags"),
                _ => None,
            };
            if let Some(name) = single {
                if !seen_single.insert(name) {
                    return Err(parse_err(sec.line, format!("section [{name}] given twice")));
                }
            }
            match std::mem::replace(&mut sec.kind, SectionKind::Grid) {
                SectionKind::Grid => {
                    if let Some((l, v)) = sec.take("L") {
                        cfg.grid.length = num(l, "L", &v)?;
                    }
                    if let Some((l, v)) = sec.take("W") {
                        cfg.grid.width = num(l, "W", &v)?;
                    }
                    if let Some((l, v)) = sec.take("nx") {
                        cfg.grid.nx = uint(l, "nx", &v)? as usize;
                    }
                    if let Some((l, v)) = sec.take("ny") {
                        cfg.grid.ny = uint(l, "ny", &v)? as usize;
                    }
                }
                SectionKind::Time => {
                    if let Some((l, v)) = sec.take("dt") {
                        cfg.dt = num(l, "dt", &v)?;
                    }
                    if let Some((l, v)) = sec.take("steps") {
                        cfg.steps = uint(l, "steps", &v)?;
                    }
                    if let Some((l, v)) = sec.take("frame_stride") {
                        cfg.frame_stride = uint(l, "frame_stride", &v)?;
                    }
                }
                SectionKind::Flags => {
                    if let Some((l, v)) = sec.take("allow_boundary_loss") {
                        cfg.flags.allow_boundary_loss = boolean(l, "allow_boundary_loss", &v)?;
                    }
                    if let Some((l, v)) = sec.take("entropy_audit") {
                        cfg.flags.entropy_audit = boolean(l, "entropy_audit", &v)?;
                    }
                }
                SectionKind::Population(id) => cfg.populations.push(parse_population(id, &mut sec)?),
                SectionKind::Interaction => cfg.interactions.push(parse_interaction(&mut sec)?),
            }
            sec.finish()?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks every cross-field constraint. Also run by [`ScenarioConfig::parse`].
    pub fn validate(&self) -> Result<(), ConfigError> {
        let g = &self.grid;
        if !(g.length > 0.0 && g.width > 0.0 && g.length.is_finite() && g.width.is_finite()) {
            return Err(invalid("grid", "L and W must be positive"));
        }
        if g.nx == 0 || g.ny == 0 {
            return Err(invalid("grid", "nx and ny must be at least 1"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(invalid("time.dt", "must be positive"));
        }
        if self.frame_stride == 0 {
            return Err(invalid("time.frame_stride", "must be at least 1"));
        }
        let mut ids = HashSet::new();
        for p in &self.populations {
            let field = format!("population \"{}\"", p.id);
            if p.id.is_empty() || !p.id.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
                return Err(invalid(field, "id must be nonempty and use only letters, digits, '_' or '-'"));
            }
            if !ids.insert(p.id.as_str()) {
                return Err(invalid(field, "duplicate id"));
            }
            if !(0.0..=1.0).contains(&p.sigma) {
                return Err(invalid(format!("{field}.sigma"), "must lie in [0, 1]"));
            }
            match &p.kind {
                PopulationKind::Discrete { weight, positions } => {
                    if !(*weight > 0.0) {
                        return Err(invalid(format!("{field}.weight"), "must be positive"));
                    }
                    for &(x, y) in positions {
                        if !(x > 0.0 && x < g.length && y > 0.0 && y < g.width) {
                            return Err(invalid(format!("{field}.positions"), format!("({x}, {y}) is not strictly inside the domain")));
                        }
                    }
                }
                PopulationKind::Density { block, rho } => {
                    let [x0, y0, x1, y1] = *block;
                    if !(x0 < x1 && y0 < y1) {
                        return Err(invalid(format!("{field}.block"), "needs x0 < x1 and y0 < y1"));
                    }
                    if x0 < 0.0 || y0 < 0.0 || x1 > g.length || y1 > g.width {
                        return Err(invalid(format!("{field}.block"), "must lie inside the domain"));
                    }
                    if !(*rho >= 0.0) {
                        return Err(invalid(format!("{field}.rho"), "must be nonnegative"));
                    }
                }
            }
        }
        let mut pairs = HashSet::new();
        for (n, it) in self.interactions.iter().enumerate() {
            let field = format!("interaction #{} ({} -> {})", n + 1, it.src, it.dst);
            for id in [&it.src, &it.dst] {
                if !ids.contains(id.as_str()) {
                    return Err(invalid(field.clone(), format!("unknown population '{id}'")));
                }
            }
            if !pairs.insert((it.src.as_str(), it.dst.as_str())) {
                return Err(invalid(field, "pair given twice"));
            }
            it.kernel.build().map_err(|e| invalid(field.clone(), e.to_string()))?;
        }
        Ok(())
    }

    pub fn build_grid(&self) -> Result<Grid<f64>, SimError> {
        Ok(Grid::new(self.grid.length, self.grid.width, self.grid.nx, self.grid.ny)?)
    }

    /// Initial simulation state.
    pub fn build_state(&self) -> Result<SimState<f64>, SimError> {
        let grid = self.build_grid()?;
        let mut pops = Vec::with_capacity(self.populations.len());
        for p in &self.populations {
            let v = Vec2::new(p.vdes.0, p.vdes.1);
            let a = Anisotropy::new(p.sigma)?;
            pops.push(match &p.kind {
                PopulationKind::Discrete { weight, positions } => {
                    let centers = positions.iter().map(|&(x, y)| Vec2::new(x, y)).collect();
                    Population::discrete(p.id.clone(), DiscreteMeasure::new(*weight, centers)?, v, a)
                }
                PopulationKind::Density { block, rho } => {
                    let [x0, y0, x1, y1] = *block;
                    let f = DensityField::from_block(&grid, Rect::new(x0, y0, x1, y1), *rho)?;
                    Population::density(p.id.clone(), f, v, a)
                }
            });
        }
        let index = |id: &str| {
            self.populations
                .iter()
                .position(|p| p.id == id)
                .ok_or_else(|| SimError::InvalidState(format!("unknown population '{id}'")))
        };
        let mut im = InteractionMatrix::empty(pops.len());
        for it in &self.interactions {
            im.set(index(&it.dst)?, index(&it.src)?, Some(it.kernel.build()?));
        }
        SimState::new(grid, self.dt, pops, im)
    }

    /// Renders the configuration in the file format; parsing the result
    /// gives back an equal configuration.
    pub fn to_config_string(&self) -> String {
        let mut s = String::new();
        let g = &self.grid;
        let _ = writeln!(s, "[grid]\nL = {}\nW = {}\nnx = {}\nny = {}\n", g.length, g.width, g.nx, g.ny);
        let _ = writeln!(s, "[time]\ndt = {}\nsteps = {}\nframe_stride = {}\n", self.dt, self.steps, self.frame_stride);
        for p in &self.populations {
            let _ = writeln!(s, "[population \"{}\"]", p.id);
            match &p.kind {
                PopulationKind::Discrete { weight, positions } => {
                    let pos: Vec<String> = positions.iter().map(|(x, y)| format!("{x},{y}")).collect();
                    let _ = writeln!(s, "kind = discrete\nweight = {}\npositions = {}", weight, pos.join("; "));
                }
                PopulationKind::Density { block, rho } => {
                    let _ = writeln!(s, "kind = density\nblock = {},{},{},{}\nrho = {}", block[0], block[1], block[2], block[3], rho);
                }
            }
            let _ = writeln!(s, "vdes = {},{}\nsigma = {}\n", p.vdes.0, p.vdes.1, p.sigma);
        }
        for it in &self.interactions {
            let _ = writeln!(s, "[interaction]\nsrc = {}\ndst = {}", it.src, it.dst);
            match it.kernel {
                KernelSpec::AttractRepel { strength, r_rep, r_att } => {
                    let _ = writeln!(s, "kind = ar\nF = {strength}\nRr = {r_rep}\nRa = {r_att}\n");
                }
                KernelSpec::RepelOnly { strength, r_rep } => {
                    let _ = writeln!(s, "kind = r\nF = {strength}\nRr = {r_rep}\n");
                }
            }
        }
        let _ = writeln!(
            s,
            "[flags]\nallow_boundary_loss = {}\nentropy_audit = {}",
            self.flags.allow_boundary_loss, self.flags.entropy_audit
        );
        s
    }

    pub fn population(&self, id: &str) -> Option<&PopulationSpec> {
        self.populations.iter().find(|p| p.id == id)
    }

    pub fn population_mut(&mut self, id: &str) -> Option<&mut PopulationSpec> {
        self.populations.iter_mut().find(|p| p.id == id)
    }

    pub fn interaction_mut(&mut self, src: &str, dst: &str) -> Option<&mut InteractionSpec> {
        self.interactions.iter_mut().find(|i| i.src == src && i.dst == dst)
    }
}

fn parse_population(id: String, sec: &mut Section) -> Result<PopulationSpec, ConfigError> {
    let (kl, kind) = required(sec, "kind")?;
    let kind = match kind.as_str() {
        "discrete" => {
            let (wl, w) = required(sec, "weight")?;
            let (pl, p) = required(sec, "positions")?;
            let positions = p
                .split(';')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|pair| numbers::<2>(pl, "positions", pair).map(|[x, y]| (x, y)))
                .collect::<Result<Vec<_>, _>>()?;
            PopulationKind::Discrete { weight: num(wl, "weight", &w)?, positions }
        }
        "density" => {
            let (bl, b) = required(sec, "block")?;
            let (rl, r) = required(sec, "rho")?;
            PopulationKind::Density { block: numbers::<4>(bl, "block", &b)?, rho: num(rl, "rho", &r)? }
        }
        other => return Err(parse_err(kl, format!("kind must be 'discrete' or 'density', got '{other}'"))),
    };
    let vdes = match sec.take("vdes") {
        Some((l, v)) => {
            let [x, y] = numbers::<2>(l, "vdes", &v)?;
            (x, y)
        }
        None => (0.0, 0.0),
    };
    let sigma = match sec.take("sigma") {
        Some((l, v)) => num(l, "sigma", &v)?,
        None => 1.0,
    };
    Ok(PopulationSpec { id, kind, vdes, sigma })
}

fn parse_interaction(sec: &mut Section) -> Result<InteractionSpec, ConfigError> {
    let (_, src) = required(sec, "src")?;
    let (_, dst) = required(sec, "dst")?;
    let (kl, kind) = required(sec, "kind")?;
    let (fl, f) = required(sec, "F")?;
    let (rl, rr) = required(sec, "Rr")?;
    let strength = num(fl, "F", &f)?;
    let r_rep = num(rl, "Rr", &rr)?;
    let kernel = match kind.as_str() {
        "ar" => {
            let (al, ra) = required(sec, "Ra")?;
            KernelSpec::AttractRepel { strength, r_rep, r_att: num(al, "Ra", &ra)? }
        }
        "r" => KernelSpec::RepelOnly { strength, r_rep },
        other => return Err(parse_err(kl, format!("kind must be 'ar' or 'r', got '{other}'"))),
    };
    Ok(InteractionSpec { src, dst, kernel })
}
