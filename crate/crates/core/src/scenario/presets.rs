//! Built-in scenarios on the reference parameter set.
//!
//! Reference values: domain `50 x 50`, individual weight `M = 60`, walking
//! speed `1.34`, attraction-repulsion kernel `(F, Rr, Ra) = (0.03, 1.5, 3)`,
//! repulsive kernel `(F, Rr) = (0.03, 4)`, anisotropy `sigma = 0.5`, time
//! step `0.01` on a `50 x 50` grid.

use super::config::{
    ConfigError, Flags, GridSpec, InteractionSpec, KernelSpec, PopulationKind, PopulationSpec, ScenarioConfig,
};

pub const PRESET_NAMES: [&str; 9] = [
    "approach",
    "blob",
    "intrusion",
    "intrusion-narrow",
    "two-close",
    "two-apart",
    "leader",
    "leader-strong",
    "leader-wide",
];

pub const WALKING_SPEED: f64 = 1.34;
pub const INDIVIDUAL_WEIGHT: f64 = 60.0;
pub const CROWD_DENSITY: f64 = 2.0;
pub const SIGMA: f64 = 0.5;

pub const AR_KERNEL: KernelSpec = KernelSpec::AttractRepel { strength: 0.03, r_rep: 1.5, r_att: 3.0 };
pub const R_KERNEL: KernelSpec = KernelSpec::RepelOnly { strength: 0.03, r_rep: 4.0 };

/// Initial position of the intruding individual, left of the crowd and
/// walking right a quarter cell away from both grid lines and midpoints.
pub const INTRUDER_START: (f64, f64) = (20.0, 25.25);
/// Initial position of the leading individual; its path stays at least an
/// eighth of a cell away from every midpoint on 50, 75 and 100 cell meshes.
pub const LEADER_START: (f64, f64) = (37.0, 25.125);

fn base(steps: u64) -> ScenarioConfig {
    ScenarioConfig { grid: GridSpec::default(), steps, flags: Flags::default(), ..ScenarioConfig::default() }
}

fn discrete(id: &str, weight: f64, positions: Vec<(f64, f64)>, vdes: (f64, f64), sigma: f64) -> PopulationSpec {
    PopulationSpec { id: id.into(), kind: PopulationKind::Discrete { weight, positions }, vdes, sigma }
}

fn density(id: &str, block: [f64; 4], vdes: (f64, f64), sigma: f64) -> PopulationSpec {
    PopulationSpec { id: id.into(), kind: PopulationKind::Density { block, rho: CROWD_DENSITY }, vdes, sigma }
}

fn link(src: &str, dst: &str, kernel: KernelSpec) -> InteractionSpec {
    InteractionSpec { src: src.into(), dst: dst.into(), kernel }
}

/// Two unit-weight individuals walking towards each other with a strong
/// repulsive kernel; they settle at a fixed distance.
fn approach() -> ScenarioConfig {
    let k = KernelSpec::RepelOnly { strength: 1.0, r_rep: 4.0 };
    ScenarioConfig {
        populations: vec![
            discrete("left", 1.0, vec![(20.0, 25.0)], (WALKING_SPEED, 0.0), 1.0),
            discrete("right", 1.0, vec![(30.0, 25.0)], (-WALKING_SPEED, 0.0), 1.0),
        ],
        interactions: vec![link("left", "right", k), link("right", "left", k)],
        ..base(1500)
    }
}

/// A resting square crowd that relaxes towards a round shape.
fn blob() -> ScenarioConfig {
    ScenarioConfig {
        populations: vec![density("crowd", [20.0, 20.0, 30.0, 30.0], (0.0, 0.0), 1.0)],
        interactions: vec![link("crowd", "crowd", AR_KERNEL)],
        flags: Flags { allow_boundary_loss: false, entropy_audit: true },
        ..base(6000)
    }
}

/// A heavy individual walking head-on into a crowd. The crowd walks left
/// from a square centered at `(30, 25)`. The remap's exponentially small
/// tails reach the left wall within a few hundred steps, so boundary loss is
/// allowed and recorded (it stays below `1e-9` of the crowd mass up to
/// `t = 5`).
fn intrusion_with(r_rep: f64) -> ScenarioConfig {
    let cross = KernelSpec::RepelOnly { strength: 0.03, r_rep };
    ScenarioConfig {
        populations: vec![
            density("crowd", [25.0, 20.0, 35.0, 30.0], (-WALKING_SPEED, 0.0), SIGMA),
            discrete("walker", INDIVIDUAL_WEIGHT, vec![INTRUDER_START], (WALKING_SPEED, 0.0), SIGMA),
        ],
        interactions: vec![
            link("crowd", "crowd", AR_KERNEL),
            link("walker", "crowd", cross),
            link("crowd", "walker", cross),
        ],
        flags: Flags { allow_boundary_loss: true, entropy_audit: false },
        ..base(500)
    }
}

/// Two individuals heading into the crowd side by side with vertical
/// separation `gap`.
fn pair_with(gap: f64) -> ScenarioConfig {
    let mut c = intrusion_with(4.0);
    let (x, y) = INTRUDER_START;
    c.populations[1].kind = PopulationKind::Discrete {
        weight: INDIVIDUAL_WEIGHT,
        positions: vec![(x, y - gap / 2.0), (x, y + gap / 2.0)],
    };
    c.interactions.push(link("walker", "walker", AR_KERNEL));
    c
}

/// An individual crossing a resting crowd that is attracted to it.
fn leader_with(cross: KernelSpec) -> ScenarioConfig {
    ScenarioConfig {
        populations: vec![
            density("crowd", [20.0, 20.0, 30.0, 30.0], (0.0, 0.0), 1.0),
            discrete("leader", INDIVIDUAL_WEIGHT, vec![LEADER_START], (-WALKING_SPEED, 0.0), SIGMA),
        ],
        interactions: vec![link("crowd", "crowd", AR_KERNEL), link("leader", "crowd", cross)],
        ..base(1400)
    }
}

/// Looks up a built-in scenario by name.
pub fn preset(name: &str) -> Result<ScenarioConfig, ConfigError> {
    let cfg = match name {
        "approach" => approach(),
        "blob" => blob(),
        "intrusion" => intrusion_with(4.0),
        "intrusion-narrow" => intrusion_with(2.0),
        "two-close" => pair_with(1.5),
        "two-apart" => pair_with(3.2),
        "leader" => leader_with(AR_KERNEL),
        "leader-strong" => leader_with(KernelSpec::AttractRepel { strength: 0.3, r_rep: 1.5, r_att: 3.0 }),
        "leader-wide" => leader_with(KernelSpec::AttractRepel { strength: 0.03, r_rep: 1.5, r_att: 6.0 }),
        _ => return Err(ConfigError::UnknownPreset(name.to_string())),
    };
    debug_assert!(cfg.validate().is_ok());
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_presets_build() {
        for name in PRESET_NAMES {
            let c = preset(name).unwrap();
            c.validate().unwrap();
            c.build_state().unwrap();
            assert_eq!(c.dt, 0.01);
        }
        assert!(matches!(preset("stampede"), Err(ConfigError::UnknownPreset(_))));
    }

    #[test]
    fn reference_values() {
        assert_eq!(preset("approach").unwrap().dt, 0.01);
        assert_eq!(preset("blob").unwrap().interactions[0].kernel, AR_KERNEL);
        let c = preset("intrusion").unwrap();
        match c.populations[0].kind {
            PopulationKind::Density { block, rho } => {
                assert_eq!(rho, 2.0);
                assert_eq!(block[2] - block[0], 10.0);
                assert_eq!(block[3] - block[1], 10.0);
                assert_eq!(((block[0] + block[2]) / 2.0, (block[1] + block[3]) / 2.0), (30.0, 25.0));
            }
            _ => panic!("crowd must be a density"),
        }
    }

    #[test]
    fn roundtrip_through_text() {
        for name in PRESET_NAMES {
            let c = preset(name).unwrap();
            assert_eq!(ScenarioConfig::parse(&c.to_config_string()).unwrap(), c, "{name}");
        }
    }
}
