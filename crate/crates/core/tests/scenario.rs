use std::fs;
use std::path::Path;

use proptest::prelude::*;
use twoscale::scenario::output::{parse_frame, frame_name, DIAGNOSTICS_HEADER, PARTICLES_HEADER};
use twoscale::scenario::{audit_dir, preset, run, RunError, RunOptions, ScenarioConfig};
use twoscale::SimError;

const SMALL: &str = "
[grid]
L = 30
W = 30
nx = 30
ny = 30

[time]
dt = 0.01
steps = 45
frame_stride = 10

[population \"crowd\"]
kind = density
block = 10,11,16,17
rho = 2
vdes = 1.34,0

[population \"walker\"]
kind = discrete
weight = 5
positions = 21.3,13.25; 21.3,14.75
vdes = -1.34,0

[interaction]
src = crowd
dst = crowd
kind = ar
F = 0.03
Rr = 1.5
Ra = 3

[interaction]
src = walker
dst = crowd
kind = r
F = 0.03
Rr = 2

[interaction]
src = crowd
dst = walker
kind = r
F = 0.03
Rr = 2
";

fn lines(path: &Path) -> Vec<String> {
    fs::read_to_string(path).unwrap().lines().map(str::to_owned).collect()
}

#[test]
fn run_writes_expected_files_and_audits_clean() {
    let cfg = ScenarioConfig::parse(SMALL).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let summary = run(&cfg, out, &RunOptions { pgm: true, ..Default::default() }).unwrap();
    assert_eq!(summary.steps, 45);
    assert_eq!(summary.final_state.step_index(), 45);

    for step in [0, 10, 20, 30, 40] {
        let txt = out.join(frame_name("crowd", step, "txt"));
        let frame = parse_frame(&fs::read_to_string(&txt).unwrap()).unwrap();
        assert_eq!((frame.nx, frame.ny, frame.pop.as_str()), (30, 30, "crowd"));
        assert!((frame.t - step as f64 * 0.01).abs() < 1e-12);
        let pgm = fs::read(out.join(frame_name("crowd", step, "pgm"))).unwrap();
        assert!(pgm.starts_with(b"P5"));
    }
    assert!(!out.join(frame_name("crowd", 50, "txt")).exists());
    assert!(!out.join(frame_name("walker", 0, "txt")).exists());

    let diag = lines(&out.join("diagnostics.csv"));
    assert_eq!(diag[0], DIAGNOSTICS_HEADER);
    assert_eq!(diag.len(), 1 + 46 * 2);
    let parts = lines(&out.join("particles.csv"));
    assert_eq!(parts[0], PARTICLES_HEADER);
    assert_eq!(parts.len(), 1 + 5 * 2);

    let reread = ScenarioConfig::load(out.join("config.ini")).unwrap();
    assert_eq!(reread, cfg);

    let report = audit_dir(out).unwrap();
    assert!(report.passed(), "{report}");
}

#[test]
fn audit_detects_tampered_diagnostics() {
    let cfg = ScenarioConfig::parse(SMALL).unwrap();
    let dir = tempfile::tempdir().unwrap();
    run(&cfg, dir.path(), &RunOptions::default()).unwrap();
    let path = dir.path().join("diagnostics.csv");
    let text = fs::read_to_string(&path).unwrap();
    let mut rows: Vec<String> = text.lines().map(str::to_owned).collect();
    let target = rows.iter().position(|r| r.starts_with("20,") && r.contains(",crowd,")).unwrap();
    let mut cols: Vec<String> = rows[target].split(',').map(str::to_owned).collect();
    let m: f64 = cols[3].parse().unwrap();
    cols[3] = (m * 1.01).to_string();
    rows[target] = cols.join(",");
    fs::write(&path, rows.join("\n") + "\n").unwrap();
    assert!(!audit_dir(dir.path()).unwrap().passed());
}

#[test]
fn strict_boundary_loss_aborts_and_keeps_partial_output() {
    let text = SMALL.replace("block = 10,11,16,17", "block = 0.5,6,4,12").replace("vdes = 1.34,0", "vdes = -3,0");
    let cfg = ScenarioConfig::parse(&text).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let err = run(&cfg, dir.path(), &RunOptions::default()).unwrap_err();
    assert!(matches!(err, RunError::Sim(SimError::DensityLeftDomain { .. })), "{err}");
    assert!(lines(&dir.path().join("diagnostics.csv")).len() > 1);

    let mut lenient = cfg.clone();
    lenient.flags.allow_boundary_loss = true;
    let dir = tempfile::tempdir().unwrap();
    run(&lenient, dir.path(), &RunOptions::default()).unwrap();
    let report = audit_dir(dir.path()).unwrap();
    assert!(report.passed(), "{report}");
}

#[test]
fn entropy_audit_is_written_for_gradient_flow_presets() {
    let mut cfg = preset("blob").unwrap();
    cfg.steps = 30;
    cfg.frame_stride = 10;
    let dir = tempfile::tempdir().unwrap();
    let summary = run(&cfg, dir.path(), &RunOptions::default()).unwrap();
    let audit = summary.audit.expect("audit requested");
    assert!(audit.consistent());
    let text = fs::read_to_string(dir.path().join("entropy_audit.txt")).unwrap();
    assert!(text.contains("worst_increment") && text.contains("consistent"));
    let report = audit_dir(dir.path()).unwrap();
    assert!(report.passed(), "{report}");
    assert!(report.worst_entropy_increment.is_some());
}

#[test]
fn run_is_deterministic_across_thread_counts() {
    let cfg = ScenarioConfig::parse(SMALL).unwrap();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run(&cfg, a.path(), &RunOptions { threads: Some(1), ..Default::default() }).unwrap();
    run(&cfg, b.path(), &RunOptions { threads: Some(3), ..Default::default() }).unwrap();
    for name in ["diagnostics.csv", "particles.csv", &frame_name("crowd", 40, "txt")] {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap(), "{name}");
    }
}

#[test]
fn parse_errors_carry_line_numbers() {
    let bad = SMALL.replace("rho = 2", "rho = 2\ncolour = red");
    let line = bad.lines().position(|l| l.starts_with("colour")).unwrap() + 1;
    let err = ScenarioConfig::parse(&bad).unwrap_err().to_string();
    assert!(err.contains("colour") && err.contains(&format!("line {line}")), "{err}");
    assert!(ScenarioConfig::parse(&SMALL.replace("src = walker", "src = ghost")).is_err());
    assert!(ScenarioConfig::parse(&SMALL.replace("Ra = 3", "Ra = 1")).is_err());
    assert!(ScenarioConfig::parse(&SMALL.replace("21.3,13.25", "35,13.25")).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn config_text_round_trips(
        rho in 0.0..5.0f64,
        x0 in 0.0..8.0f64,
        w in 0.5..8.0f64,
        weight in 0.1..100.0f64,
        px in 0.01..29.99f64,
        py in 0.01..29.99f64,
        sigma in 0.0..=1.0f64,
        f in 0.001..1.0f64,
        rr in 0.1..5.0f64,
        dt in 1e-4..0.1f64,
        steps in 0u64..10_000,
    ) {
        let mut cfg = ScenarioConfig::parse(SMALL).unwrap();
        cfg.dt = dt;
        cfg.steps = steps;
        let text = SMALL
            .replace("block = 10,11,16,17", &format!("block = {x0},6,{},12", x0 + w))
            .replace("rho = 2", &format!("rho = {rho}\nsigma = {sigma}"))
            .replace("weight = 5", &format!("weight = {weight}"))
            .replace("21.3,13.25", &format!("{px},{py}"))
            .replace("F = 0.03\nRr = 2\n", &format!("F = {f}\nRr = {rr}\n"));
        let parsed = ScenarioConfig::parse(&text).unwrap();
        let again = ScenarioConfig::parse(&parsed.to_config_string()).unwrap();
        prop_assert_eq!(&again, &parsed);
        let again = ScenarioConfig::parse(&cfg.to_config_string()).unwrap();
        prop_assert_eq!(again, cfg);
    }
}
