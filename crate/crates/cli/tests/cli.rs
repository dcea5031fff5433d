//! End-to-end tests of the command-line interface: exit codes, file
//! formats, and the determinism contract.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn spinorbit(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spinorbit"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, mode: &str, visibility: f64, extra: &str) -> std::path::PathBuf {
    let path = dir.join("run.toml");
    let text = format!(
        r#"
mode = "{mode}"
seed = 11
pair_rate = 2000.0
exposure = 1.0
visibility = {visibility}
schmidt = [1.0, 0.5, 0.3333]

[angles]
theta_deg = [0.0, 45.0, 90.0, 135.0]
chi_grid = {{ start_deg = 0.0, step_deg = 5.625, count = 16 }}
{extra}
"#
    );
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn simulate_emits_one_row_per_setting() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "single-photon", 0.9, "");
    let output = spinorbit(
        &["simulate", "--config", "run.toml", "--out", "out"],
        dir.path(),
    );
    assert!(output.status.success(), "{output:?}");
    let csv = fs::read_to_string(dir.path().join("out/counts.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "theta_rad,chi_rad,counts,exposure_s");
    assert_eq!(lines.count(), 64); // 4 theta x 16 chi
    assert!(dir.path().join("out/run_manifest.json").exists());
    // the example schmidt coefficients are off-normalized by more than 1e-6
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("renormalized"), "stderr: {stderr}");
}

#[test]
fn classical_mode_allows_fractional_counts() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "classical", 1.0, "");
    let output = spinorbit(
        &["simulate", "--config", "run.toml", "--out", "out"],
        dir.path(),
    );
    assert!(output.status.success());
    let csv = fs::read_to_string(dir.path().join("out/counts.csv")).unwrap();
    let fractional = csv.lines().skip(1).any(|line| {
        let counts: f64 = line.split(',').nth(2).unwrap().parse().unwrap();
        counts.fract() != 0.0
    });
    assert!(fractional, "expected expected-value rows:\n{csv}");
}

#[test]
fn unknown_config_key_exits_2_and_names_it() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "single-photon", 0.9, "mystery_knob = 3.0\n");
    let output = spinorbit(
        &["simulate", "--config", "run.toml", "--out", "out"],
        dir.path(),
    );
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("mystery_knob"), "stderr: {stderr}");
}

#[test]
fn invalid_visibility_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "single-photon", 1.5, "");
    let output = spinorbit(
        &["simulate", "--config", "run.toml", "--out", "out"],
        dir.path(),
    );
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn chsh_on_empty_file_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("empty.csv"), "").unwrap();
    let output = spinorbit(
        &["chsh", "--counts", "empty.csv", "--out", "out"],
        dir.path(),
    );
    assert_eq!(output.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("empty"), "stderr: {stderr}");
}

#[test]
fn chsh_finds_ideal_peak() {
    let dir = tempfile::tempdir().unwrap();
    // classical mode with V = 1 emits exact expected values
    write_config(
        dir.path(),
        "classical",
        1.0,
        "",
    );
    let sim = spinorbit(
        &["simulate", "--config", "run.toml", "--out", "out"],
        dir.path(),
    );
    assert!(sim.status.success());
    let chsh = spinorbit(
        &["chsh", "--counts", "out/counts.csv", "--out", "out"],
        dir.path(),
    );
    assert!(chsh.status.success(), "{chsh:?}");
    let report = fs::read_to_string(dir.path().join("out/chsh_scan.csv")).unwrap();
    let pi_16 = std::f64::consts::PI / 16.0;
    let peak_line = report
        .lines()
        .skip(1)
        .find(|l| {
            let chi: f64 = l.split(',').next().unwrap().parse().unwrap();
            (chi - pi_16).abs() < 1e-9
        })
        .expect("pi/16 row present");
    let s: f64 = peak_line.split(',').nth(1).unwrap().parse().unwrap();
    assert!((s - 2.0 * 2.0_f64.sqrt()).abs() < 1e-9, "S = {s}");
}

#[test]
fn fringes_reports_visibility() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "classical", 0.9, "");
    spinorbit(
        &["simulate", "--config", "run.toml", "--out", "out"],
        dir.path(),
    );
    let fringes = spinorbit(
        &[
            "fringes",
            "--counts",
            "out/counts.csv",
            "--out",
            "out",
            "--format",
            "json",
        ],
        dir.path(),
    );
    assert!(fringes.status.success(), "{fringes:?}");
    let report = fs::read_to_string(dir.path().join("out/fringe_fits.json")).unwrap();
    let rows: serde_json::Value = serde_json::from_str(&report).unwrap();
    let visibility = rows[0]["visibility"].as_f64().unwrap();
    assert!((visibility - 0.9).abs() < 1e-9, "visibility = {visibility}");
}

#[test]
fn render_writes_maps_and_respects_format() {
    let dir = tempfile::tempdir().unwrap();
    let render_section = r#"
[render]
width = 64
height = 64
input = { spin = "h", oam = 0 }

[[render.stages]]
type = "qplate"
q = 1
"#;
    write_config(dir.path(), "single-photon", 0.9, render_section);
    let output = spinorbit(
        &[
            "render",
            "--config",
            "run.toml",
            "--out",
            "maps",
            "--maps-format",
            "csv",
        ],
        dir.path(),
    );
    assert!(output.status.success(), "{output:?}");
    let names: Vec<String> = fs::read_dir(dir.path().join("maps"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    assert_eq!(names.iter().filter(|n| n.ends_with(".csv")).count(), 5);
    assert_eq!(names.iter().filter(|n| n.ends_with(".png")).count(), 0);
}

#[test]
fn annihilating_pipeline_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let render_section = r#"
[render]
width = 64
height = 64
input = { spin = "h", oam = 0 }

[[render.stages]]
type = "polarizer"
angle_deg = 0.0

[[render.stages]]
type = "polarizer"
angle_deg = 90.0
"#;
    write_config(dir.path(), "single-photon", 0.9, render_section);
    let output = spinorbit(
        &["render", "--config", "run.toml", "--out", "maps"],
        dir.path(),
    );
    assert_eq!(output.status.code(), Some(4));
}

#[test]
fn simulate_is_deterministic_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "single-photon", 0.9, "");
    for out in ["a", "b"] {
        let output = spinorbit(
            &["simulate", "--config", "run.toml", "--out", out, "--seed", "99"],
            dir.path(),
        );
        assert!(output.status.success());
    }
    let a = fs::read(dir.path().join("a/counts.csv")).unwrap();
    let b = fs::read(dir.path().join("b/counts.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn seed_flag_changes_counts() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "single-photon", 0.9, "");
    for (out, seed) in [("a", "1"), ("b", "2")] {
        spinorbit(
            &["simulate", "--config", "run.toml", "--out", out, "--seed", seed],
            dir.path(),
        );
    }
    let a = fs::read(dir.path().join("a/counts.csv")).unwrap();
    let b = fs::read(dir.path().join("b/counts.csv")).unwrap();
    assert_ne!(a, b);
}
