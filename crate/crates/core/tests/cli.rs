use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn polmod(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_polmod"))
        .args(args)
        .current_dir(cwd)
        .env_remove("POLMOD_THREADS")
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn entries(dir: &Path) -> usize {
    fs::read_dir(dir).unwrap().count()
}

#[test]
fn help_and_defaults_do_not_touch_filesystem() {
    let dir = tempfile::tempdir().unwrap();
    let o = polmod(&["--help"], dir.path());
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("fig12-skr"));
    let o = polmod(&["--print-defaults"], dir.path());
    assert!(o.status.success());
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["baseline_per_db"], 30.0);
    assert_eq!(v["detector"]["dark_count_prob"], 1e-9);
    let o = polmod(&["fig10-duty", "--print-defaults"], dir.path());
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["preset"], "fig10-duty");
    assert_eq!(entries(dir.path()), 0);
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = polmod(&["fig99"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unknown preset"));
    assert_eq!(polmod(&[], dir.path()).status.code(), Some(2));
    assert_eq!(
        polmod(&["fig4-vpi", "--bogus"], dir.path()).status.code(),
        Some(2)
    );
    // `run` without a config naming a preset
    assert_eq!(polmod(&["run"], dir.path()).status.code(), Some(2));
    assert_eq!(entries(dir.path()), 0);
}

#[test]
fn validation_errors_exit_2_and_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"pulse": {"fwhm_t0": -2e-12}}"#).unwrap();
    let o = polmod(
        &["fig10-duty", "--config", cfg.to_str().unwrap()],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("pulse.fwhm_t0"), "{}", stderr(&o));

    fs::write(&cfg, "{\n  \"preset\": \"fig4-vpi\",\n}").unwrap();
    let o = polmod(&["run", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));

    fs::write(&cfg, r#"{"preset": "fig4-vpi"}"#).unwrap();
    let o = polmod(
        &["fig10-duty", "--config", cfg.to_str().unwrap()],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let o = polmod(&["fig4-vpi", "--config", "missing.json"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let o = polmod(&["golden-iqber", "--out", "file/sub"], dir.path());
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}

#[test]
fn bad_thread_count_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_polmod"))
        .args(["golden-iqber", "--out", "o"])
        .current_dir(dir.path())
        .env("POLMOD_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    let o = Command::new(env!("CARGO_BIN_EXE_polmod"))
        .args(["golden-iqber", "--out", "o"])
        .current_dir(dir.path())
        .env("POLMOD_THREADS", "2")
        .output()
        .unwrap();
    assert!(o.status.success());
}

#[test]
fn run_uses_config_preset_and_output_dir() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("c.json"),
        r#"{"preset": "fig12-skr", "table1_literal": true, "rep_rates_hz": [1e9],
            "distance_grid_km": [0, 50, 100], "output": {"dir": "res"}}"#,
    )
    .unwrap();
    let o = polmod(&["run", "--config", "c.json", "--seedless"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("res/fig12-skr-1GHz.csv")).unwrap();
    let side: Value = serde_json::from_str(
        &fs::read_to_string(dir.path().join("res/fig12-skr-1GHz.json")).unwrap(),
    )
    .unwrap();
    let mut lines = csv.lines();
    let first = lines.next().unwrap();
    assert!(first.starts_with("# polmod "));
    assert_eq!(
        lines.next().unwrap(),
        "distance_km,transmittance,q_s,e_s,q_d,e_d_obs,y1_lower,e1_upper,skr_bps"
    );
    assert_eq!(lines.count(), 3);
    assert_eq!(
        first.split("config_hash=").nth(1).unwrap(),
        side["config_hash"].as_str().unwrap()
    );
    assert_eq!(side["metadata"]["protocol"]["u_v"], 0.35);
    assert_eq!(side["config"]["preset"], "fig12-skr");
}

#[test]
fn minimal_config_runs() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.json"), r#"{"preset": "golden-iqber"}"#).unwrap();
    let o = polmod(
        &["golden-iqber", "--config", "c.json", "--out", "o"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("o/golden-iqber.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2 + 5);
    assert!(csv.lines().skip(2).all(|l| l.ends_with(",1")));
}

#[test]
fn output_location_does_not_change_content() {
    let dir = tempfile::tempdir().unwrap();
    for out in ["x", "y"] {
        assert!(polmod(&["fig4-vpi", "--out", out], dir.path())
            .status
            .success());
    }
    for f in ["fig4-vpi.csv", "fig4-vpi.json"] {
        assert_eq!(
            fs::read(dir.path().join("x").join(f)).unwrap(),
            fs::read(dir.path().join("y").join(f)).unwrap()
        );
    }
}

#[test]
fn measured_points_drive_the_vpi_fit() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("m.csv"),
        "frequency_hz,v_pi_forward_v,v_pi_reverse_v\n1.1e9,4.3,8.6\n",
    )
    .unwrap();
    fs::write(
        dir.path().join("c.json"),
        r#"{"vpi_measurements": "m.csv", "frequency_grid": [0, 1.1e9]}"#,
    )
    .unwrap();
    let o = polmod(
        &["fig4-vpi", "--config", "c.json", "--out", "o"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let side: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("o/fig4-vpi.json")).unwrap())
            .unwrap();
    assert_eq!(
        side["metadata"]["tau"]["tau_d_source"],
        "least-squares fit (relative residuals)"
    );
    let csv = fs::read_to_string(dir.path().join("o/fig4-vpi.csv")).unwrap();
    let last: Vec<f64> = csv
        .lines()
        .last()
        .unwrap()
        .split(',')
        .map(|x| x.parse().unwrap())
        .collect();
    assert!((last[2] / last[1] - 2.0).abs() < 1e-9);
}

#[test]
fn forward_overrides_scale_both_columns() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("c.json"),
        r#"{"frequency_grid": [0, 1e9, 2e9],
            "v_pi_f_overrides": [{"frequency_hz": 0, "v_pi_f_v": 4}, {"frequency_hz": 2e9, "v_pi_f_v": 6}]}"#,
    )
    .unwrap();
    let o = polmod(
        &["fig4-vpi", "--config", "c.json", "--out", "o"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("o/fig4-vpi.csv")).unwrap();
    let rows: Vec<Vec<f64>> = csv
        .lines()
        .skip(2)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(
        rows.iter().map(|r| r[1]).collect::<Vec<_>>(),
        vec![4.0, 5.0, 6.0]
    );
    assert_eq!(rows[0][2], 4.0);
    assert!(rows[2][2] > 6.0);
}
