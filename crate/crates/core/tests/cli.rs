//! End-to-end checks of the `gatewave` binary: exit codes and artifacts.

use std::path::Path;
use std::process::{Command, Output};

fn gatewave(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gatewave"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env("GATEWAVE_WORKERS", "2")
        .output()
        .expect("spawn gatewave")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn text(o: &Output) -> String {
    format!("{}{}", String::from_utf8_lossy(&o.stdout), String::from_utf8_lossy(&o.stderr))
}

#[test]
fn list_presets_names_every_preset() {
    let dir = tempfile::tempdir().unwrap();
    let o = gatewave(&["list-presets"], dir.path());
    assert_eq!(code(&o), 0);
    let s = text(&o);
    for name in ["fig3", "fig5", "fig7", "fig8", "fig10_hardswitch_20mhz"] {
        assert!(s.contains(name), "{s}");
    }
}

#[test]
fn unknown_preset_is_a_usage_error_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = gatewave(&["run", "fig99"], &out);
    assert_eq!(code(&o), 2, "{}", text(&o));
    assert!(!out.exists());
}

#[test]
fn overlapping_duties_fail_validation() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("overlap.cfg");
    std::fs::write(&file, "include = prototype_a.cfg\npwm.duty_high = 0.3\npwm.duty_low = 0.3\n").unwrap();
    let o = gatewave(&["validate", file.to_str().unwrap()], dir.path());
    assert_eq!(code(&o), 2);
    assert!(text(&o).contains("overlap"), "{}", text(&o));
}

#[test]
fn validate_accepts_a_preset() {
    let dir = tempfile::tempdir().unwrap();
    let o = gatewave(&["validate", "fig10"], dir.path());
    assert_eq!(code(&o), 0, "{}", text(&o));
}

#[test]
fn preset_run_writes_artifacts_and_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = gatewave(&["run", "fig8"], dir.path());
    assert_eq!(code(&o), 0, "{}", text(&o));
    let run = dir.path().join("fig8");
    for f in ["stats.csv", "summary", "plot_v_out.svg", "trace_prototype_a.csv", "trace_prototype_b.csv"] {
        assert!(run.join(f).is_file(), "missing {f}");
    }
    let summary = std::fs::read_to_string(run.join("summary")).unwrap();
    assert!(summary.contains("PASS overshoot_order"), "{summary}");
    assert!(summary.ends_with("result: PASS\n"));
}

#[test]
fn failed_bound_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("strict.cfg");
    std::fs::write(
        &file,
        "include = prototype_a.cfg\ntopology = driver_lo\npwm.frequency_hz = 5e6\n\
         bound.impossible = v_iso_lo.v_max@run >= 100\nbound.easy = v_iso_lo.v_max@run > 0\n",
    )
    .unwrap();
    let o = gatewave(&["run", file.to_str().unwrap()], dir.path());
    assert_eq!(code(&o), 1, "{}", text(&o));
    let summary = std::fs::read_to_string(dir.path().join("strict/summary")).unwrap();
    assert!(summary.contains("FAIL impossible"));
    assert!(summary.contains("PASS easy"));
}

#[test]
fn sweep_writes_one_row_set_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let o = gatewave(
        &["sweep", "fig3", "--param", "pwm.frequency_hz", "--values", "2e6:8e6:3"],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", text(&o));
    let stats = std::fs::read_to_string(dir.path().join("fig3_sweep/stats.csv")).unwrap();
    for v in ["2000000", "5000000", "8000000"] {
        assert!(dir.path().join(format!("fig3_sweep/trace_pwm.frequency_hz_{v}.csv")).is_file(), "{v}");
    }
    assert!(stats.lines().count() > 3);
}

#[test]
fn sweep_of_unknown_parameter_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = gatewave(&["sweep", "fig3", "--param", "pwm.nope", "--values", "1,2"], dir.path());
    assert_eq!(code(&o), 2, "{}", text(&o));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(code(&gatewave(&["run", "fig3"], a.path())), 0);
    assert_eq!(code(&gatewave(&["run", "fig3", "--workers", "1"], b.path())), 0);
    for f in ["stats.csv", "summary", "plot_v_iso_lo.v_max.svg", "trace_pwm.frequency_hz_20000000.csv"] {
        let x = std::fs::read(a.path().join("fig3").join(f)).unwrap();
        let y = std::fs::read(b.path().join("fig3").join(f)).unwrap();
        assert!(x == y, "{f} differs");
    }
}
