//! Sweep and preset behavior through the library API.

use gatewave::harness::config::ConfigDoc;
use gatewave::harness::presets::{self, PRESETS};
use gatewave::harness::sweep;
use gatewave::metrics::stats_csv;
use gatewave::harness::experiment::stats_rows;

fn doc(file: &str) -> ConfigDoc {
    ConfigDoc::from_catalog(file, presets::catalog_file(file).unwrap()).unwrap()
}

#[test]
fn sweep_rows_do_not_depend_on_value_order() {
    let d = doc("fig3.cfg");
    let values = [1e6, 4e6, 12e6, 25e6];
    let reversed: Vec<f64> = values.iter().rev().copied().collect();
    let forward = sweep(&d, "pwm.frequency_hz", &values, 3).unwrap();
    let backward = sweep(&d, "pwm.frequency_hz", &reversed, 2).unwrap();
    let mut rows_b = backward.rows.clone();
    rows_b.sort_by(|a, b| a.point.value.unwrap().total_cmp(&b.point.value.unwrap()));
    assert_eq!(stats_csv(&stats_rows(&forward.rows)), stats_csv(&stats_rows(&rows_b)));
    assert_eq!(forward.rows.len(), values.len());
}

#[test]
fn every_declared_bound_is_reported() {
    for (name, file) in PRESETS {
        let dir = tempfile::tempdir().unwrap();
        let report = gatewave::harness::run_preset(name, dir.path(), 2).unwrap();
        let declared = presets::catalog_file(file)
            .unwrap()
            .lines()
            .filter(|l| l.trim_start().starts_with("bound."))
            .count();
        let reported = report
            .summary
            .lines()
            .filter(|l| l.starts_with("PASS ") || l.starts_with("FAIL "))
            .count();
        assert!(declared > 0, "{name} declares no bounds");
        assert_eq!(declared, reported, "{name}");
    }
}
