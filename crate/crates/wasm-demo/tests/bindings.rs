use gatewave_wasm::{driver_waveform_json, hard_switch_json, supply_current_json};
use serde_json::Value;

fn parse(s: &str) -> Value {
    serde_json::from_str(s).expect("valid json")
}

#[test]
fn driver_waveform_has_matching_columns() {
    let v = parse(&driver_waveform_json(3.5, 5e6).unwrap());
    let w = &v["waveforms"];
    let n = w["t_ns"].as_array().unwrap().len();
    assert!(n > 10 && n <= 602);
    assert_eq!(w["v_iso_lo"].as_array().unwrap().len(), n);
    assert!(v["iso_max"].as_f64().unwrap() > v["iso_min"].as_f64().unwrap());
}

#[test]
fn supply_current_grows_with_frequency() {
    let lo = parse(&supply_current_json(4.5, 1e6).unwrap());
    let hi = parse(&supply_current_json(4.5, 10e6).unwrap());
    assert!(hi["avg_current_a"].as_f64().unwrap() > lo["avg_current_a"].as_f64().unwrap());
    assert!(hi["runaway"].is_boolean());
}

#[test]
fn hard_switch_reports_edges() {
    let v = parse(&hard_switch_json(20e6, 0.55).unwrap());
    assert!(v["t_on_s"].as_f64().unwrap() > 0.0);
    assert!(v["v_ds_max"].as_f64().unwrap() > v["v_ds_min"].as_f64().unwrap());
}

#[test]
fn invalid_input_is_an_error_message() {
    let err = hard_switch_json(20e6, 0.3).unwrap_err();
    assert!(err.contains("overlap"), "{err}");
    assert!(driver_waveform_json(9.0, 1e6).is_err());
}
