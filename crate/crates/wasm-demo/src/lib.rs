//! Browser bindings for three gatewave runs. Each call builds a scenario from
//! the shipped presets, runs it to periodic steady state and returns JSON.

use gatewave::chain::{supply_from_trace, ChainSystem, Scenario, Topology};
use gatewave::harness::config::{apply_numeric, ConfigDoc};
use gatewave::harness::presets;
use gatewave::load::switching_times;
use gatewave::metrics::waveform_stats;
use gatewave::signal::Side;
use gatewave::solver::Trace;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

/// Samples kept per waveform sent to the page.
const MAX_POINTS: usize = 600;

fn preset(file: &str) -> Result<Scenario, String> {
    let text = presets::catalog_file(file).ok_or_else(|| format!("missing preset {file}"))?;
    ConfigDoc::from_catalog(file, text)
        .and_then(|d| d.scenario())
        .map_err(|e| e.to_string())
}

fn set(sc: Scenario, assignments: &[(&str, f64)]) -> Result<Scenario, String> {
    assignments
        .iter()
        .try_fold(sc, |sc, (k, v)| apply_numeric(&sc, k, *v))
        .map_err(|e| e.to_string())
}

fn driver(rail_v: f64, frequency_hz: f64) -> Result<Scenario, String> {
    let mut sc = set(
        preset("prototype_a.cfg")?,
        &[("rails.v_dsil", rail_v), ("pwm.frequency_hz", frequency_hz)],
    )?;
    sc.topology = Topology::DriverSide(Side::Low);
    Ok(sc)
}

/// Evenly thinned copy of the named nodes, time in ns from the trace start.
fn waveforms(trace: &Trace, nodes: &[&str]) -> Result<Value, String> {
    let n = trace.times.len();
    let stride = n.div_ceil(MAX_POINTS).max(1);
    let idx: Vec<usize> = (0..n).step_by(stride).chain(std::iter::once(n - 1)).collect();
    let t0 = trace.times[0];
    let mut out = serde_json::Map::new();
    out.insert(
        "t_ns".into(),
        json!(idx.iter().map(|&i| (trace.times[i] - t0) * 1e9).collect::<Vec<_>>()),
    );
    for node in nodes {
        let v = trace.node(node).map_err(|e| e.to_string())?;
        out.insert((*node).into(), json!(idx.iter().map(|&i| v[i]).collect::<Vec<_>>()));
    }
    Ok(Value::Object(out))
}

/// Isolator and totem-pole output of the low-side driver.
pub fn driver_waveform_json(rail_v: f64, frequency_hz: f64) -> Result<String, String> {
    let sc = driver(rail_v, frequency_hz)?;
    let pss = ChainSystem::new(&sc)
        .and_then(|s| s.pss())
        .map_err(|e| e.to_string())?;
    let iso = waveform_stats(&pss.trace, "v_iso_lo", rail_v).map_err(|e| e.to_string())?;
    let gate = waveform_stats(&pss.trace, "v_gate_gan_lo", rail_v).map_err(|e| e.to_string())?;
    Ok(json!({
        "periods": pss.periods,
        "iso_max": iso.v_max,
        "iso_min": iso.v_min,
        "gate_max": gate.v_max,
        "gate_min": gate.v_min,
        "waveforms": waveforms(&pss.trace, &["v_iso_lo", "v_gate_gan_lo"])?,
    })
    .to_string())
}

/// Average supply current of one driver side and the thermal verdict.
pub fn supply_current_json(rail_v: f64, frequency_hz: f64) -> Result<String, String> {
    let sc = driver(rail_v, frequency_hz)?;
    let pss = ChainSystem::new(&sc)
        .and_then(|s| s.pss())
        .map_err(|e| e.to_string())?;
    let s = supply_from_trace(&sc, Side::Low, &pss.trace, pss.periods).map_err(|e| e.to_string())?;
    Ok(json!({
        "avg_current_a": s.avg_current_a,
        "isolator_current_a": s.isolator.avg_rail_current_a,
        "totem_current_a": s.totem.avg_rail_current_a,
        "penetration_charge_c": s.totem.penetration_charge_c,
        "junction_temp_c": s.junction_temp_c,
        "runaway": s.runaway,
    })
    .to_string())
}

/// SiC gate and drain waveforms of the hard-switching test.
pub fn hard_switch_json(frequency_hz: f64, duty: f64) -> Result<String, String> {
    let sc = set(
        preset("fig10_hardswitch_20mhz.cfg")?,
        &[
            ("pwm.frequency_hz", frequency_hz),
            ("pwm.duty_high", duty),
            ("pwm.duty_low", duty),
        ],
    )?;
    let pss = ChainSystem::new(&sc)
        .and_then(|s| s.pss())
        .map_err(|e| e.to_string())?;
    let gs = waveform_stats(&pss.trace, "v_gs_sic", 18.0).map_err(|e| e.to_string())?;
    let ds = waveform_stats(&pss.trace, "v_ds_sic", 50.0).map_err(|e| e.to_string())?;
    let (t_on, t_off) = switching_times(&pss.trace).map_err(|e| e.to_string())?;
    Ok(json!({
        "periods": pss.periods,
        "v_gs_max": gs.v_max,
        "v_ds_min": ds.v_min,
        "v_ds_max": ds.v_max,
        "t_on_s": t_on,
        "t_off_s": t_off,
        "waveforms": waveforms(&pss.trace, &["v_gs_sic", "v_ds_sic"])?,
    })
    .to_string())
}

#[wasm_bindgen]
pub fn driver_waveform(rail_v: f64, frequency_hz: f64) -> Result<String, JsValue> {
    driver_waveform_json(rail_v, frequency_hz).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn supply_current(rail_v: f64, frequency_hz: f64) -> Result<String, JsValue> {
    supply_current_json(rail_v, frequency_hz).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn hard_switch(frequency_hz: f64, duty: f64) -> Result<String, JsValue> {
    hard_switch_json(frequency_hz, duty).map_err(|e| JsValue::from_str(&e))
}
