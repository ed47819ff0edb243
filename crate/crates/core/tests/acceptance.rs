//! Acceptance gate. Each test checks one criterion against the shipped
//! defaults and prints a single `criterion N: PASS|FAIL ...` line.
//!
//! Run with `cargo test -p gatewave --test acceptance -- --nocapture`.

mod common;

use std::time::{Duration, Instant};

use common::{driver, rk4, state_error};
use gatewave::harness::experiment::PointResult;
use gatewave::harness::{run_preset, RunReport};
use gatewave::signal::Side;
use gatewave::solver::{integrate, OdeSystem, SolverOptions};
use gatewave::stages::{edge_traversal_time, ramp_penetration_charge, GanPushPullModel};
use gatewave::{ChainSystem, Result};

fn verdict(n: u32, pass: bool, detail: &str) {
    println!("criterion {n}: {} {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {n}: {detail}");
}

fn run(preset: &str, workers: usize) -> (RunReport, Duration) {
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let report = run_preset(preset, dir.path(), workers).unwrap();
    (report, start.elapsed())
}

/// Bytes of `stats.csv` as written to disk by one run.
fn stats_file(preset: &str, workers: usize) -> Vec<u8> {
    let dir = tempfile::tempdir().unwrap();
    let report = run_preset(preset, dir.path(), workers).unwrap();
    std::fs::read(report.dir.join("stats.csv")).unwrap()
}

fn metric(report: &RunReport, point: &str, name: &str) -> f64 {
    let r = report
        .results
        .iter()
        .find(|r| r.point.matches(point))
        .unwrap_or_else(|| panic!("no point {point}"));
    let d = r.outcome.as_ref().unwrap_or_else(|e| panic!("{point}: {e}"));
    *d.metrics.get(name).unwrap_or_else(|| panic!("{point}: no metric {name}"))
}

fn value(r: &PointResult, name: &str) -> f64 {
    r.outcome.as_ref().expect("point solved").metrics[name]
}

/// `x' = (v - x) / tau`.
struct Rc {
    v: f64,
    tau: f64,
}

impl OdeSystem for Rc {
    fn dim(&self) -> usize {
        1
    }
    fn rhs(&self, _t: f64, _m: f64, x: &[f64], dx: &mut [f64]) -> Result<()> {
        dx[0] = (self.v - x[0]) / self.tau;
        Ok(())
    }
}

#[test]
fn criterion_1_solver_order() {
    let start = Instant::now();
    let sc = driver(&[("pwm.frequency_hz", 20e6)]);
    let sys = ChainSystem::new(&sc).unwrap();
    let x0 = sys.dc_state(0.0);
    let t1 = sc.period();
    let reference = rk4(&sys, &x0, 0.0, t1, 1e-12, usize::MAX);
    let err = |h: f64| {
        let opts = SolverOptions {
            rel_tol: 1e6,
            abs_tol_v: 1e6,
            dt_max_s: h,
            newton_tol: 1e-13,
            ..SolverOptions::default()
        };
        let run = integrate(&sys, Some(&x0), 0.0, t1, &opts).unwrap();
        state_error(&run.final_state, &reference.state)
    };
    let ratio = err(0.1e-9) / err(0.05e-9);

    let rc = Rc { v: 3.3, tau: 10e-9 };
    let opts = SolverOptions {
        rel_tol: 1e-9,
        abs_tol_v: 1e-9,
        ..SolverOptions::default()
    };
    let run = integrate(&rc, Some(&[0.0]), 0.0, 8.0 * rc.tau, &opts).unwrap();
    let rc_err = run
        .trace
        .times
        .iter()
        .zip(run.trace.node("x0").unwrap())
        .map(|(t, v)| (v - rc.v * (1.0 - (-t / rc.tau).exp())).abs() / rc.v)
        .fold(0.0, f64::max);
    let elapsed = start.elapsed();

    let pass = (3.5..=4.5).contains(&ratio) && rc_err <= 1e-6 && elapsed < Duration::from_secs(5);
    verdict(
        1,
        pass,
        &format!(
            "error ratio per halving {ratio:.3} (need 3.5..4.5), RC rel error {rc_err:.2e} (<= 1e-6), {:.2} s (< 5 s)",
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn criterion_2_isolator_rc_swing() {
    let sc = driver(&[
        ("pwm.frequency_hz", 20e6),
        ("pwm.duty_high", 0.5),
        ("pwm.duty_low", 0.5),
        ("isolator.slew_limit_v_per_s", 1e15),
    ]);
    let mut tight = sc.clone();
    tight.solver.pss_period_tol = 1e-6;
    let iso = sc.isolator(Side::Low);
    let rc = iso.out_resistance_ohm * (iso.self_cap_f + sc.totem(Side::Low).input_cap_f);
    let expected = iso.rail_v * (sc.period() / (4.0 * rc)).tanh();
    let pss = ChainSystem::new(&tight).unwrap().pss().unwrap();
    let v = pss.trace.node("v_iso_lo").unwrap();
    let pp = v.iter().cloned().fold(f64::MIN, f64::max) - v.iter().cloned().fold(f64::MAX, f64::min);
    let rel = (pp - expected).abs() / expected;
    verdict(
        2,
        rel <= 1e-3,
        &format!("peak-to-peak {pp:.5} V vs rail*tanh(T/4RC) {expected:.5} V, rel {rel:.2e} (<= 1e-3)"),
    );
}

#[test]
fn criterion_3_supply_current() {
    let (report, elapsed) = run("fig5", gatewave::harness::experiment::default_workers());
    let key = "supply.avg_current_a";
    let i_45_10 = metric(&report, "4.5/1e7", key);
    let mut grid: Vec<(f64, f64, f64)> = report
        .results
        .iter()
        .filter(|r| r.point.plotted)
        .map(|r| (r.point.series_value().unwrap(), r.point.value.unwrap(), value(r, key)))
        .collect();
    grid.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut monotone = true;
    for a in &grid {
        for b in &grid {
            let dominated = b.0 >= a.0 && b.1 >= a.1;
            if dominated && b.2 < a.2 {
                monotone = false;
            }
        }
    }
    let hot: Vec<bool> = [1e7, 2e7, 3e7]
        .iter()
        .map(|f| metric(&report, &format!("4.5/{f:e}"), "supply.runaway") == 1.0)
        .collect();
    let cool = metric(&report, "3.8/2e7", "supply.runaway") == 0.0;
    let pass = (0.16..=0.24).contains(&i_45_10)
        && monotone
        && hot.iter().all(|h| *h)
        && cool
        && elapsed < Duration::from_secs(60);
    verdict(
        3,
        pass,
        &format!(
            "I(4.5 V, 10 MHz) = {i_45_10:.4} A (0.16..0.24), monotone {monotone}, runaway at 4.5 V/10,20,30 MHz {hot:?}, \
             none at 3.8 V/20 MHz {cool}, {:.1} s (< 60 s)",
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn criterion_4_drive_rolloff() {
    let (report, _) = run("fig7", 2);
    let key = "v_gate_gan_lo.v_max";
    let plateau = [metric(&report, "1e6", key), metric(&report, "5e6", key)];
    let at_30 = metric(&report, "3e7", key);
    let tail: Vec<f64> = [2e7, 2.5e7, 3e7].iter().map(|f| metric(&report, &format!("{f:e}"), key)).collect();
    let non_increasing = tail.windows(2).all(|w| w[1] <= w[0]);
    let pass = plateau.iter().all(|v| (3.51..=4.29).contains(v)) && (2.0..=3.0).contains(&at_30) && non_increasing;
    verdict(
        4,
        pass,
        &format!(
            "plateau {:.3}/{:.3} V (3.51..4.29), 30 MHz {at_30:.3} V (2.0..3.0), 20-30 MHz {tail:.3?} non-increasing {non_increasing}",
            plateau[0], plateau[1]
        ),
    );
}

#[test]
fn criterion_5_hard_switching() {
    let (report, elapsed) = run("fig10", 1);
    let m = |k: &str| metric(&report, "run", k);
    let (periods, v_gs, ds_min, ds_max) = (
        m("pss.periods"),
        m("v_gs_sic.v_max"),
        m("v_ds_sic.v_min"),
        m("v_ds_sic.v_max"),
    );
    let (t_on, t_off) = (m("switch.t_on_s"), m("switch.t_off_s"));
    let pass = periods <= 50.0
        && v_gs >= 17.1
        && ds_min < 5.0
        && ds_max > 45.0
        && t_off > t_on
        && elapsed < Duration::from_secs(30);
    verdict(
        5,
        pass,
        &format!(
            "{periods} periods (<= 50), v_gs peak {v_gs:.2} V (>= 17.1), v_ds {ds_min:.3}..{ds_max:.2} V (< 5, > 45), \
             t_off {:.2} ns > t_on {:.2} ns, {:.1} s (< 30 s)",
            t_off * 1e9,
            t_on * 1e9,
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn criterion_6_shoot_through() {
    let m = GanPushPullModel::default();
    let (edge, drive) = (5e-9, 3.8);
    let traversal = edge_traversal_time(&m, edge, drive);
    let fractions = [0.0, 0.2, 0.4, 0.6, 0.8, 0.95, 1.0, 1.2, 2.0];
    let charges: Vec<(f64, f64)> = fractions
        .iter()
        .map(|k| {
            let dead = k * traversal;
            (dead, ramp_penetration_charge(&m, dead, edge, drive))
        })
        .collect();
    let zero_beyond = charges.iter().filter(|(d, _)| *d >= traversal).all(|(_, q)| *q == 0.0);
    let overlapping: Vec<f64> = charges.iter().filter(|(d, _)| *d < traversal).map(|(_, q)| *q).collect();
    let positive = overlapping.iter().all(|q| *q > 0.0);
    let decreasing = overlapping.windows(2).all(|w| w[1] < w[0]);
    let pass = zero_beyond && positive && decreasing && overlapping.len() >= 5;
    verdict(
        6,
        pass,
        &format!(
            "traversal {:.3} ns; charges {:.3e} C at {} dead times below it (positive {positive}, decreasing {decreasing}), \
             zero at and beyond it {zero_beyond}",
            traversal * 1e9,
            overlapping.first().copied().unwrap_or(0.0),
            overlapping.len()
        ),
    );
}

#[test]
fn criterion_7_conservation() {
    let (hard, _) = run("fig10", 1);
    let (open, _) = run("fig8", 2);
    let balance = [
        metric(&hard, "run", "energy.balance_rel"),
        metric(&open, "prototype_a", "energy.balance_rel"),
        metric(&open, "prototype_b", "energy.balance_rel"),
    ];
    let gate = metric(&hard, "run", "charge.gate_net_rel");
    let pass = balance.iter().all(|b| *b <= 0.005) && gate < 1e-3;
    verdict(
        7,
        pass,
        &format!("energy balance {balance:?} (<= 5e-3), net gate charge / per-edge charge {gate:.2e} (< 1e-3)"),
    );
}

#[test]
fn criterion_8_prototype_overshoot() {
    let (report, _) = run("fig8", 2);
    let a = metric(&report, "prototype_a", "v_out.overshoot_v");
    let b = metric(&report, "prototype_b", "v_out.overshoot_v");
    verdict(8, a > b, &format!("overshoot A {a:.3} V > B {b:.3} V"));
}

#[test]
fn criterion_9_determinism() {
    let mut differing = Vec::new();
    for (name, _) in gatewave::harness::presets::PRESETS {
        let first = stats_file(name, 4);
        let second = stats_file(name, 4);
        let serial = stats_file(name, 1);
        if first.is_empty() || first != second || first != serial {
            differing.push(name);
        }
    }
    verdict(
        9,
        differing.is_empty(),
        &format!(
            "{} presets, stats.csv identical across runs and worker counts; differing: {differing:?}",
            gatewave::harness::presets::PRESETS.len()
        ),
    );
}
