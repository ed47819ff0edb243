//! Independent reference integrators shared by the integration tests.
#![allow(dead_code)]

use gatewave::solver::OdeSystem;

/// Classical RK4 result: final state plus the running trapezoidal integral
/// of every probe.
pub struct Reference {
    pub state: Vec<f64>,
    pub probe_integrals: Vec<f64>,
    pub times: Vec<f64>,
    pub probes: Vec<Vec<f64>>,
}

fn segment_bounds<S: OdeSystem>(sys: &S, t0: f64, t1: f64) -> Vec<f64> {
    let mut b: Vec<f64> = sys
        .breakpoints(t0, t1)
        .into_iter()
        .chain(sys.events(t0, t1).into_iter().map(|(t, _)| t))
        .filter(|t| *t > t0 && *t < t1)
        .collect();
    b.push(t0);
    b.push(t1);
    b.sort_by(f64::total_cmp);
    b.dedup();
    b
}

/// Fixed-step RK4 over `[t0, t1]` with step `dt`, landing on every
/// breakpoint. Discrete modes are evaluated at segment midpoints, as the
/// main solver does. `keep_every` thins the stored probe samples.
pub fn rk4<S: OdeSystem>(sys: &S, x0: &[f64], t0: f64, t1: f64, dt: f64, keep_every: usize) -> Reference {
    let n = sys.dim();
    let n_probes = sys.probe_names().len();
    let mut x = x0.to_vec();
    let mut probe = vec![0.0; n_probes];
    let mut integrals = vec![0.0; n_probes];
    let mut times = Vec::new();
    let mut probes = Vec::new();
    let bounds = segment_bounds(sys, t0, t1);
    let f = |t: f64, m: f64, x: &[f64]| {
        let mut d = vec![0.0; n];
        sys.rhs(t, m, x, &mut d).expect("rhs");
        d
    };
    let mut count = 0usize;
    for w in bounds.windows(2) {
        let (a, b) = (w[0], w[1]);
        let m = 0.5 * (a + b);
        sys.observe(a, m, &x, &mut probe).expect("observe");
        if times.is_empty() {
            times.push(a);
            probes.push(probe.clone());
        }
        let steps = ((b - a) / dt).ceil().max(1.0) as usize;
        let h = (b - a) / steps as f64;
        for k in 0..steps {
            let t = a + k as f64 * h;
            let k1 = f(t, m, &x);
            let x2: Vec<f64> = (0..n).map(|i| x[i] + 0.5 * h * k1[i]).collect();
            let k2 = f(t + 0.5 * h, m, &x2);
            let x3: Vec<f64> = (0..n).map(|i| x[i] + 0.5 * h * k2[i]).collect();
            let k3 = f(t + 0.5 * h, m, &x3);
            let x4: Vec<f64> = (0..n).map(|i| x[i] + h * k3[i]).collect();
            let k4 = f(t + h, m, &x4);
            for i in 0..n {
                x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            let mut next = vec![0.0; n_probes];
            let t_next = if k + 1 == steps { b } else { t + h };
            sys.observe(t_next, m, &x, &mut next).expect("observe");
            for j in 0..n_probes {
                integrals[j] += 0.5 * h * (probe[j] + next[j]);
            }
            probe = next;
            count += 1;
            if count.is_multiple_of(keep_every.max(1)) || (k + 1 == steps && w[1] == t1) {
                times.push(t_next);
                probes.push(probe.clone());
            }
        }
    }
    Reference {
        state: x,
        probe_integrals: integrals,
        times,
        probes,
    }
}

/// Index of probe `name` in the system's probe order.
pub fn probe_index<S: OdeSystem>(sys: &S, name: &str) -> usize {
    let p = sys.probe_names();
    p.nodes
        .iter()
        .chain(&p.branches)
        .chain(&p.powers)
        .position(|n| n == name)
        .unwrap_or_else(|| panic!("no probe {name}"))
}

/// Relative max-norm distance of two states.
pub fn state_error(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale
}

use gatewave::harness::config::{apply_numeric, ConfigDoc};
use gatewave::harness::presets;
use gatewave::signal::Side;
use gatewave::{Scenario, Topology};

/// Scenario of a shipped catalog file.
pub fn catalog(file: &str) -> Scenario {
    let text = presets::catalog_file(file).expect("catalog file");
    ConfigDoc::from_catalog(file, text)
        .and_then(|d| d.scenario())
        .expect("catalog scenario")
}

/// Applies numeric overrides by config key.
pub fn with(sc: Scenario, set: &[(&str, f64)]) -> Scenario {
    set.iter()
        .fold(sc, |sc, (k, v)| apply_numeric(&sc, k, *v).expect("override"))
}

/// Low-side driver chain of prototype A with overrides.
pub fn driver(set: &[(&str, f64)]) -> Scenario {
    let mut sc = with(catalog("prototype_a.cfg"), set);
    sc.topology = Topology::DriverSide(Side::Low);
    sc
}
