//! SiC power MOSFET and the resistive hard-switching test circuit.

use std::path::Path;

use crate::error::{Error, Result};
use crate::solver::Trace;

/// Voltage-dependent capacitance with monotone piecewise-cubic interpolation
/// (Fritsch-Carlson), clamped to the end values outside the knot range.
#[derive(Debug, Clone, PartialEq)]
pub struct CvTable {
    volts: Vec<f64>,
    farads: Vec<f64>,
    slopes: Vec<f64>,
}

impl CvTable {
    pub fn new(points: &[(f64, f64)]) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::invalid("C-V table", "needs at least two knots"));
        }
        let (volts, farads): (Vec<f64>, Vec<f64>) = points.iter().copied().unzip();
        if volts.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("C-V table", "voltages must be strictly increasing"));
        }
        if farads.iter().any(|c| !(c.is_finite() && *c > 0.0)) {
            return Err(Error::invalid("C-V table", "capacitances must be positive"));
        }
        if farads.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::invalid(
                "C-V table",
                "capacitance must be non-increasing in voltage",
            ));
        }
        let slopes = fritsch_carlson_slopes(&volts, &farads);
        Ok(Self {
            volts,
            farads,
            slopes,
        })
    }

    /// Constant capacitance over all voltages.
    pub fn constant(c: f64) -> Result<Self> {
        Self::new(&[(0.0, c), (1.0, c)])
    }

    /// Parses a two-column CSV with header `v,cap_f`.
    pub fn from_csv_str(text: &str, origin: &Path) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let parse_err = |line: usize, reason: String| Error::Parse {
            path: origin.to_path_buf(),
            line,
            reason,
        };
        match lines.next() {
            Some((_, header)) if header.replace(' ', "") == "v,cap_f" => {}
            Some((n, other)) => {
                return Err(parse_err(n, format!("expected header `v,cap_f`, found `{other}`")))
            }
            None => return Err(parse_err(1, "empty table".into())),
        }
        let mut points = Vec::new();
        for (n, line) in lines {
            let mut cols = line.split(',').map(str::trim);
            let (Some(v), Some(c), None) = (cols.next(), cols.next(), cols.next()) else {
                return Err(parse_err(n, format!("expected two columns, found `{line}`")));
            };
            let v: f64 = v
                .parse()
                .map_err(|_| parse_err(n, format!("bad voltage `{v}`")))?;
            let c: f64 = c
                .parse()
                .map_err(|_| parse_err(n, format!("bad capacitance `{c}`")))?;
            points.push((v, c));
        }
        Self::new(&points).map_err(|e| parse_err(0, e.to_string()))
    }

    pub fn from_csv_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_str(&text, path)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("v,cap_f\n");
        for (v, c) in self.knots() {
            out.push_str(&format!("{v},{c:e}\n"));
        }
        out
    }

    pub fn knots(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.volts.iter().copied().zip(self.farads.iter().copied())
    }

    pub fn eval(&self, v: f64) -> f64 {
        let n = self.volts.len();
        if v <= self.volts[0] {
            return self.farads[0];
        }
        if v >= self.volts[n - 1] {
            return self.farads[n - 1];
        }
        let k = self.volts.partition_point(|&x| x <= v) - 1;
        let h = self.volts[k + 1] - self.volts[k];
        let s = (v - self.volts[k]) / h;
        let (s2, s3) = (s * s, s * s * s);
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * self.farads[k]
            + h10 * h * self.slopes[k]
            + h01 * self.farads[k + 1]
            + h11 * h * self.slopes[k + 1]
    }
}

fn fritsch_carlson_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let secants: Vec<f64> = (0..n - 1)
        .map(|k| (y[k + 1] - y[k]) / (x[k + 1] - x[k]))
        .collect();
    let mut m = vec![0.0; n];
    m[0] = secants[0];
    m[n - 1] = secants[n - 2];
    for k in 1..n - 1 {
        m[k] = if secants[k - 1] * secants[k] <= 0.0 {
            0.0
        } else {
            (secants[k - 1] + secants[k]) / 2.0
        };
    }
    for k in 0..n - 1 {
        if secants[k] == 0.0 {
            m[k] = 0.0;
            m[k + 1] = 0.0;
            continue;
        }
        let a = m[k] / secants[k];
        let b = m[k + 1] / secants[k];
        let r = a * a + b * b;
        if r > 9.0 {
            let tau = 3.0 / r.sqrt();
            m[k] = tau * a * secants[k];
            m[k + 1] = tau * b * secants[k];
        }
    }
    m
}

/// Typical-value Miller capacitance curve for a 1200-V, 450-mOhm SiC MOSFET
/// class device, as `(v_dg, farads)`. Placeholder shape, not measured data.
pub const DEFAULT_CGD_TABLE: [(f64, f64); 12] = [
    (-20.0, 70e-12),
    (-10.0, 66e-12),
    (-5.0, 63e-12),
    (0.0, 60e-12),
    (1.0, 45e-12),
    (2.0, 35e-12),
    (5.0, 20e-12),
    (10.0, 11e-12),
    (15.0, 8e-12),
    (20.0, 6.5e-12),
    (30.0, 5e-12),
    (50.0, 4e-12),
];

/// Typical-value drain-source capacitance curve, `(v_ds, farads)`.
pub const DEFAULT_CDS_TABLE: [(f64, f64); 12] = [
    (0.0, 250e-12),
    (1.0, 200e-12),
    (2.0, 165e-12),
    (5.0, 115e-12),
    (10.0, 80e-12),
    (15.0, 62e-12),
    (20.0, 52e-12),
    (25.0, 46e-12),
    (30.0, 42e-12),
    (35.0, 39e-12),
    (40.0, 37e-12),
    (50.0, 33e-12),
];

#[derive(Debug, Clone, PartialEq)]
pub struct SicMosfetModel {
    pub vth_v: f64,
    pub kp_a_per_v2: f64,
    pub cgs_f: f64,
    pub cgd_table: CvTable,
    pub cds_table: CvTable,
    pub rg_internal_ohm: f64,
}

impl Default for SicMosfetModel {
    fn default() -> Self {
        Self {
            vth_v: 2.8,
            // 0.45 Ohm on-resistance at 18 V gate drive
            kp_a_per_v2: 0.146,
            cgs_f: 390e-12,
            cgd_table: CvTable::new(&DEFAULT_CGD_TABLE).expect("default cgd table"),
            cds_table: CvTable::new(&DEFAULT_CDS_TABLE).expect("default cds table"),
            rg_internal_ohm: 6.0,
        }
    }
}

impl SicMosfetModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.vth_v > 0.0) {
            return Err(Error::invalid("SiC MOSFET", "vth_v must be positive"));
        }
        if !(self.kp_a_per_v2 > 0.0) {
            return Err(Error::invalid("SiC MOSFET", "kp_a_per_v2 must be positive"));
        }
        if !(self.cgs_f > 0.0) {
            return Err(Error::invalid("SiC MOSFET", "cgs_f must be positive"));
        }
        if !(self.rg_internal_ohm >= 0.0) {
            return Err(Error::invalid("SiC MOSFET", "rg_internal_ohm must be >= 0"));
        }
        Ok(())
    }
}

/// Level-1 square-law channel current, drain to source.
///
/// Negative `v_ds` swaps the roles of drain and source.
pub fn channel_current(model: &SicMosfetModel, v_gs: f64, v_ds: f64) -> f64 {
    if v_ds < 0.0 {
        return -channel_current(model, v_gs - v_ds, -v_ds);
    }
    let vov = v_gs - model.vth_v;
    if vov <= 0.0 {
        0.0
    } else if v_ds < vov {
        model.kp_a_per_v2 * (vov * v_ds - 0.5 * v_ds * v_ds)
    } else {
        0.5 * model.kp_a_per_v2 * vov * vov
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HardSwitchCircuit {
    pub v_link_v: f64,
    pub r_limit_ohm: f64,
    pub r_gate_ext_ohm: f64,
    pub device: SicMosfetModel,
}

impl Default for HardSwitchCircuit {
    fn default() -> Self {
        Self {
            v_link_v: 50.0,
            r_limit_ohm: 100.0,
            r_gate_ext_ohm: 0.0,
            device: SicMosfetModel::default(),
        }
    }
}

impl HardSwitchCircuit {
    pub fn validate(&self) -> Result<()> {
        if !(self.v_link_v > 0.0) {
            return Err(Error::invalid("hard-switch circuit", "v_link_v must be positive"));
        }
        if !(self.r_limit_ohm > 0.0) {
            return Err(Error::invalid("hard-switch circuit", "r_limit_ohm must be positive"));
        }
        if !(self.r_gate_ext_ohm >= 0.0) {
            return Err(Error::invalid("hard-switch circuit", "r_gate_ext_ohm must be >= 0"));
        }
        self.device.validate()
    }

    /// Resistance between the driver output terminal and the internal gate.
    pub fn gate_path_ohm(&self) -> f64 {
        self.device.rg_internal_ohm + self.r_gate_ext_ohm
    }

    /// Capacitance matrix of the (gate, drain) node pair.
    pub fn capacitance_matrix(&self, v_g: f64, v_d: f64) -> [[f64; 2]; 2] {
        let cgs = self.device.cgs_f;
        let cgd = self.device.cgd_table.eval(v_d - v_g);
        let cds = self.device.cds_table.eval(v_d);
        [[cgs + cgd, -cgd], [-cgd, cds + cgd]]
    }

    /// Current into the drain node from the link and channel.
    pub fn drain_current(&self, v_g: f64, v_d: f64) -> f64 {
        (self.v_link_v - v_d) / self.r_limit_ohm - channel_current(&self.device, v_g, v_d)
    }

    /// Node rates for gate current `i_gate` flowing into the internal gate.
    pub fn node_rates(&self, v_g: f64, v_d: f64, i_gate: f64) -> Result<[f64; 2]> {
        let c = self.capacitance_matrix(v_g, v_d);
        let det = c[0][0] * c[1][1] - c[0][1] * c[1][0];
        let scale = c[0][0].abs() * c[1][1].abs();
        if !(det.abs() > 1e-12 * scale) || !det.is_finite() {
            return Err(Error::SingularCapacitance { det });
        }
        let i_d = self.drain_current(v_g, v_d);
        Ok([
            (c[1][1] * i_gate - c[0][1] * i_d) / det,
            (c[0][0] * i_d - c[1][0] * i_gate) / det,
        ])
    }
}

/// Rates of `(v_gate, v_drain)` when a voltage source `drive` feeds the gate
/// through the internal and external gate resistance.
pub fn circuit_rhs(circuit: &HardSwitchCircuit, state: [f64; 2], drive: f64) -> Result<[f64; 2]> {
    let [v_g, v_d] = state;
    let r = circuit.gate_path_ohm();
    if !(r > 0.0) {
        return Err(Error::invalid(
            "hard-switch circuit",
            "a voltage-source drive needs a positive gate path resistance",
        ));
    }
    circuit.node_rates(v_g, v_d, (drive - v_g) / r)
}

/// 10-90 % transition times of a waveform: `(falling, rising)`.
///
/// Only transitions that complete inside the trace are measured.
pub fn transition_times(times: &[f64], values: &[f64], signal: &str) -> Result<(f64, f64)> {
    let incomplete = || Error::IncompleteCycle {
        signal: signal.to_string(),
    };
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if !(hi > lo) {
        return Err(incomplete());
    }
    let l10 = lo + 0.1 * (hi - lo);
    let l90 = lo + 0.9 * (hi - lo);
    let falling = crate::metrics::first_transition(times, values, l90, l10).ok_or_else(incomplete)?;
    let rising = crate::metrics::first_transition(times, values, l10, l90).ok_or_else(incomplete)?;
    Ok((falling, rising))
}

/// Turn-on (falling `v_ds`) and turn-off (rising `v_ds`) 10-90 % times.
pub fn switching_times(trace: &Trace) -> Result<(f64, f64)> {
    let v_ds = trace.node("v_ds_sic")?;
    transition_times(&trace.times, v_ds, "v_ds_sic")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn cutoff_carries_nothing() {
        let m = SicMosfetModel::default();
        for v_ds in [0.0, 1.0, 50.0] {
            assert_eq!(channel_current(&m, 0.0, v_ds), 0.0);
        }
    }

    #[test]
    fn region_boundary_is_continuous() {
        let m = SicMosfetModel::default();
        let v_gs = 10.0;
        let vov = v_gs - m.vth_v;
        let triode = m.kp_a_per_v2 * (vov * vov - 0.5 * vov * vov);
        let sat = 0.5 * m.kp_a_per_v2 * vov * vov;
        assert!((triode - sat).abs() <= 1e-15 * sat);
        let below = channel_current(&m, v_gs, vov - 1e-9);
        let above = channel_current(&m, v_gs, vov + 1e-9);
        assert!((below - above).abs() < 1e-12);
    }

    #[test]
    fn on_state_load_line() {
        let c = HardSwitchCircuit::default();
        // solve (50 - v)/100 = I(18, v) by bisection
        let (mut a, mut b) = (0.0, 50.0);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if c.drain_current(18.0, m) > 0.0 {
                a = m
            } else {
                b = m
            }
        }
        let v_on = 0.5 * (a + b);
        assert!(v_on < 5.0);
        let i = channel_current(&c.device, 18.0, v_on);
        assert!((i - (50.0 - v_on) / 100.0).abs() < 1e-9);
        assert!((i - 0.45).abs() < 0.05, "{i}");
    }

    #[test]
    fn off_state_is_a_fixed_point() {
        let c = HardSwitchCircuit::default();
        let rates = circuit_rhs(&c, [0.0, 50.0], 0.0).unwrap();
        assert_eq!(rates, [0.0, 0.0]);
    }

    #[test]
    fn singular_capacitance_is_reported() {
        let mut c = HardSwitchCircuit::default();
        c.device.cgs_f = 1e-30;
        c.device.cds_table = CvTable::constant(1e-30).unwrap();
        let err = circuit_rhs(&c, [0.0, 50.0], 5.0).unwrap_err();
        assert!(matches!(err, Error::SingularCapacitance { .. }));
    }

    #[test]
    fn csv_roundtrip_and_header_check() {
        let t = CvTable::new(&DEFAULT_CDS_TABLE).unwrap();
        let back = CvTable::from_csv_str(&t.to_csv(), Path::new("x.csv")).unwrap();
        assert_eq!(t, back);
        let err = CvTable::from_csv_str("volts,c\n0,1e-12\n", Path::new("x.csv")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn rejects_increasing_capacitance() {
        assert!(CvTable::new(&[(0.0, 1e-12), (1.0, 2e-12)]).is_err());
    }

    #[test]
    fn transitions_of_half_cycle_are_incomplete() {
        let times: Vec<f64> = (0..100).map(|k| k as f64).collect();
        let values: Vec<f64> = times.iter().map(|&t| if t < 50.0 { 50.0 } else { 0.2 }).collect();
        assert!(matches!(
            transition_times(&times, &values, "v"),
            Err(Error::IncompleteCycle { .. })
        ));
    }

    proptest! {
        #[test]
        fn interpolation_stays_between_knots(v in -30.0f64..60.0) {
            let t = CvTable::new(&DEFAULT_CGD_TABLE).unwrap();
            let knots: Vec<_> = t.knots().collect();
            let c = t.eval(v);
            let k = knots.partition_point(|(x, _)| *x <= v);
            let (hi, lo) = if k == 0 {
                (knots[0].1, knots[0].1)
            } else if k == knots.len() {
                (knots[k - 1].1, knots[k - 1].1)
            } else {
                (knots[k - 1].1, knots[k].1)
            };
            prop_assert!(c <= hi * (1.0 + 1e-12) && c >= lo * (1.0 - 1e-12));
        }

        #[test]
        fn channel_is_monotone(v_gs in 0.0f64..20.0, v_ds in 0.0f64..60.0, d in 0.0f64..2.0) {
            let m = SicMosfetModel::default();
            prop_assert!(channel_current(&m, v_gs + d, v_ds) >= channel_current(&m, v_gs, v_ds));
            prop_assert!(channel_current(&m, v_gs, v_ds + d) >= channel_current(&m, v_gs, v_ds));
        }
    }
}
