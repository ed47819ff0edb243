//! Waveform and power measurements on steady-state traces.
//!
//! Every statistic treats the trace as exactly one period of a periodic
//! waveform. Rise and fall thresholds sit at 10 % and 90 % of the measured
//! min-max span, not of the rail.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::solver::{fmt_sig12, interpolate, Trace};
use crate::stages::ThermalModel;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveformStats {
    pub v_max: f64,
    pub v_min: f64,
    /// Excursion above the commanded rail, zero if the rail is never passed.
    pub overshoot_v: f64,
    pub rise_10_90_s: f64,
    pub fall_10_90_s: f64,
    /// Fraction of the period spent above the mid level.
    pub measured_duty: f64,
    pub avg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerStats {
    pub avg_rail_current_a: f64,
    /// Shoot-through charge over the period.
    pub penetration_charge_c: f64,
    pub dissipation_w: f64,
    pub junction_temp_c: f64,
    pub runaway: bool,
}

/// Duration of the first complete transition from level `from` to level `to`.
///
/// The transition starts at the last crossing of `from` before `to` is
/// reached, so ringing around the start level is not counted.
pub fn first_transition(times: &[f64], values: &[f64], from: f64, to: f64) -> Option<f64> {
    let rising = to > from;
    let beyond = |v: f64, level: f64| if rising { v >= level } else { v <= level };
    let mut start: Option<f64> = None;
    for k in 1..values.len() {
        let (a, b) = (values[k - 1], values[k]);
        let (ta, tb) = (times[k - 1], times[k]);
        if !beyond(a, from) && beyond(b, from) {
            start = Some(ta + (from - a) / (b - a) * (tb - ta));
        } else if beyond(a, from) && !beyond(b, from) {
            start = None;
        }
        if let Some(t_start) = start {
            if !beyond(a, to) && beyond(b, to) {
                let t_end = ta + (to - a) / (b - a) * (tb - ta);
                return Some(t_end - t_start);
            }
        }
    }
    None
}

/// Two back-to-back copies of a one-period trace so transitions that wrap
/// around the period boundary are seen whole.
fn unrolled(times: &[f64], values: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let span = times[times.len() - 1] - times[0];
    let mut t = times.to_vec();
    let mut v = values.to_vec();
    for k in 1..times.len() {
        t.push(times[k] + span);
        v.push(values[k]);
    }
    (t, v)
}

pub fn waveform_stats(trace: &Trace, node: &str, rail_v: f64) -> Result<WaveformStats> {
    let channel = trace.node_channel(node)?;
    let incomplete = || Error::IncompleteCycle {
        signal: node.to_string(),
    };
    let values = &channel.values;
    if values.len() < 3 || !(trace.span() > 0.0) {
        return Err(incomplete());
    }
    let (v_min, v_max) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if !(v_max > v_min) {
        return Err(incomplete());
    }
    let span = trace.span();
    let avg = channel.total() / span;
    let l10 = v_min + 0.1 * (v_max - v_min);
    let l90 = v_min + 0.9 * (v_max - v_min);
    let (t2, v2) = unrolled(&trace.times, values);
    let rise = first_transition(&t2, &v2, l10, l90).ok_or_else(incomplete)?;
    let fall = first_transition(&t2, &v2, l90, l10).ok_or_else(incomplete)?;
    let mid = 0.5 * (v_max + v_min);
    Ok(WaveformStats {
        v_max,
        v_min,
        overshoot_v: (v_max - rail_v).max(0.0),
        rise_10_90_s: rise,
        fall_10_90_s: fall,
        measured_duty: time_above(&trace.times, values, mid) / span,
        avg,
    })
}

/// Time spent above `level`, crossings located by linear interpolation.
fn time_above(times: &[f64], values: &[f64], level: f64) -> f64 {
    let mut total = 0.0;
    for k in 1..values.len() {
        let (a, b) = (values[k - 1] - level, values[k] - level);
        let dt = times[k] - times[k - 1];
        total += if a >= 0.0 && b >= 0.0 {
            dt
        } else if a > 0.0 {
            dt * a / (a - b)
        } else if b > 0.0 {
            dt * b / (b - a)
        } else {
            0.0
        };
    }
    total
}

/// Averages of stage `stage` over a one-period trace.
///
/// Reads `i_rail_<stage>`, `p_<stage>` and, when present, `i_shoot_<stage>`.
pub fn power_stats(trace: &Trace, stage: &str, thermal: &ThermalModel) -> Result<PowerStats> {
    let span = trace.span();
    if !(span > 0.0) {
        return Err(Error::IncompleteCycle {
            signal: stage.to_string(),
        });
    }
    let rail = trace.branch(&format!("i_rail_{stage}"))?;
    let power = trace.power(&format!("p_{stage}"))?;
    let penetration_charge_c = trace
        .branch(&format!("i_shoot_{stage}"))
        .map(|c| c.total())
        .unwrap_or(0.0);
    let dissipation_w = power.total() / span;
    let junction_temp_c = thermal.steady_state_c(dissipation_w);
    Ok(PowerStats {
        avg_rail_current_a: rail.total() / span,
        penetration_charge_c,
        dissipation_w,
        junction_temp_c,
        runaway: thermal.is_runaway(junction_temp_c),
    })
}

/// Largest deviation between two traces over the named nodes, each node
/// scaled by its largest magnitude in either trace. Both traces are
/// resampled onto the union of their time grids over the common span.
pub fn compare_traces(a: &Trace, b: &Trace, nodes: &[&str]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::GridMismatch);
    }
    let start = a.times[0].max(b.times[0]);
    let end = a.times[a.len() - 1].min(b.times[b.len() - 1]);
    if !(end > start) {
        return Err(Error::GridMismatch);
    }
    let mut grid: Vec<f64> = a
        .times
        .iter()
        .chain(&b.times)
        .copied()
        .filter(|t| *t >= start && *t <= end)
        .collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();

    let mut worst = 0.0f64;
    for node in nodes {
        let va = a.node(node)?;
        let vb = b.node(node)?;
        let scale = va
            .iter()
            .chain(vb)
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(f64::MIN_POSITIVE);
        for &t in &grid {
            let d = (interpolate(&a.times, va, t) - interpolate(&b.times, vb, t)).abs();
            worst = worst.max(d / scale);
        }
    }
    Ok(worst)
}

pub const STATS_HEADER: &str = "scenario,param,value,kind,name,status,v_max,v_min,overshoot_v,\
rise_10_90_s,fall_10_90_s,measured_duty,avg,avg_rail_current_a,penetration_charge_c,\
dissipation_w,junction_temp_c,runaway";

/// One row of the stats table. `param`/`value` identify a sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct StatsRow {
    pub scenario: String,
    pub param: String,
    pub value: Option<f64>,
    pub name: String,
    pub status: String,
    pub kind: StatsKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StatsKind {
    Node(Option<WaveformStats>),
    Stage(Option<PowerStats>),
}

impl StatsRow {
    pub fn to_csv_line(&self) -> String {
        let mut line = String::new();
        let value = self.value.map(fmt_sig12).unwrap_or_default();
        let kind = match self.kind {
            StatsKind::Node(_) => "node",
            StatsKind::Stage(_) => "stage",
        };
        write!(
            line,
            "{},{},{},{},{},{}",
            self.scenario, self.param, value, kind, self.name, self.status
        )
        .unwrap();
        let empty7 = ",,,,,,,";
        let empty5 = ",,,,,";
        match &self.kind {
            StatsKind::Node(Some(w)) => {
                for v in [
                    w.v_max,
                    w.v_min,
                    w.overshoot_v,
                    w.rise_10_90_s,
                    w.fall_10_90_s,
                    w.measured_duty,
                    w.avg,
                ] {
                    write!(line, ",{}", fmt_sig12(v)).unwrap();
                }
                line.push_str(empty5);
            }
            StatsKind::Stage(Some(p)) => {
                line.push_str(empty7);
                for v in [
                    p.avg_rail_current_a,
                    p.penetration_charge_c,
                    p.dissipation_w,
                    p.junction_temp_c,
                ] {
                    write!(line, ",{}", fmt_sig12(v)).unwrap();
                }
                write!(line, ",{}", p.runaway).unwrap();
            }
            StatsKind::Node(None) | StatsKind::Stage(None) => {
                line.push_str(empty7);
                line.push_str(empty5);
            }
        }
        line
    }
}

pub fn stats_csv(rows: &[StatsRow]) -> String {
    let mut out = String::from(STATS_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.to_csv_line());
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn sine_trace(n: usize, amp: f64, offset: f64) -> Trace {
        let period = 1e-6;
        let times: Vec<f64> = (0..=n).map(|k| k as f64 * period / n as f64).collect();
        let v = times
            .iter()
            .map(|t| offset + amp * (2.0 * PI * t / period).sin())
            .collect();
        Trace::from_samples(times, vec![("v", v)], vec![])
    }

    #[test]
    fn sine_extremes_and_edges() {
        let n = 4000;
        let tr = sine_trace(n, 2.0, 1.0);
        let w = waveform_stats(&tr, "v", 2.5).unwrap();
        assert!((w.v_max - 3.0).abs() < 1e-12);
        assert!((w.v_min + 1.0).abs() < 1e-12);
        assert!((w.overshoot_v - 0.5).abs() < 1e-12);
        // 10-90 % of a sine: asin(0.8)/pi of the period
        let expected = (0.8f64).asin() / PI * 1e-6;
        let dt = 1e-6 / n as f64;
        assert!((w.rise_10_90_s - expected).abs() < dt);
        assert!((w.fall_10_90_s - expected).abs() < dt);
        assert!((w.measured_duty - 0.5).abs() < 1e-3);
        assert!((w.avg - 1.0).abs() < 1e-6);
    }

    #[test]
    fn constant_trace_is_incomplete() {
        let times: Vec<f64> = (0..10).map(|k| k as f64).collect();
        let tr = Trace::from_samples(times, vec![("v", vec![3.0; 10])], vec![]);
        assert!(matches!(
            waveform_stats(&tr, "v", 5.0),
            Err(Error::IncompleteCycle { .. })
        ));
    }

    #[test]
    fn compare_identity_and_symmetry() {
        let a = sine_trace(500, 1.0, 0.0);
        let b = sine_trace(731, 1.1, 0.05);
        assert_eq!(compare_traces(&a, &a, &["v"]).unwrap(), 0.0);
        let ab = compare_traces(&a, &b, &["v"]).unwrap();
        let ba = compare_traces(&b, &a, &["v"]).unwrap();
        assert!(ab > 0.0);
        assert_eq!(ab, ba);
    }

    #[test]
    fn compare_disjoint_spans() {
        let a = sine_trace(10, 1.0, 0.0);
        let mut b = a.clone();
        b.times.iter_mut().for_each(|t| *t += 2e-6);
        assert!(matches!(compare_traces(&a, &b, &["v"]), Err(Error::GridMismatch)));
    }

    #[test]
    fn power_from_channels() {
        let times = vec![0.0, 0.5, 1.0];
        let mut tr = Trace::from_samples(
            times.clone(),
            vec![],
            vec![("i_rail_x", vec![1.0, 1.0, 1.0]), ("i_shoot_x", vec![0.0, 2.0, 0.0])],
        );
        let p = Trace::from_samples(times, vec![], vec![("p_x", vec![0.5, 0.5, 0.5])]);
        tr.powers = p.branches;
        let thermal = ThermalModel::default();
        let s = power_stats(&tr, "x", &thermal).unwrap();
        assert_eq!(s.avg_rail_current_a, 1.0);
        assert_eq!(s.penetration_charge_c, 1.0);
        assert_eq!(s.dissipation_w, 0.5);
        assert!(!s.runaway);
    }

    #[test]
    fn stats_rows_have_fixed_width() {
        let cols = STATS_HEADER.split(',').count();
        let row = StatsRow {
            scenario: "s".into(),
            param: "pwm.frequency_hz".into(),
            value: Some(1e6),
            name: "v".into(),
            status: "ok".into(),
            kind: StatsKind::Node(None),
        };
        assert_eq!(row.to_csv_line().split(',').count(), cols);
        let w = waveform_stats(&sine_trace(100, 1.0, 0.0), "v", 1.0).unwrap();
        let row = StatsRow {
            kind: StatsKind::Node(Some(w)),
            ..row
        };
        assert_eq!(row.to_csv_line().split(',').count(), cols);
    }
}
