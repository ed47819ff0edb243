//! Dual PWM control signals for the high-side and low-side isolator inputs.
//!
//! The complementary Si stage after each isolator inverts, so an input duty `D`
//! becomes a push-pull conduction duty `1 - D`. Raising both input duties above
//! one half therefore opens a dead time between the two conduction windows:
//!
//! ```text
//! dead = (duty_high + duty_low - 1) / 2 * period
//! ```
//!
//! The high-side input rises at `t = 0`. The low side is placed so that both
//! push-pull transitions see the same dead time.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    High,
    Low,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::High, Side::Low];

    pub fn suffix(self) -> &'static str {
        match self {
            Side::High => "hi",
            Side::Low => "lo",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Rising,
    Falling,
}

/// Start of one input transition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub time: f64,
    pub side: Side,
    pub direction: Direction,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PwmSpec {
    pub frequency_hz: f64,
    /// Fraction of the period the high-side input is logic-high.
    pub duty_high: f64,
    pub duty_low: f64,
    /// Extra shift of the low-side waveform, as a fraction of the period.
    pub phase_offset: f64,
    pub logic_high_v: f64,
    pub logic_low_v: f64,
    pub rise_fall_s: f64,
}

impl Default for PwmSpec {
    fn default() -> Self {
        Self {
            frequency_hz: 1.0e6,
            duty_high: 0.5,
            duty_low: 0.5,
            phase_offset: 0.0,
            logic_high_v: 5.0,
            logic_low_v: 0.0,
            rise_fall_s: 1.0e-9,
        }
    }
}

/// Position of one side's logic-high pulse inside a period.
#[derive(Debug, Clone, Copy)]
struct Pulse {
    rise_at: f64,
    width: f64,
}

impl PwmSpec {
    pub fn new(frequency_hz: f64, duty_high: f64, duty_low: f64) -> Result<Self> {
        let spec = Self {
            frequency_hz,
            duty_high,
            duty_low,
            ..Self::default()
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.frequency_hz.is_finite() && self.frequency_hz > 0.0) {
            return Err(Error::invalid("pwm", "frequency_hz must be positive"));
        }
        for (name, d) in [("duty_high", self.duty_high), ("duty_low", self.duty_low)] {
            if !(d > 0.0 && d < 1.0) {
                return Err(Error::invalid("pwm", format!("{name} must lie in (0, 1)")));
            }
        }
        if !(0.0..1.0).contains(&self.phase_offset) {
            return Err(Error::invalid("pwm", "phase_offset must lie in [0, 1)"));
        }
        if self.duty_high + self.duty_low < 1.0 {
            return Err(Error::Overlap {
                duty_high: self.duty_high,
                duty_low: self.duty_low,
            });
        }
        if !(self.rise_fall_s >= 0.0) {
            return Err(Error::invalid("pwm", "rise_fall_s must be >= 0"));
        }
        let period = self.period();
        let narrowest = self
            .duty_high
            .min(1.0 - self.duty_high)
            .min(self.duty_low)
            .min(1.0 - self.duty_low)
            * period;
        if self.rise_fall_s > narrowest {
            return Err(Error::invalid(
                "pwm",
                format!(
                    "rise_fall_s ({:e}) exceeds the narrowest pulse ({narrowest:e})",
                    self.rise_fall_s
                ),
            ));
        }
        if !(self.logic_high_v > self.logic_low_v) {
            return Err(Error::invalid("pwm", "logic_high_v must exceed logic_low_v"));
        }
        Ok(())
    }

    pub fn period(&self) -> f64 {
        1.0 / self.frequency_hz
    }

    /// Dead time inserted before each push-pull transition.
    pub fn dead_time(&self) -> Result<f64> {
        let margin = self.duty_high + self.duty_low - 1.0;
        if margin < 0.0 {
            return Err(Error::Overlap {
                duty_high: self.duty_high,
                duty_low: self.duty_low,
            });
        }
        Ok(margin / 2.0 * self.period())
    }

    /// Conduction duty of one push-pull side (inverting buffer semantics).
    pub fn conduction_duty(&self, side: Side) -> f64 {
        1.0 - self.duty(side)
    }

    pub fn duty(&self, side: Side) -> f64 {
        match side {
            Side::High => self.duty_high,
            Side::Low => self.duty_low,
        }
    }

    fn pulse(&self, side: Side) -> Pulse {
        let period = self.period();
        match side {
            Side::High => Pulse {
                rise_at: 0.0,
                width: self.duty_high * period,
            },
            Side::Low => {
                let dead = (self.duty_high + self.duty_low - 1.0).max(0.0) / 2.0 * period;
                let rise = dead + (1.0 - self.duty_low) * period + self.phase_offset * period;
                Pulse {
                    rise_at: rise.rem_euclid(period),
                    width: self.duty_low * period,
                }
            }
        }
    }

    /// Time since the latest rising-edge start of `side`, in `[0, period)`.
    fn phase(&self, side: Side, t: f64) -> (f64, Pulse) {
        let pulse = self.pulse(side);
        let u = (t - pulse.rise_at).rem_euclid(self.period());
        (u, pulse)
    }

    /// Input voltage of one side at time `t`.
    pub fn value(&self, side: Side, t: f64) -> f64 {
        let (u, pulse) = self.phase(side, t);
        let tr = self.rise_fall_s;
        let (lo, hi) = (self.logic_low_v, self.logic_high_v);
        if u < tr {
            lo + (hi - lo) * (u / tr)
        } else if u < pulse.width {
            hi
        } else if u < pulse.width + tr {
            hi - (hi - lo) * ((u - pulse.width) / tr)
        } else {
            lo
        }
    }

    /// Both control inputs at time `t`.
    pub fn eval_control(&self, t: f64) -> (f64, f64) {
        (self.value(Side::High, t), self.value(Side::Low, t))
    }

    /// Logic level an ideal mid-rail comparator sees at time `t`.
    ///
    /// Switches exactly half-way through each input ramp.
    pub fn logic_level(&self, side: Side, t: f64) -> bool {
        let (u, pulse) = self.phase(side, t);
        let half = self.rise_fall_s / 2.0;
        u >= half && u < pulse.width + half
    }

    /// Starts of all input transitions with `t0 <= time < t1`, in time order.
    pub fn edge_schedule(&self, t0: f64, t1: f64) -> Vec<Edge> {
        let mut edges = Vec::new();
        if !(t1 > t0) {
            return edges;
        }
        let period = self.period();
        for side in Side::BOTH {
            let pulse = self.pulse(side);
            let offsets = [
                (pulse.rise_at, Direction::Rising),
                ((pulse.rise_at + pulse.width).rem_euclid(period), Direction::Falling),
            ];
            for (offset, direction) in offsets {
                let first = ((t0 - offset) / period).floor() as i64 - 1;
                let mut k = first;
                loop {
                    let time = offset + k as f64 * period;
                    if time >= t1 {
                        break;
                    }
                    if time >= t0 {
                        edges.push(Edge {
                            time,
                            side,
                            direction,
                        });
                    }
                    k += 1;
                }
            }
        }
        edges.sort_by(|a, b| a.time.total_cmp(&b.time).then(a.side.cmp(&b.side)));
        edges
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(f: f64, dh: f64, dl: f64) -> PwmSpec {
        PwmSpec::new(f, dh, dl).unwrap()
    }

    #[test]
    fn high_side_is_high_a_quarter_period_in() {
        let s = spec(20e6, 0.55, 0.55);
        let t = 0.25 * s.period();
        assert_eq!(s.eval_control(t).0, 5.0);
    }

    #[test]
    fn flat_segment_is_exact() {
        let mut s = spec(1e6, 1.0 - 1e-3, 0.5);
        s.logic_low_v = 0.3;
        s.logic_high_v = 4.7;
        s.rise_fall_s = 0.0;
        for k in 1..50 {
            let t = k as f64 / 50.0 * s.duty_high * s.period();
            assert_eq!(s.value(Side::High, t), 4.7);
        }
    }

    #[test]
    fn mean_matches_trapezoid_area() {
        let s = spec(1e6, 0.6, 0.6);
        let n = 10_001;
        let period = s.period();
        let mean: f64 = (0..n)
            .map(|k| s.value(Side::High, k as f64 * period / (n - 1) as f64))
            .sum::<f64>()
            / n as f64;
        let expected = s.logic_low_v + 0.6 * (s.logic_high_v - s.logic_low_v);
        assert!((mean - expected).abs() / expected < 1e-3, "{mean} vs {expected}");
    }

    #[test]
    fn dead_time_values() {
        assert_eq!(spec(1e6, 0.5, 0.5).dead_time().unwrap(), 0.0);
        let d = spec(20e6, 0.55, 0.55).dead_time().unwrap();
        assert!((d - 2.5e-9).abs() < 1e-18);
        let d = spec(14e6, 0.6, 0.6).dead_time().unwrap();
        assert!((d - 0.1 / 14e6).abs() < 1e-18, "{d}");
    }

    #[test]
    fn overlapping_duties_rejected() {
        assert!(matches!(
            PwmSpec::new(1e6, 0.3, 0.3),
            Err(Error::Overlap { .. })
        ));
        let s = PwmSpec {
            duty_high: 0.4,
            duty_low: 0.5,
            ..PwmSpec::default()
        };
        assert!(matches!(s.dead_time(), Err(Error::Overlap { .. })));
    }

    #[test]
    fn one_period_has_two_edges_per_side() {
        let s = spec(20e6, 0.55, 0.55);
        let edges = s.edge_schedule(0.0, s.period());
        assert_eq!(edges.len(), 4);
        for side in Side::BOTH {
            assert_eq!(edges.iter().filter(|e| e.side == side).count(), 2);
        }
    }

    #[test]
    fn ten_periods_at_14mhz() {
        let s = spec(14e6, 0.6, 0.6);
        let period = s.period();
        let edges = s.edge_schedule(0.0, 10.0 * period);
        assert_eq!(edges.len(), 40);
        let dead = s.dead_time().unwrap();
        // Low input rises (low side stops conducting), high input falls a
        // dead time later.
        for w in edges.windows(2) {
            let gap = w[1].time - w[0].time;
            if w[0].side != w[1].side {
                assert!(
                    (gap - dead).abs() < 1e-15 || gap > dead,
                    "cross-side gap {gap:e} below dead time {dead:e}"
                );
            }
        }
        let hi_fall = edges
            .iter()
            .find(|e| e.side == Side::High && e.direction == Direction::Falling)
            .unwrap();
        let lo_rise = edges
            .iter()
            .find(|e| e.side == Side::Low && e.direction == Direction::Rising)
            .unwrap();
        assert!(((hi_fall.time - lo_rise.time) - dead).abs() < 1e-15);
    }

    #[test]
    fn empty_window_between_edges() {
        let s = spec(20e6, 0.55, 0.55);
        assert!(s.edge_schedule(0.1e-9, 1.0e-9).is_empty());
    }

    #[test]
    fn logic_switches_mid_ramp() {
        let s = spec(1e6, 0.5, 0.5);
        assert!(!s.logic_level(Side::High, 0.49e-9));
        assert!(s.logic_level(Side::High, 0.51e-9));
        assert!(!s.logic_level(Side::High, -1e-12));
    }
}
