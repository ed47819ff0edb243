use std::fmt::Write as _;

use crate::error::{Error, Result};

/// One named time series with its running integral.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    pub name: String,
    pub values: Vec<f64>,
    /// `integral[k]` is the integral of the channel from `times[0]` to
    /// `times[k]`. The solver accumulates it step by step with the discrete
    /// mode of each step, so jumps at switching instants are integrated
    /// exactly.
    pub integral: Vec<f64>,
}

impl Channel {
    fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            values: Vec::new(),
            integral: Vec::new(),
        }
    }

    pub fn total(&self) -> f64 {
        self.integral.last().copied().unwrap_or(0.0)
    }
}

/// Time-stamped node voltages, branch currents and dissipated powers.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trace {
    pub times: Vec<f64>,
    pub nodes: Vec<Channel>,
    pub branches: Vec<Channel>,
    pub powers: Vec<Channel>,
    pub events: Vec<(f64, String)>,
}

/// Names of the quantities a system reports at every sample.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ProbeNames {
    pub nodes: Vec<String>,
    pub branches: Vec<String>,
    pub powers: Vec<String>,
}

impl ProbeNames {
    pub fn len(&self) -> usize {
        self.nodes.len() + self.branches.len() + self.powers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl Trace {
    pub fn with_probes(names: &ProbeNames) -> Self {
        let mk = |v: &Vec<String>| v.iter().map(|n| Channel::new(n)).collect();
        Self {
            times: Vec::new(),
            nodes: mk(&names.nodes),
            branches: mk(&names.branches),
            powers: mk(&names.powers),
            events: Vec::new(),
        }
    }

    /// Builds a trace from samples, integrating every channel with the
    /// trapezoidal rule.
    pub fn from_samples(
        times: Vec<f64>,
        nodes: Vec<(&str, Vec<f64>)>,
        branches: Vec<(&str, Vec<f64>)>,
    ) -> Self {
        let build = |series: Vec<(&str, Vec<f64>)>| -> Vec<Channel> {
            series
                .into_iter()
                .map(|(name, values)| {
                    assert_eq!(values.len(), times.len(), "series `{name}` length");
                    let mut integral = Vec::with_capacity(values.len());
                    let mut acc = 0.0;
                    for k in 0..values.len() {
                        if k > 0 {
                            acc += 0.5 * (times[k] - times[k - 1]) * (values[k] + values[k - 1]);
                        }
                        integral.push(acc);
                    }
                    Channel {
                        name: name.to_string(),
                        values,
                        integral,
                    }
                })
                .collect()
        };
        let nodes = build(nodes);
        let branches = build(branches);
        Self {
            times,
            nodes,
            branches,
            powers: Vec::new(),
            events: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn span(&self) -> f64 {
        match (self.times.first(), self.times.last()) {
            (Some(a), Some(b)) => b - a,
            _ => 0.0,
        }
    }

    pub(crate) fn push_sample(&mut self, t: f64, probes: &[f64]) {
        let mut it = probes.iter();
        for ch in self
            .nodes
            .iter_mut()
            .chain(self.branches.iter_mut())
            .chain(self.powers.iter_mut())
        {
            ch.values.push(*it.next().expect("probe count"));
            let prev = ch.integral.last().copied();
            ch.integral.push(prev.unwrap_or(0.0));
        }
        self.times.push(t);
    }

    /// Adds `increments` (one per channel, same order as the probes) to the
    /// running integral of the latest sample.
    pub(crate) fn add_integrals(&mut self, increments: &[f64]) {
        for (ch, inc) in self
            .nodes
            .iter_mut()
            .chain(self.branches.iter_mut())
            .chain(self.powers.iter_mut())
            .zip(increments)
        {
            *ch.integral.last_mut().expect("sample") += inc;
        }
    }

    fn find<'a>(channels: &'a [Channel], name: &str) -> Result<&'a Channel> {
        channels
            .iter()
            .find(|c| c.name == name)
            .ok_or_else(|| Error::UnknownSignal(name.to_string()))
    }

    pub fn node(&self, name: &str) -> Result<&[f64]> {
        Self::find(&self.nodes, name).map(|c| c.values.as_slice())
    }

    pub fn node_channel(&self, name: &str) -> Result<&Channel> {
        Self::find(&self.nodes, name)
    }

    pub fn branch(&self, name: &str) -> Result<&Channel> {
        Self::find(&self.branches, name)
    }

    pub fn power(&self, name: &str) -> Result<&Channel> {
        Self::find(&self.powers, name)
    }

    /// Any channel by name.
    pub fn channel(&self, name: &str) -> Result<&Channel> {
        self.nodes
            .iter()
            .chain(&self.branches)
            .chain(&self.powers)
            .find(|c| c.name == name)
            .ok_or_else(|| Error::UnknownSignal(name.to_string()))
    }

    /// Linear interpolation of a channel at time `t` (clamped at the ends).
    pub fn sample(&self, name: &str, t: f64) -> Result<f64> {
        let ch = self.channel(name)?;
        Ok(interpolate(&self.times, &ch.values, t))
    }

    /// CSV with a `time_s` column followed by every channel; 12 significant
    /// digits in scientific notation.
    pub fn to_csv(&self) -> String {
        let channels: Vec<&Channel> = self
            .nodes
            .iter()
            .chain(&self.branches)
            .chain(&self.powers)
            .collect();
        let mut out = String::from("time_s");
        for ch in &channels {
            out.push(',');
            out.push_str(&ch.name);
        }
        out.push('\n');
        for (k, t) in self.times.iter().enumerate() {
            write!(out, "{}", fmt_sig12(*t)).unwrap();
            for ch in &channels {
                write!(out, ",{}", fmt_sig12(ch.values[k])).unwrap();
            }
            out.push('\n');
        }
        out
    }
}

/// Scientific notation with 12 significant digits.
pub fn fmt_sig12(v: f64) -> String {
    format!("{v:.11e}")
}

pub(crate) fn interpolate(times: &[f64], values: &[f64], t: f64) -> f64 {
    let n = times.len();
    if t <= times[0] {
        return values[0];
    }
    if t >= times[n - 1] {
        return values[n - 1];
    }
    let k = times.partition_point(|&x| x <= t);
    let (t0, t1) = (times[k - 1], times[k]);
    let w = (t - t0) / (t1 - t0);
    values[k - 1] + w * (values[k] - values[k - 1])
}
