//! Experiments: a base scenario expanded into points, each run to periodic
//! steady state and reduced to named metrics that bounds are checked against.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use crate::chain::{supply_from_trace, ChainSystem, Load, Scenario, SupplyCurrent, Topology};
use crate::error::{Error, Result};
use crate::load::switching_times;
use crate::metrics::{power_stats, waveform_stats, PowerStats, StatsKind, StatsRow, WaveformStats};
use crate::signal::Side;
use crate::solver::Trace;

use super::config::{is_numeric_key, ConfigDoc, Entry};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Single,
    Sweep,
    Variants,
}

/// A numeric parameter and the values it takes.
#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub param: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PlotSpec {
    /// Metric plotted against the sweep axis.
    pub metric: Option<String>,
    /// Nodes plotted against time for single and variant runs.
    pub nodes: Vec<String>,
    pub rule_y: Option<f64>,
    pub rule_label: String,
    pub y_label: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub kind: ExperimentKind,
    pub axis: Option<Axis>,
    /// Outer axis of a two-dimensional sweep; one plotted curve per value.
    pub series: Option<Axis>,
    /// Additional `(series value, axis value)` points outside the grid.
    pub extra_points: Vec<(f64, f64)>,
    pub variants: Vec<(String, Vec<Entry>)>,
    /// Nodes and stages reported; empty means all.
    pub nodes: Vec<String>,
    pub stages: Vec<String>,
    pub bounds: Vec<Bound>,
    pub plot: PlotSpec,
}

impl Default for Experiment {
    fn default() -> Self {
        Self {
            kind: ExperimentKind::Single,
            axis: None,
            series: None,
            extra_points: Vec::new(),
            variants: Vec::new(),
            nodes: Vec::new(),
            stages: Vec::new(),
            bounds: Vec::new(),
            plot: PlotSpec::default(),
        }
    }
}

fn list(value: &str) -> Vec<String> {
    value
        .split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect()
}

/// Parses a value list: `a, b, c` or the range `start:stop:count`.
pub fn parse_values(text: &str) -> std::result::Result<Vec<f64>, String> {
    let text = text.trim();
    if !text.contains(',') && text.matches(':').count() == 2 {
        let parts: Vec<&str> = text.split(':').collect();
        let a: f64 = parts[0].trim().parse().map_err(|_| format!("bad range start `{}`", parts[0]))?;
        let b: f64 = parts[1].trim().parse().map_err(|_| format!("bad range stop `{}`", parts[1]))?;
        let n: usize = parts[2].trim().parse().map_err(|_| format!("bad range count `{}`", parts[2]))?;
        if n == 0 {
            return Err("range count must be positive".into());
        }
        if n == 1 {
            return Ok(vec![a]);
        }
        return Ok((0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect());
    }
    let values: std::result::Result<Vec<f64>, String> = list(text)
        .iter()
        .map(|s| s.parse::<f64>().map_err(|_| format!("bad number `{s}`")))
        .collect();
    let values = values?;
    if values.is_empty() {
        return Err("empty value list".into());
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err("values must be finite".into());
    }
    Ok(values)
}

impl Experiment {
    pub fn from_doc(doc: &ConfigDoc) -> Result<Self> {
        let mut ex = Experiment::default();
        let mut variant_order: Vec<String> = Vec::new();
        let mut variant_entries: BTreeMap<String, Vec<Entry>> = BTreeMap::new();
        let mut param = None;
        let mut values = None;
        let mut series_param = None;
        let mut series_values = None;
        for e in &doc.entries {
            let key = e.key.as_str();
            if let Some(rest) = key.strip_prefix("variant.") {
                let Some((name, inner)) = rest.split_once('.') else {
                    return Err(e.parse_error("expected `variant.<name>.<key>`"));
                };
                if !variant_order.iter().any(|n| n == name) {
                    variant_order.push(name.to_string());
                }
                variant_entries.entry(name.to_string()).or_default().push(Entry {
                    key: inner.to_string(),
                    ..e.clone()
                });
                continue;
            }
            if let Some(name) = key.strip_prefix("bound.") {
                ex.bounds.push(Bound::parse(name, &e.value).map_err(|r| e.parse_error(r))?);
                continue;
            }
            let values_of = |e: &Entry| parse_values(&e.value).map_err(|r| e.parse_error(r));
            match key {
                "experiment.kind" => {
                    ex.kind = match e.value.as_str() {
                        "single" => ExperimentKind::Single,
                        "sweep" => ExperimentKind::Sweep,
                        "variants" => ExperimentKind::Variants,
                        other => return Err(e.parse_error(format!("unknown experiment kind `{other}`"))),
                    }
                }
                "experiment.param" => param = Some(e.clone()),
                "experiment.values" => values = Some(values_of(e)?),
                "experiment.series_param" => series_param = Some(e.clone()),
                "experiment.series_values" => series_values = Some(values_of(e)?),
                "experiment.extra_points" => {
                    ex.extra_points.clear();
                    for item in list(&e.value) {
                        let pair = parse_point_coords(&item)
                            .filter(|c| c.len() == 2)
                            .ok_or_else(|| e.parse_error(format!("bad point `{item}`")))?;
                        ex.extra_points.push((pair[0], pair[1]));
                    }
                }
                "experiment.nodes" => ex.nodes = list(&e.value),
                "experiment.stages" => ex.stages = list(&e.value),
                "plot.metric" => ex.plot.metric = Some(e.value.clone()),
                "plot.nodes" => ex.plot.nodes = list(&e.value),
                "plot.rule_y" => {
                    ex.plot.rule_y = Some(
                        e.value
                            .parse()
                            .map_err(|_| e.parse_error("plot.rule_y needs a number"))?,
                    )
                }
                "plot.rule_label" => ex.plot.rule_label = e.value.clone(),
                "plot.y_label" => ex.plot.y_label = e.value.clone(),
                "description" => {}
                k if k.starts_with("experiment.") || k.starts_with("plot.") => {
                    return Err(Error::Validation {
                        key: k.to_string(),
                        reason: "unknown key".into(),
                    })
                }
                _ => {}
            }
        }
        let axis = |p: Option<Entry>, v: Option<Vec<f64>>, what: &str| -> Result<Option<Axis>> {
            match (p, v) {
                (None, None) => Ok(None),
                (Some(p), Some(values)) => {
                    if !is_numeric_key(&p.value) {
                        return Err(Error::BadParamPath(p.value));
                    }
                    Ok(Some(Axis {
                        param: p.value,
                        values,
                    }))
                }
                _ => Err(Error::Validation {
                    key: format!("experiment.{what}"),
                    reason: "parameter and values must be given together".into(),
                }),
            }
        };
        ex.axis = axis(param, values, "param")?;
        ex.series = axis(series_param, series_values, "series_param")?;
        ex.variants = variant_order
            .into_iter()
            .map(|n| {
                let entries = variant_entries.remove(&n).unwrap_or_default();
                (n, entries)
            })
            .collect();
        match ex.kind {
            ExperimentKind::Sweep if ex.axis.is_none() => {
                return Err(Error::Validation {
                    key: "experiment.param".into(),
                    reason: "a sweep needs experiment.param and experiment.values".into(),
                })
            }
            ExperimentKind::Variants if ex.variants.is_empty() => {
                return Err(Error::Validation {
                    key: "variant".into(),
                    reason: "a variants experiment needs at least one variant".into(),
                })
            }
            _ => {}
        }
        Ok(ex)
    }

    /// Expands the experiment into points in report order.
    pub fn points(&self) -> Vec<Point> {
        let entry = |key: &str, v: f64| Entry {
            key: key.to_string(),
            value: format!("{v}"),
            origin: "sweep".into(),
            line: 0,
        };
        match self.kind {
            ExperimentKind::Single => vec![Point {
                label: "run".into(),
                coords: Vec::new(),
                overrides: Vec::new(),
                param: String::new(),
                value: None,
                plotted: true,
            }],
            ExperimentKind::Variants => self
                .variants
                .iter()
                .map(|(name, entries)| Point {
                    label: name.clone(),
                    coords: Vec::new(),
                    overrides: entries.clone(),
                    param: "variant".into(),
                    value: None,
                    plotted: true,
                })
                .collect(),
            ExperimentKind::Sweep => {
                let axis = self.axis.as_ref().expect("sweep axis");
                let mut out = Vec::new();
                let mut push = |series: Option<f64>, v: f64, plotted: bool| {
                    let mut overrides = Vec::new();
                    let mut coords = Vec::new();
                    let mut label = String::new();
                    if let (Some(s), Some(sv)) = (&self.series, series) {
                        overrides.push(entry(&s.param, sv));
                        coords.push(sv);
                        label = format!("{}={sv}/", s.param);
                    }
                    overrides.push(entry(&axis.param, v));
                    coords.push(v);
                    label.push_str(&format!("{}={v}", axis.param));
                    out.push(Point {
                        label,
                        coords,
                        overrides,
                        param: axis.param.clone(),
                        value: Some(v),
                        plotted,
                    });
                };
                match &self.series {
                    Some(s) => {
                        for &sv in &s.values {
                            for &v in &axis.values {
                                push(Some(sv), v, true);
                            }
                        }
                        for &(sv, v) in &self.extra_points {
                            push(Some(sv), v, false);
                        }
                    }
                    None => {
                        for &v in &axis.values {
                            push(None, v, true);
                        }
                    }
                }
                out
            }
        }
    }
}

/// One scenario of an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub label: String,
    /// `[series value,] axis value` for sweep points.
    pub coords: Vec<f64>,
    pub overrides: Vec<Entry>,
    pub param: String,
    pub value: Option<f64>,
    /// False for extra points that are checked but not drawn.
    pub plotted: bool,
}

impl Point {
    pub fn matches(&self, reference: &str) -> bool {
        if reference == self.label {
            return true;
        }
        match parse_point_coords(reference) {
            Some(c) if c.len() == self.coords.len() && !c.is_empty() => c
                .iter()
                .zip(&self.coords)
                .all(|(a, b)| (a - b).abs() <= 1e-9 * a.abs().max(b.abs())),
            _ => false,
        }
    }

    pub fn series_value(&self) -> Option<f64> {
        (self.coords.len() == 2).then(|| self.coords[0])
    }
}

fn parse_point_coords(text: &str) -> Option<Vec<f64>> {
    text.split('/').map(|s| s.trim().parse::<f64>().ok()).collect()
}

/// Everything measured at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointData {
    pub trace: Trace,
    pub periods: usize,
    pub residual: f64,
    pub waveforms: Vec<(String, Result<WaveformStats>)>,
    pub stages: Vec<(String, PowerStats)>,
    pub supply: Option<SupplyCurrent>,
    pub metrics: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointResult {
    pub point: Point,
    pub scenario_label: String,
    pub outcome: Result<PointData>,
}

/// Rail a node is measured against for overshoot.
pub fn node_rail(sc: &Scenario, node: &str) -> f64 {
    let side = if node.ends_with("_hi") {
        Side::High
    } else {
        Side::Low
    };
    match node {
        n if n.starts_with("v_ctrl") => sc.pwm.logic_high_v,
        n if n.starts_with("v_iso") || n.starts_with("v_tp") || n.starts_with("v_gate_gan") => {
            sc.totem(side).rail_v
        }
        "v_ds_sic" => match &sc.load {
            Load::HardSwitch(c) => c.v_link_v,
            Load::Open { .. } => sc.pushpull.rail_v,
        },
        _ => sc.pushpull.rail_v,
    }
}

const WAVEFORM_FIELDS: [&str; 7] = [
    "v_max",
    "v_min",
    "overshoot_v",
    "rise_10_90_s",
    "fall_10_90_s",
    "measured_duty",
    "avg",
];

fn waveform_values(w: &WaveformStats) -> [f64; 7] {
    [
        w.v_max,
        w.v_min,
        w.overshoot_v,
        w.rise_10_90_s,
        w.fall_10_90_s,
        w.measured_duty,
        w.avg,
    ]
}

fn power_values(p: &PowerStats) -> [(&'static str, f64); 5] {
    [
        ("avg_rail_current_a", p.avg_rail_current_a),
        ("penetration_charge_c", p.penetration_charge_c),
        ("dissipation_w", p.dissipation_w),
        ("junction_temp_c", p.junction_temp_c),
        ("runaway", if p.runaway { 1.0 } else { 0.0 }),
    ]
}

/// Runs one scenario to PSS and measures it.
pub fn measure(sc: &Scenario, ex: &Experiment) -> Result<PointData> {
    let sys = ChainSystem::new(sc)?;
    let pss = sys.pss()?;
    let trace = pss.trace;
    let mut metrics = BTreeMap::new();
    metrics.insert("pss.periods".to_string(), pss.periods as f64);
    metrics.insert("pss.residual".to_string(), pss.residual);

    let nodes: Vec<String> = if ex.nodes.is_empty() {
        trace
            .nodes
            .iter()
            .map(|c| c.name.clone())
            .filter(|n| !n.starts_with("v_ctrl"))
            .collect()
    } else {
        ex.nodes.clone()
    };
    let mut waveforms = Vec::new();
    for node in nodes {
        let w = waveform_stats(&trace, &node, node_rail(sc, &node));
        if let Ok(w) = &w {
            for (f, v) in WAVEFORM_FIELDS.iter().zip(waveform_values(w)) {
                metrics.insert(format!("{node}.{f}"), v);
            }
        }
        waveforms.push((node, w));
    }

    let rails = sys.rails();
    let mut stages = Vec::new();
    let (mut e_rail, mut e_diss) = (0.0, 0.0);
    for (stage, rail_v) in &rails {
        let p = power_stats(&trace, stage, &sc.thermal)?;
        e_rail += rail_v * trace.branch(&format!("i_rail_{stage}"))?.total();
        e_diss += trace.power(&format!("p_{stage}"))?.total();
        if ex.stages.is_empty() || ex.stages.contains(stage) {
            for (f, v) in power_values(&p) {
                metrics.insert(format!("{stage}.{f}"), v);
            }
            stages.push((stage.clone(), p));
        }
    }
    if e_rail.abs() > 0.0 {
        metrics.insert("energy.balance_rel".into(), ((e_rail - e_diss) / e_rail).abs());
    }

    let supply = match sc.topology {
        Topology::DriverSide(side) => {
            let s = supply_from_trace(sc, side, &trace, pss.periods)?;
            metrics.insert("supply.avg_current_a".into(), s.avg_current_a);
            metrics.insert("supply.junction_temp_c".into(), s.junction_temp_c);
            metrics.insert("supply.runaway".into(), if s.runaway { 1.0 } else { 0.0 });
            Some(s)
        }
        Topology::Full => None,
    };

    if let (Topology::Full, Load::HardSwitch(_)) = (sc.topology, &sc.load) {
        if let Ok((t_on, t_off)) = switching_times(&trace) {
            metrics.insert("switch.t_on_s".into(), t_on);
            metrics.insert("switch.t_off_s".into(), t_off);
        }
        let gate = trace.branch("i_out")?;
        let net = gate.total();
        let per_edge = 0.5 * abs_integral(&trace.times, &gate.values);
        if per_edge > 0.0 {
            metrics.insert("charge.gate_net_rel".into(), net.abs() / per_edge);
        }
    }
    if let Ok(ch) = trace.branch("i_shoot_pushpull") {
        metrics.insert("pushpull.penetration_charge_c".into(), ch.total());
    }

    Ok(PointData {
        trace,
        periods: pss.periods,
        residual: pss.residual,
        waveforms,
        stages,
        supply,
        metrics,
    })
}

/// Trapezoidal integral of `|values|`, splitting intervals at sign changes.
fn abs_integral(times: &[f64], values: &[f64]) -> f64 {
    let mut acc = 0.0;
    for k in 1..values.len() {
        let (a, b) = (values[k - 1], values[k]);
        let dt = times[k] - times[k - 1];
        acc += if a * b >= 0.0 {
            0.5 * dt * (a.abs() + b.abs())
        } else {
            0.5 * dt * (a * a + b * b) / (a.abs() + b.abs())
        };
    }
    acc
}

/// Number of sweep workers: `GATEWAVE_WORKERS`, else the processor count.
pub fn default_workers() -> usize {
    std::env::var("GATEWAVE_WORKERS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|n| *n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

/// Runs `f` over `items` on up to `workers` threads; results keep item order.
pub fn run_indexed<T: Sync, R: Send>(items: &[T], workers: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let workers = workers.clamp(1, items.len().max(1));
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                slots.lock().expect("result slots")[i] = Some(r);
            });
        }
    });
    slots
        .into_inner()
        .expect("result slots")
        .into_iter()
        .map(|r| r.expect("every item ran"))
        .collect()
}

/// Builds and measures every point of `ex` on `workers` threads.
pub fn run_experiment(doc: &ConfigDoc, ex: &Experiment, workers: usize) -> Result<Vec<PointResult>> {
    // Configuration errors surface before any work starts.
    let base = doc.scenario()?;
    let points = ex.points();
    let scenarios: Vec<Scenario> = points
        .iter()
        .map(|p| doc.scenario_with(&p.overrides))
        .collect::<Result<_>>()?;
    let jobs: Vec<(Point, Scenario)> = points.into_iter().zip(scenarios).collect();
    Ok(run_indexed(&jobs, workers, |(point, sc)| PointResult {
        point: point.clone(),
        scenario_label: base.label.clone(),
        outcome: measure(sc, ex).map_err(|e| e.context(format!("point {}", point.label))),
    }))
}

/// Result of a one-parameter sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub axis: Axis,
    pub rows: Vec<PointResult>,
}

/// Independent PSS runs of `doc` for each value of `param`, in input order.
pub fn sweep(doc: &ConfigDoc, param: &str, values: &[f64], workers: usize) -> Result<SweepResult> {
    if !is_numeric_key(param) {
        return Err(Error::BadParamPath(param.to_string()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation {
            key: param.to_string(),
            reason: "sweep values must be finite".into(),
        });
    }
    let ex = Experiment {
        kind: ExperimentKind::Sweep,
        axis: Some(Axis {
            param: param.to_string(),
            values: values.to_vec(),
        }),
        ..sweep_defaults(doc)?
    };
    let rows = run_experiment(doc, &ex, workers)?;
    Ok(SweepResult {
        axis: ex.axis.expect("axis"),
        rows,
    })
}

/// Experiment settings of `doc` other than its axes.
fn sweep_defaults(doc: &ConfigDoc) -> Result<Experiment> {
    let ex = Experiment::from_doc(doc)?;
    Ok(Experiment {
        kind: ExperimentKind::Sweep,
        axis: None,
        series: None,
        extra_points: Vec::new(),
        variants: Vec::new(),
        bounds: Vec::new(),
        ..ex
    })
}

/// Stats rows of all points, in point order.
pub fn stats_rows(results: &[PointResult]) -> Vec<StatsRow> {
    let mut rows = Vec::new();
    for r in results {
        let scenario = match (r.point.param.as_str(), r.point.series_value()) {
            ("variant", _) => format!("{}[{}]", r.scenario_label, r.point.label),
            (_, Some(_)) => format!(
                "{}[{}]",
                r.scenario_label,
                r.point.label.split('/').next().unwrap_or("")
            ),
            _ => r.scenario_label.clone(),
        };
        let row = |name: &str, status: String, kind: StatsKind| StatsRow {
            scenario: scenario.clone(),
            param: r.point.param.clone(),
            value: r.point.value,
            name: name.to_string(),
            status,
            kind,
        };
        match &r.outcome {
            Err(e) => rows.push(row("*", csv_safe(&e.to_string()), StatsKind::Stage(None))),
            Ok(d) => {
                for (node, w) in &d.waveforms {
                    match w {
                        Ok(w) => rows.push(row(node, "ok".into(), StatsKind::Node(Some(*w)))),
                        Err(e) => rows.push(row(node, csv_safe(&e.to_string()), StatsKind::Node(None))),
                    }
                }
                for (stage, p) in &d.stages {
                    rows.push(row(stage, "ok".into(), StatsKind::Stage(Some(*p))));
                }
                if let Some(s) = &d.supply {
                    let p = PowerStats {
                        avg_rail_current_a: s.avg_current_a,
                        penetration_charge_c: s.totem.penetration_charge_c,
                        dissipation_w: s.isolator.dissipation_w + s.totem.dissipation_w,
                        junction_temp_c: s.junction_temp_c,
                        runaway: s.runaway,
                    };
                    rows.push(row("supply", "ok".into(), StatsKind::Stage(Some(p))));
                }
            }
        }
    }
    rows
}

fn csv_safe(text: &str) -> String {
    text.replace([',', '\n', '"'], ";")
}

// ---------------------------------------------------------------------------
// Bounds

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    Ge,
    Le,
    Gt,
    Lt,
    Eq,
}

impl Op {
    fn parse(s: &str) -> Option<Op> {
        Some(match s {
            ">=" => Op::Ge,
            "<=" => Op::Le,
            ">" => Op::Gt,
            "<" => Op::Lt,
            "==" => Op::Eq,
            _ => return None,
        })
    }

    fn holds(self, a: f64, b: f64) -> bool {
        match self {
            Op::Ge => a >= b,
            Op::Le => a <= b,
            Op::Gt => a > b,
            Op::Lt => a < b,
            Op::Eq => a == b,
        }
    }
}

/// `metric@point`; without a point the experiment must have exactly one.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRef {
    pub metric: String,
    pub point: Option<String>,
}

impl MetricRef {
    fn parse(text: &str) -> MetricRef {
        match text.split_once('@') {
            Some((m, p)) => MetricRef {
                metric: m.to_string(),
                point: Some(p.to_string()),
            },
            None => MetricRef {
                metric: text.to_string(),
                point: None,
            },
        }
    }

    fn lookup(&self, results: &[PointResult]) -> std::result::Result<f64, String> {
        let point = match &self.point {
            Some(p) => results
                .iter()
                .find(|r| r.point.matches(p))
                .ok_or_else(|| format!("no point `{p}`"))?,
            None if results.len() == 1 => &results[0],
            None => return Err(format!("`{}` needs an @point", self.metric)),
        };
        match &point.outcome {
            Err(e) => Err(format!("point {} failed: {e}", point.point.label)),
            Ok(d) => d
                .metrics
                .get(&self.metric)
                .copied()
                .ok_or_else(|| format!("metric `{}` unavailable at {}", self.metric, point.point.label)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BoundKind {
    /// `metric@point op number`
    Compare { lhs: MetricRef, op: Op, value: f64 },
    /// `metric@point in lo hi`
    Within { lhs: MetricRef, lo: f64, hi: f64 },
    /// `metric@a op metric@b`
    Order { lhs: MetricRef, op: Op, rhs: MetricRef },
    /// `nondecreasing metric`, `monotone metric` (also across series),
    /// `nonincreasing metric from value`
    Trend {
        metric: String,
        decreasing: bool,
        across_series: bool,
        from: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bound {
    pub name: String,
    pub expr: String,
    pub kind: BoundKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundOutcome {
    pub name: String,
    pub expr: String,
    pub pass: bool,
    pub detail: String,
}

impl Bound {
    pub fn parse(name: &str, expr: &str) -> std::result::Result<Bound, String> {
        let tokens: Vec<&str> = expr.split_whitespace().collect();
        let bad = || format!("cannot parse bound `{expr}`");
        let number = |s: &str| -> std::result::Result<f64, String> {
            match s {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                _ => s.parse().map_err(|_| format!("bad number `{s}` in bound `{expr}`")),
            }
        };
        let kind = match tokens.as_slice() {
            [word @ ("nondecreasing" | "monotone"), metric] => BoundKind::Trend {
                metric: metric.to_string(),
                decreasing: false,
                across_series: *word == "monotone",
                from: None,
            },
            ["nonincreasing", metric] => BoundKind::Trend {
                metric: metric.to_string(),
                decreasing: true,
                across_series: false,
                from: None,
            },
            ["nonincreasing", metric, "from", v] => BoundKind::Trend {
                metric: metric.to_string(),
                decreasing: true,
                across_series: false,
                from: Some(number(v)?),
            },
            [lhs, "in", lo, hi] => BoundKind::Within {
                lhs: MetricRef::parse(lhs),
                lo: number(lo)?,
                hi: number(hi)?,
            },
            [lhs, op, rhs] => {
                let op = Op::parse(op).ok_or_else(bad)?;
                let lhs = MetricRef::parse(lhs);
                if rhs.contains('@') {
                    BoundKind::Order {
                        lhs,
                        op,
                        rhs: MetricRef::parse(rhs),
                    }
                } else {
                    BoundKind::Compare {
                        lhs,
                        op,
                        value: number(rhs)?,
                    }
                }
            }
            _ => return Err(bad()),
        };
        Ok(Bound {
            name: name.to_string(),
            expr: expr.to_string(),
            kind,
        })
    }

    pub fn check(&self, results: &[PointResult]) -> BoundOutcome {
        let (pass, detail) = match self.evaluate(results) {
            Ok(v) => v,
            Err(reason) => (false, reason),
        };
        BoundOutcome {
            name: self.name.clone(),
            expr: self.expr.clone(),
            pass,
            detail,
        }
    }

    fn evaluate(&self, results: &[PointResult]) -> std::result::Result<(bool, String), String> {
        match &self.kind {
            BoundKind::Compare { lhs, op, value } => {
                let a = lhs.lookup(results)?;
                Ok((op.holds(a, *value), format!("value {a:.6e}")))
            }
            BoundKind::Within { lhs, lo, hi } => {
                let a = lhs.lookup(results)?;
                Ok((a >= *lo && a <= *hi, format!("value {a:.6e}")))
            }
            BoundKind::Order { lhs, op, rhs } => {
                let a = lhs.lookup(results)?;
                let b = rhs.lookup(results)?;
                Ok((op.holds(a, b), format!("{a:.6e} vs {b:.6e}")))
            }
            BoundKind::Trend {
                metric,
                decreasing,
                across_series,
                from,
            } => trend(results, metric, *decreasing, *across_series, *from),
        }
    }
}

fn trend(
    results: &[PointResult],
    metric: &str,
    decreasing: bool,
    across_series: bool,
    from: Option<f64>,
) -> std::result::Result<(bool, String), String> {
    // (series, axis value, metric)
    let mut grid: Vec<(Option<f64>, f64, f64)> = Vec::new();
    for r in results.iter().filter(|r| r.point.plotted) {
        let Some(v) = r.point.value else {
            return Err("trend bounds need a sweep".into());
        };
        if from.is_some_and(|f| v < f) {
            continue;
        }
        let m = MetricRef {
            metric: metric.to_string(),
            point: None,
        }
        .lookup(std::slice::from_ref(r))?;
        grid.push((r.point.series_value(), v, m));
    }
    let ok = |a: f64, b: f64| if decreasing { b <= a } else { b >= a };
    let mut violations = Vec::new();
    let check_line = |line: &mut Vec<(f64, f64)>, tag: String, violations: &mut Vec<String>| {
        line.sort_by(|a, b| a.0.total_cmp(&b.0));
        for w in line.windows(2) {
            if !ok(w[0].1, w[1].1) {
                violations.push(format!("{tag}: {:.4e} -> {:.4e} at {} -> {}", w[0].1, w[1].1, w[0].0, w[1].0));
            }
        }
    };
    let mut series: Vec<Option<f64>> = grid.iter().map(|g| g.0).collect();
    series.dedup();
    for s in &series {
        let mut line: Vec<(f64, f64)> = grid.iter().filter(|g| g.0 == *s).map(|g| (g.1, g.2)).collect();
        let tag = s.map(|v| format!("series {v}")).unwrap_or_else(|| "axis".into());
        check_line(&mut line, tag, &mut violations);
    }
    if across_series {
        let mut values: Vec<f64> = grid.iter().map(|g| g.1).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for v in values {
            let mut line: Vec<(f64, f64)> = grid
                .iter()
                .filter(|g| g.1 == v)
                .filter_map(|g| g.0.map(|s| (s, g.2)))
                .collect();
            check_line(&mut line, format!("value {v}"), &mut violations);
        }
    }
    if violations.is_empty() {
        Ok((true, format!("{} points", grid.len())))
    } else {
        Ok((false, violations.join("; ")))
    }
}

pub fn check_bounds(ex: &Experiment, results: &[PointResult]) -> Vec<BoundOutcome> {
    ex.bounds.iter().map(|b| b.check(results)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::Path;

    #[test]
    fn value_lists_and_ranges() {
        assert_eq!(parse_values("1, 2,3").unwrap(), vec![1.0, 2.0, 3.0]);
        assert_eq!(parse_values("0:1:3").unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(parse_values("5:9:1").unwrap(), vec![5.0]);
        assert!(parse_values("").is_err());
        assert!(parse_values("a,b").is_err());
        assert!(parse_values("0:1:0").is_err());
    }

    #[test]
    fn bound_grammar() {
        assert!(matches!(
            Bound::parse("a", "v_gs_sic.v_max >= 17.1").unwrap().kind,
            BoundKind::Compare { op: Op::Ge, .. }
        ));
        assert!(matches!(
            Bound::parse("a", "supply.avg_current_a@4.5/1e7 in 0.16 0.24").unwrap().kind,
            BoundKind::Within { .. }
        ));
        assert!(matches!(
            Bound::parse("a", "v_out.overshoot_v@a > v_out.overshoot_v@b").unwrap().kind,
            BoundKind::Order { .. }
        ));
        assert!(matches!(
            Bound::parse("a", "nonincreasing x from 2e7").unwrap().kind,
            BoundKind::Trend { decreasing: true, from: Some(_), .. }
        ));
        assert!(Bound::parse("a", "x ~ 3").is_err());
    }

    #[test]
    fn points_of_a_grid() {
        let doc = ConfigDoc::parse_str(
            "experiment.kind = sweep\n\
             experiment.param = pwm.frequency_hz\n\
             experiment.values = 1e6, 2e6\n\
             experiment.series_param = rails.v_dsil\n\
             experiment.series_values = 3, 4\n\
             experiment.extra_points = 3.8/2e7\n",
            Path::new("t"),
        )
        .unwrap();
        let ex = Experiment::from_doc(&doc).unwrap();
        let pts = ex.points();
        assert_eq!(pts.len(), 5);
        assert_eq!(pts[1].coords, vec![3.0, 2e6]);
        assert!(pts[1].matches("3/2e6"));
        assert!(pts[4].matches("3.8/20000000"));
        assert!(!pts[4].plotted);
    }

    #[test]
    fn unknown_sweep_path() {
        let doc = ConfigDoc::parse_str("", Path::new("t")).unwrap();
        assert!(matches!(sweep(&doc, "pwm.bogus", &[1.0], 1), Err(Error::BadParamPath(_))));
    }

    #[test]
    fn indexed_pool_keeps_order() {
        let items: Vec<u64> = (0..50).collect();
        let out = run_indexed(&items, 7, |x| x * x);
        assert_eq!(out, items.iter().map(|x| x * x).collect::<Vec<_>>());
        assert!(run_indexed(&Vec::<u64>::new(), 4, |x| *x).is_empty());
    }
}
