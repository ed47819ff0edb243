//! The assembled drive chain as one ODE system.
//!
//! Per side: isolator output node (loaded by the totem-pole input), the
//! totem-pole drain node, the gate loop to the GaN gate and the GaN gate
//! node. The push-pull switch node then feeds the load through the output
//! link. A [`Topology::DriverSide`] chain stops at one GaN gate.

use crate::error::{Error, Result};
use crate::load::{channel_current, HardSwitchCircuit};
use crate::metrics::{power_stats, PowerStats};
use crate::signal::{PwmSpec, Side};
use crate::solver::{newton_solve, run_to_pss, OdeSystem, ProbeNames, Pss, SolverOptions};
use crate::stages::{
    isolator_rhs, pushpull_currents, pushpull_rhs, totem_currents, GanPushPullModel,
    IsolatorModel, SeriesLink, ThermalModel, TotemPoleModel,
};

/// What the push-pull output drives.
#[derive(Debug, Clone, PartialEq)]
pub enum Load {
    /// Nothing but probe and pad capacitance.
    Open { cap_f: f64 },
    HardSwitch(HardSwitchCircuit),
}

impl Default for Load {
    fn default() -> Self {
        Load::HardSwitch(HardSwitchCircuit::default())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Topology {
    #[default]
    Full,
    /// Isolator, totem-pole and GaN gate of one side only.
    DriverSide(Side),
}

impl Topology {
    pub fn name(self) -> &'static str {
        match self {
            Topology::Full => "full",
            Topology::DriverSide(Side::High) => "driver_hi",
            Topology::DriverSide(Side::Low) => "driver_lo",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "full" => Some(Topology::Full),
            "driver_hi" => Some(Topology::DriverSide(Side::High)),
            "driver_lo" => Some(Topology::DriverSide(Side::Low)),
            _ => None,
        }
    }
}

/// A complete chain and load configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub label: String,
    pub pwm: PwmSpec,
    pub isolator_hi: IsolatorModel,
    pub isolator_lo: IsolatorModel,
    pub totem_hi: TotemPoleModel,
    pub totem_lo: TotemPoleModel,
    pub pushpull: GanPushPullModel,
    pub thermal: ThermalModel,
    pub load: Load,
    pub solver: SolverOptions,
    pub topology: Topology,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            label: "default".to_string(),
            pwm: PwmSpec::default(),
            isolator_hi: IsolatorModel::default(),
            isolator_lo: IsolatorModel::default(),
            totem_hi: TotemPoleModel::default(),
            totem_lo: TotemPoleModel::default(),
            pushpull: GanPushPullModel::default(),
            thermal: ThermalModel::default(),
            load: Load::default(),
            solver: SolverOptions::default(),
            topology: Topology::Full,
        }
    }
}

impl Scenario {
    pub fn isolator(&self, side: Side) -> &IsolatorModel {
        match side {
            Side::High => &self.isolator_hi,
            Side::Low => &self.isolator_lo,
        }
    }

    pub fn totem(&self, side: Side) -> &TotemPoleModel {
        match side {
            Side::High => &self.totem_hi,
            Side::Low => &self.totem_lo,
        }
    }

    pub fn sides(&self) -> &'static [Side] {
        match self.topology {
            Topology::Full => &Side::BOTH,
            Topology::DriverSide(Side::High) => &[Side::High],
            Topology::DriverSide(Side::Low) => &[Side::Low],
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.pwm.validate()?;
        self.pwm.dead_time()?;
        for side in Side::BOTH {
            self.isolator(side).validate()?;
            self.totem(side).validate()?;
            if self.isolator(side).rail_v != self.totem(side).rail_v {
                return Err(Error::invalid(
                    "scenario",
                    format!(
                        "{}-side totem-pole rail ({} V) differs from its isolator rail ({} V)",
                        side.suffix(),
                        self.totem(side).rail_v,
                        self.isolator(side).rail_v
                    ),
                ));
            }
        }
        self.pushpull.validate()?;
        self.thermal.validate()?;
        self.solver.validate()?;
        match &self.load {
            Load::Open { cap_f } => {
                if !(*cap_f > 0.0) {
                    return Err(Error::invalid("open load", "cap_f must be positive"));
                }
            }
            Load::HardSwitch(c) => c.validate()?,
        }
        Ok(())
    }

    pub fn period(&self) -> f64 {
        self.pwm.period()
    }
}

fn idx(side: Side) -> usize {
    match side {
        Side::High => 0,
        Side::Low => 1,
    }
}

const V_CTRL: [&str; 2] = ["v_ctrl_hi", "v_ctrl_lo"];
const V_ISO: [&str; 2] = ["v_iso_hi", "v_iso_lo"];
const V_TP: [&str; 2] = ["v_tp_hi", "v_tp_lo"];
const V_GATE: [&str; 2] = ["v_gate_gan_hi", "v_gate_gan_lo"];
const I_GATE_LOOP: [&str; 2] = ["i_gate_loop_hi", "i_gate_loop_lo"];
const I_RAIL_ISO: [&str; 2] = ["i_rail_isolator_hi", "i_rail_isolator_lo"];
const I_RAIL_TP: [&str; 2] = ["i_rail_totem_hi", "i_rail_totem_lo"];
const I_SHOOT_TP: [&str; 2] = ["i_shoot_totem_hi", "i_shoot_totem_lo"];
const P_ISO: [&str; 2] = ["p_isolator_hi", "p_isolator_lo"];
const P_TP: [&str; 2] = ["p_totem_hi", "p_totem_lo"];

#[derive(Debug, Clone, Copy)]
struct SideLayout {
    v_iso: usize,
    v_tp: usize,
    /// Gate-loop current when the loop is inductive.
    i_gl: Option<usize>,
    /// Equal to `v_tp` when the loop is a short.
    v_gg: usize,
}

#[derive(Debug, Clone, Copy, Default)]
struct Layout {
    sides: [Option<SideLayout>; 2],
    v_sw: Option<usize>,
    i_out: Option<usize>,
    /// Open-load node; equal to `v_sw` when the output link is a short.
    v_out: Option<usize>,
    v_g: Option<usize>,
    v_d: Option<usize>,
    dim: usize,
}

/// Quantities of one side derived from a state vector.
#[derive(Debug, Clone, Copy)]
struct SideEval {
    v_iso: f64,
    v_tp: f64,
    v_gg: f64,
    i_gl: f64,
    dv_iso: f64,
    dv_tp: f64,
    dv_gg: f64,
    di_gl: f64,
    i_rail_iso: f64,
    p_iso: f64,
    i_rail_tp: f64,
    i_shoot_tp: f64,
    p_tp: f64,
}

#[derive(Debug, Clone, Copy, Default)]
struct OutputEval {
    v_sw: f64,
    i_out: f64,
    v_out: f64,
    v_g: f64,
    v_d: f64,
    dv_sw: f64,
    di_out: f64,
    dv_out: f64,
    dv_g: f64,
    dv_d: f64,
    i_rail_pp: f64,
    i_shoot_pp: f64,
    p_pp: f64,
    i_rail_load: f64,
    i_channel: f64,
    p_load: f64,
}

/// The chain of a [`Scenario`] as an [`OdeSystem`].
#[derive(Debug, Clone)]
pub struct ChainSystem<'a> {
    sc: &'a Scenario,
    layout: Layout,
}

impl<'a> ChainSystem<'a> {
    pub fn new(sc: &'a Scenario) -> Result<Self> {
        sc.validate()?;
        let mut n = 0;
        let mut next = || {
            n += 1;
            n - 1
        };
        let mut layout = Layout::default();
        for &side in sc.sides() {
            let v_iso = next();
            let v_tp = next();
            let (i_gl, v_gg) = match sc.totem(side).gate_loop() {
                SeriesLink::Inductive { .. } => (Some(next()), next()),
                SeriesLink::Resistive { .. } => (None, next()),
                SeriesLink::Short => (None, v_tp),
            };
            layout.sides[idx(side)] = Some(SideLayout {
                v_iso,
                v_tp,
                i_gl,
                v_gg,
            });
        }
        if sc.topology == Topology::Full {
            let v_sw = next();
            layout.v_sw = Some(v_sw);
            let link = sc.pushpull.output_link();
            match &sc.load {
                Load::Open { .. } => match link {
                    SeriesLink::Inductive { .. } => {
                        layout.i_out = Some(next());
                        layout.v_out = Some(next());
                    }
                    SeriesLink::Resistive { .. } => layout.v_out = Some(next()),
                    SeriesLink::Short => layout.v_out = Some(v_sw),
                },
                Load::HardSwitch(c) => {
                    if let SeriesLink::Inductive { .. } = link {
                        layout.i_out = Some(next());
                    } else if !(link.resistance() + c.gate_path_ohm() > 0.0) {
                        return Err(Error::invalid(
                            "scenario",
                            "the driver-to-gate path has neither inductance nor resistance",
                        ));
                    }
                    layout.v_g = Some(next());
                    layout.v_d = Some(next());
                }
            }
        }
        layout.dim = n;
        Ok(Self { sc, layout })
    }

    pub fn scenario(&self) -> &Scenario {
        self.sc
    }

    /// Stages with a supply rail, as `(stage name, rail voltage)`.
    pub fn rails(&self) -> Vec<(String, f64)> {
        let mut out = Vec::new();
        for &side in self.sc.sides() {
            let s = side.suffix();
            out.push((format!("isolator_{s}"), self.sc.isolator(side).rail_v));
            out.push((format!("totem_{s}"), self.sc.totem(side).rail_v));
        }
        if self.sc.topology == Topology::Full {
            out.push(("pushpull".to_string(), self.sc.pushpull.rail_v));
            if let Load::HardSwitch(c) = &self.sc.load {
                out.push(("load".to_string(), c.v_link_v));
            }
        }
        out
    }

    /// Time at which the delayed isolator decision of `side` flips, for every
    /// input edge of that side starting in `[t0, t1)`.
    fn decision_shift(&self, side: Side) -> f64 {
        0.5 * self.sc.pwm.rise_fall_s + self.sc.isolator(side).prop_delay_s
    }

    fn eval_side(&self, side: Side, lay: &SideLayout, mode_t: f64, x: &[f64]) -> SideEval {
        let iso = self.sc.isolator(side);
        let tp = self.sc.totem(side);
        let ciss = self.sc.pushpull.ciss_f;
        let drive = self.sc.pwm.logic_level(side, mode_t - iso.prop_delay_s);
        let v_iso = x[lay.v_iso];
        let v_tp = x[lay.v_tp];
        let v_gg = x[lay.v_gg];
        let iso_rates = isolator_rhs(iso, drive, v_iso, tp.input_cap_f);
        let i_cap = (iso.self_cap_f + tp.input_cap_f) * iso_rates.dv_out_dt;
        // Pull-down current flows from the output node to ground.
        let p_iso_switch = if drive {
            iso_rates.i_supply * (iso.rail_v - v_iso)
        } else {
            -i_cap * v_iso
        };
        let tc = totem_currents(tp, v_iso, v_tp);
        let (i_gl, di_gl, dv_tp, dv_gg, p_loop) = match tp.gate_loop() {
            SeriesLink::Inductive { l_h, r_ohm } => {
                let i = x[lay.i_gl.expect("inductive loop state")];
                let di = (v_tp - r_ohm * i - v_gg) / l_h;
                (i, di, (tc.i_up - tc.i_down - i) / tp.out_cap_f, i / ciss, r_ohm * i * i)
            }
            SeriesLink::Resistive { r_ohm } => {
                let i = (v_tp - v_gg) / r_ohm;
                (i, 0.0, (tc.i_up - tc.i_down - i) / tp.out_cap_f, i / ciss, r_ohm * i * i)
            }
            SeriesLink::Short => {
                let dv = (tc.i_up - tc.i_down) / (tp.out_cap_f + ciss);
                (ciss * dv, 0.0, dv, dv, 0.0)
            }
        };
        SideEval {
            v_iso,
            v_tp,
            v_gg,
            i_gl,
            dv_iso: iso_rates.dv_out_dt,
            dv_tp,
            dv_gg,
            di_gl,
            i_rail_iso: iso_rates.i_supply + iso.static_current_a,
            p_iso: p_iso_switch + iso.rail_v * iso.static_current_a,
            i_rail_tp: tc.i_up + tc.i_shoot,
            i_shoot_tp: tc.i_shoot,
            p_tp: tc.i_up * (tp.rail_v - v_tp)
                + tc.i_down * v_tp
                + tc.i_shoot * tp.rail_v
                + p_loop,
        }
    }

    fn eval_output(&self, v_gate_hi: f64, v_gate_lo: f64, x: &[f64]) -> Result<OutputEval> {
        let lay = &self.layout;
        let pp = &self.sc.pushpull;
        let link = pp.output_link();
        let v_sw = x[lay.v_sw.expect("switch node")];
        let cur = pushpull_currents(pp, v_gate_hi, v_gate_lo, v_sw);
        let mut o = OutputEval {
            v_sw,
            i_rail_pp: cur.i_high,
            i_shoot_pp: cur.i_shoot,
            ..OutputEval::default()
        };
        let p_devices = cur.i_high * (pp.rail_v - v_sw) + cur.i_low * v_sw;
        match &self.sc.load {
            Load::Open { cap_f } => {
                let v_out = x[lay.v_out.expect("open-load node")];
                o.v_out = v_out;
                let (i_out, extra_cap) = match link {
                    SeriesLink::Inductive { .. } => (x[lay.i_out.expect("link state")], 0.0),
                    SeriesLink::Resistive { r_ohm } => ((v_sw - v_out) / r_ohm, 0.0),
                    SeriesLink::Short => (0.0, *cap_f),
                };
                let r = pushpull_rhs(pp, v_gate_hi, v_gate_lo, v_sw, i_out, v_out, extra_cap);
                o.i_out = i_out;
                o.dv_sw = r.dv_sw_dt;
                o.di_out = r.di_out_dt;
                o.dv_out = match link {
                    SeriesLink::Short => r.dv_sw_dt,
                    _ => i_out / cap_f,
                };
                o.p_pp = p_devices + link.resistance() * i_out * i_out;
            }
            Load::HardSwitch(c) => {
                let v_g = x[lay.v_g.expect("gate node")];
                let v_d = x[lay.v_d.expect("drain node")];
                let r_gate = c.gate_path_ohm();
                let i_out = match link {
                    SeriesLink::Inductive { .. } => x[lay.i_out.expect("link state")],
                    _ => (v_sw - v_g) / (link.resistance() + r_gate),
                };
                // The gate resistance sits in series with the link, so the
                // link sees the gate node raised by its drop.
                let r = pushpull_rhs(pp, v_gate_hi, v_gate_lo, v_sw, i_out, v_g + r_gate * i_out, 0.0);
                let [dv_g, dv_d] = c.node_rates(v_g, v_d, i_out)?;
                let i_rl = (c.v_link_v - v_d) / c.r_limit_ohm;
                let i_ch = channel_current(&c.device, v_g, v_d);
                o.v_g = v_g;
                o.v_d = v_d;
                o.i_out = i_out;
                o.dv_sw = r.dv_sw_dt;
                o.di_out = r.di_out_dt;
                o.dv_g = dv_g;
                o.dv_d = dv_d;
                o.i_rail_load = i_rl;
                o.i_channel = i_ch;
                o.p_pp = p_devices + link.resistance() * i_out * i_out;
                o.p_load = c.r_limit_ohm * i_rl * i_rl + i_ch * v_d + r_gate * i_out * i_out;
            }
        }
        Ok(o)
    }

    fn eval(&self, mode_t: f64, x: &[f64]) -> Result<([Option<SideEval>; 2], Option<OutputEval>)> {
        let mut sides = [None, None];
        for &side in self.sc.sides() {
            let lay = self.layout.sides[idx(side)].expect("side layout");
            sides[idx(side)] = Some(self.eval_side(side, &lay, mode_t, x));
        }
        let out = match (self.sc.topology, sides) {
            (Topology::Full, [Some(hi), Some(lo)]) => Some(self.eval_output(hi.v_gg, lo.v_gg, x)?),
            _ => None,
        };
        Ok((sides, out))
    }

    /// Static operating point of the segment containing `t`, or a heuristic
    /// guess when the static system has no isolated solution (a floating
    /// switch node while both GaN devices are off).
    pub fn dc_state(&self, t: f64) -> Vec<f64> {
        let guess = self.guess_state(t);
        let mode_t = self.segment_mode(t);
        let dim = self.dim();
        let scales: Vec<f64> = (0..dim).map(|i| self.tolerance_scale(i)).collect();
        let mut dx = vec![0.0; dim];
        let residual = |x: &[f64], r: &mut [f64]| {
            if self.rhs(t, mode_t, x, &mut dx).is_err() {
                r.iter_mut().for_each(|v| *v = f64::NAN);
                return;
            }
            for (ri, di) in r.iter_mut().zip(&dx) {
                *ri = di * 1e-9;
            }
        };
        match newton_solve(residual, &guess, None, &scales, 1e-12, 50) {
            Ok((x, _)) if self.plausible(&x) => x,
            _ => guess,
        }
    }

    fn plausible(&self, x: &[f64]) -> bool {
        let limit = self
            .rails()
            .iter()
            .fold(0.0f64, |m, (_, v)| m.max(*v))
            * 1.5;
        x.iter().all(|v| v.is_finite() && v.abs() <= limit.max(1.0) * 10.0)
    }

    /// Mode time the solver uses for a segment starting at `t`.
    fn segment_mode(&self, t: f64) -> f64 {
        let period = self.sc.period();
        let after = self
            .breakpoints(t, t + period)
            .into_iter()
            .fold(t + period, f64::min);
        0.5 * (t + after)
    }

    fn guess_state(&self, t: f64) -> Vec<f64> {
        let mode_t = self.segment_mode(t);
        let mut x = vec![0.0; self.dim()];
        let mut gates = [0.0; 2];
        for &side in self.sc.sides() {
            let lay = self.layout.sides[idx(side)].expect("side layout");
            let iso = self.sc.isolator(side);
            let tp = self.sc.totem(side);
            let high = self.sc.pwm.logic_level(side, mode_t - iso.prop_delay_s);
            x[lay.v_iso] = if high { iso.rail_v } else { 0.0 };
            let v_tp = if high { 0.0 } else { tp.rail_v };
            x[lay.v_tp] = v_tp;
            x[lay.v_gg] = v_tp;
            gates[idx(side)] = v_tp;
        }
        if let Some(v_sw_i) = self.layout.v_sw {
            let pp = &self.sc.pushpull;
            let hi_on = gates[0] > pp.vth_v;
            let lo_on = gates[1] > pp.vth_v;
            let v_sw = match (hi_on, lo_on) {
                (true, false) => pp.rail_v,
                (false, true) => 0.0,
                _ => 0.0,
            };
            x[v_sw_i] = v_sw;
            if let Some(i) = self.layout.v_out {
                x[i] = v_sw;
            }
            if let (Some(gi), Some(di), Load::HardSwitch(c)) =
                (self.layout.v_g, self.layout.v_d, &self.sc.load)
            {
                x[gi] = v_sw;
                x[di] = load_line_drain(c, v_sw);
            }
        }
        x
    }

    /// Running PSS from the DC state at `t = 0`.
    pub fn pss(&self) -> Result<Pss> {
        let x0 = self.dc_state(0.0);
        run_to_pss(self, Some(&x0), self.sc.period(), &self.sc.solver)
    }
}

/// Drain voltage where the load line through the limiter meets the channel.
fn load_line_drain(c: &HardSwitchCircuit, v_g: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, c.v_link_v);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if c.drain_current(v_g, mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

impl OdeSystem for ChainSystem<'_> {
    fn dim(&self) -> usize {
        self.layout.dim
    }

    fn rhs(&self, _t: f64, mode_t: f64, x: &[f64], dx: &mut [f64]) -> Result<()> {
        let (sides, out) = self.eval(mode_t, x)?;
        for &side in self.sc.sides() {
            let lay = self.layout.sides[idx(side)].expect("side layout");
            let s = sides[idx(side)].expect("side eval");
            dx[lay.v_iso] = s.dv_iso;
            dx[lay.v_tp] = s.dv_tp;
            if let Some(i) = lay.i_gl {
                dx[i] = s.di_gl;
            }
            if lay.v_gg != lay.v_tp {
                dx[lay.v_gg] = s.dv_gg;
            }
        }
        if let Some(o) = out {
            let lay = &self.layout;
            dx[lay.v_sw.expect("switch node")] = o.dv_sw;
            if let Some(i) = lay.i_out {
                dx[i] = o.di_out;
            }
            if let Some(i) = lay.v_out {
                if Some(i) != lay.v_sw {
                    dx[i] = o.dv_out;
                }
            }
            if let (Some(g), Some(d)) = (lay.v_g, lay.v_d) {
                dx[g] = o.dv_g;
                dx[d] = o.dv_d;
            }
        }
        Ok(())
    }

    fn tolerance_scale(&self, i: usize) -> f64 {
        let is_current = self.layout.i_out == Some(i)
            || self
                .layout
                .sides
                .iter()
                .flatten()
                .any(|s| s.i_gl == Some(i));
        if is_current {
            0.1
        } else {
            1.0
        }
    }

    fn breakpoints(&self, t0: f64, t1: f64) -> Vec<f64> {
        let mut out = Vec::new();
        for &side in self.sc.sides() {
            let shift = self.decision_shift(side);
            out.extend(
                self.sc
                    .pwm
                    .edge_schedule(t0 - shift, t1 - shift)
                    .into_iter()
                    .filter(|e| e.side == side)
                    .map(|e| e.time + shift)
                    .filter(|t| *t > t0 && *t < t1),
            );
        }
        out.sort_by(f64::total_cmp);
        out
    }

    fn events(&self, t0: f64, t1: f64) -> Vec<(f64, String)> {
        self.sc
            .pwm
            .edge_schedule(t0, t1)
            .into_iter()
            .filter(|e| self.sc.sides().contains(&e.side))
            .map(|e| {
                let dir = match e.direction {
                    crate::signal::Direction::Rising => "rise",
                    crate::signal::Direction::Falling => "fall",
                };
                (e.time, format!("{}_{dir}", e.side.suffix()))
            })
            .collect()
    }

    fn probe_names(&self) -> ProbeNames {
        let mut p = ProbeNames::default();
        let mut node = |s: &str| p.nodes.push(s.to_string());
        for &side in self.sc.sides() {
            let k = idx(side);
            node(V_CTRL[k]);
            node(V_ISO[k]);
            node(V_TP[k]);
            node(V_GATE[k]);
        }
        if self.sc.topology == Topology::Full {
            node("v_sw");
            match self.sc.load {
                Load::Open { .. } => node("v_out"),
                Load::HardSwitch(_) => {
                    node("v_gs_sic");
                    node("v_ds_sic");
                }
            }
        }
        for &side in self.sc.sides() {
            let k = idx(side);
            p.branches.push(I_GATE_LOOP[k].to_string());
            p.branches.push(I_RAIL_ISO[k].to_string());
            p.branches.push(I_RAIL_TP[k].to_string());
            p.branches.push(I_SHOOT_TP[k].to_string());
            p.powers.push(P_ISO[k].to_string());
            p.powers.push(P_TP[k].to_string());
        }
        if self.sc.topology == Topology::Full {
            for b in ["i_rail_pushpull", "i_shoot_pushpull", "i_out"] {
                p.branches.push(b.to_string());
            }
            p.powers.push("p_pushpull".to_string());
            if let Load::HardSwitch(_) = self.sc.load {
                p.branches.push("i_rail_load".to_string());
                p.branches.push("i_channel".to_string());
                p.powers.push("p_load".to_string());
            }
        }
        p
    }

    fn observe(&self, t: f64, mode_t: f64, x: &[f64], out: &mut [f64]) -> Result<()> {
        let (sides, o) = self.eval(mode_t, x)?;
        let mut k = 0;
        let mut push = |v: f64| {
            out[k] = v;
            k += 1;
        };
        for &side in self.sc.sides() {
            let s = sides[idx(side)].expect("side eval");
            push(self.sc.pwm.value(side, t));
            push(s.v_iso);
            push(s.v_tp);
            push(s.v_gg);
        }
        if let Some(o) = o {
            push(o.v_sw);
            match self.sc.load {
                Load::Open { .. } => push(o.v_out),
                Load::HardSwitch(_) => {
                    push(o.v_g);
                    push(o.v_d);
                }
            }
        }
        for &side in self.sc.sides() {
            let s = sides[idx(side)].expect("side eval");
            push(s.i_gl);
            push(s.i_rail_iso);
            push(s.i_rail_tp);
            push(s.i_shoot_tp);
        }
        if let Some(o) = o {
            push(o.i_rail_pp);
            push(o.i_shoot_pp);
            push(o.i_out);
            if let Load::HardSwitch(_) = self.sc.load {
                push(o.i_rail_load);
                push(o.i_channel);
            }
        }
        // Powers follow all branches.
        for &side in self.sc.sides() {
            let s = sides[idx(side)].expect("side eval");
            push(s.p_iso);
            push(s.p_tp);
        }
        if let Some(o) = o {
            push(o.p_pp);
            if let Load::HardSwitch(_) = self.sc.load {
                push(o.p_load);
            }
        }
        debug_assert_eq!(k, out.len());
        Ok(())
    }

    fn initial_state(&self) -> Vec<f64> {
        self.dc_state(0.0)
    }
}

/// Supply current of one driver side (isolator plus totem-pole, both on the
/// same rail) at periodic steady state, with its thermal verdict.
#[derive(Debug, Clone, PartialEq)]
pub struct SupplyCurrent {
    pub avg_current_a: f64,
    pub isolator: PowerStats,
    pub totem: PowerStats,
    /// Junction temperature for the full rail power `rail * avg_current`.
    pub junction_temp_c: f64,
    pub runaway: bool,
    pub periods: usize,
}

/// Average rail current of one driver side at frequency `frequency_hz` and
/// rail `rail_v`, all other settings taken from `base`.
pub fn avg_supply_current(
    base: &Scenario,
    side: Side,
    frequency_hz: f64,
    rail_v: f64,
) -> Result<SupplyCurrent> {
    let mut sc = base.clone();
    sc.topology = Topology::DriverSide(side);
    sc.pwm.frequency_hz = frequency_hz;
    match side {
        Side::High => {
            sc.isolator_hi.rail_v = rail_v;
            sc.totem_hi.rail_v = rail_v;
        }
        Side::Low => {
            sc.isolator_lo.rail_v = rail_v;
            sc.totem_lo.rail_v = rail_v;
        }
    }
    let sys = ChainSystem::new(&sc)?;
    let pss = sys.pss()?;
    supply_from_trace(&sc, side, &pss.trace, pss.periods)
}

/// Supply current of `side` from a converged PSS trace.
pub fn supply_from_trace(
    sc: &Scenario,
    side: Side,
    trace: &crate::solver::Trace,
    periods: usize,
) -> Result<SupplyCurrent> {
    let s = side.suffix();
    let isolator = power_stats(trace, &format!("isolator_{s}"), &sc.thermal)?;
    let totem = power_stats(trace, &format!("totem_{s}"), &sc.thermal)?;
    let avg = isolator.avg_rail_current_a + totem.avg_rail_current_a;
    let junction_temp_c = sc.thermal.steady_state_c(sc.totem(side).rail_v * avg);
    Ok(SupplyCurrent {
        avg_current_a: avg,
        isolator,
        totem,
        junction_temp_c,
        runaway: sc.thermal.is_runaway(junction_temp_c),
        periods,
    })
}
