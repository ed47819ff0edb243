//! Behavioral models of the active driver stages.
//!
//! Every stage is a handful of capacitive nodes driven by switched
//! conductances. Device conduction is a smooth saturating function of gate
//! overdrive that is exactly zero at or below threshold, so cut-off devices
//! carry no current at all and shoot-through vanishes identically outside the
//! both-on window.

use crate::error::{Error, Result};

/// Conductance of a switch with gate overdrive `overdrive` (volts).
///
/// `1/ron * (1 - exp(-u^2))` with `u = overdrive * transconductance * ron`:
/// zero with zero slope at threshold, saturating to `1/ron` at full
/// enhancement.
pub fn conduction(overdrive: f64, transconductance_s: f64, ron_ohm: f64) -> f64 {
    if overdrive <= 0.0 {
        return 0.0;
    }
    let u = overdrive * transconductance_s * ron_ohm;
    -(-u * u).exp_m1() / ron_ohm
}

/// Series connection between two capacitive nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SeriesLink {
    /// Inductor with series resistance; carries its own current state.
    Inductive { l_h: f64, r_ohm: f64 },
    Resistive { r_ohm: f64 },
    /// Both nodes collapse into one.
    Short,
}

impl SeriesLink {
    pub fn new(l_h: f64, r_ohm: f64) -> Self {
        if l_h > 0.0 {
            SeriesLink::Inductive { l_h, r_ohm }
        } else if r_ohm > 0.0 {
            SeriesLink::Resistive { r_ohm }
        } else {
            SeriesLink::Short
        }
    }

    pub fn resistance(&self) -> f64 {
        match *self {
            SeriesLink::Inductive { r_ohm, .. } | SeriesLink::Resistive { r_ohm } => r_ohm,
            SeriesLink::Short => 0.0,
        }
    }
}

fn positive(what: &'static str, name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(what, format!("{name} must be positive, got {v}")))
    }
}

fn non_negative(what: &'static str, name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(what, format!("{name} must be >= 0, got {v}")))
    }
}

// ---------------------------------------------------------------------------
// Digital isolator

/// Isolator output driver: a delayed two-level decision followed by a
/// slew-limited RC output.
#[derive(Debug, Clone, PartialEq)]
pub struct IsolatorModel {
    pub prop_delay_s: f64,
    pub out_resistance_ohm: f64,
    pub slew_limit_v_per_s: f64,
    pub rail_v: f64,
    pub self_cap_f: f64,
    /// Quiescent draw from the output-side rail.
    pub static_current_a: f64,
}

impl Default for IsolatorModel {
    // Calibrated against the measured 20-MHz output swing; not datasheet values.
    fn default() -> Self {
        Self {
            prop_delay_s: 8.0e-9,
            out_resistance_ohm: 410.0,
            slew_limit_v_per_s: 0.98e9,
            rail_v: 3.8,
            self_cap_f: 20.0e-12,
            static_current_a: 1.0e-3,
        }
    }
}

impl IsolatorModel {
    pub fn validate(&self) -> Result<()> {
        const W: &str = "isolator";
        positive(W, "prop_delay_s", self.prop_delay_s)?;
        positive(W, "out_resistance_ohm", self.out_resistance_ohm)?;
        positive(W, "slew_limit_v_per_s", self.slew_limit_v_per_s)?;
        positive(W, "self_cap_f", self.self_cap_f)?;
        non_negative(W, "static_current_a", self.static_current_a)?;
        if !(2.5..=6.0).contains(&self.rail_v) {
            return Err(Error::invalid(
                W,
                format!("rail_v must lie in [2.5, 6.0] V, got {}", self.rail_v),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsolatorRates {
    pub dv_out_dt: f64,
    /// Switching current drawn from the rail, excluding the static draw.
    pub i_supply: f64,
}

/// Output-node rate of the isolator driving `load_cap_f` in addition to its own
/// pin capacitance.
pub fn isolator_rhs(
    model: &IsolatorModel,
    drive_high: bool,
    v_out: f64,
    load_cap_f: f64,
) -> IsolatorRates {
    let c_total = model.self_cap_f + load_cap_f;
    let target = if drive_high { model.rail_v } else { 0.0 };
    let rc_rate = (target - v_out) / (model.out_resistance_ohm * c_total);
    let slew = model.slew_limit_v_per_s;
    let dv_out_dt = rc_rate.clamp(-slew, slew);
    let i_supply = if drive_high {
        (c_total * dv_out_dt).max(0.0)
    } else {
        0.0
    };
    IsolatorRates {
        dv_out_dt,
        i_supply,
    }
}

// ---------------------------------------------------------------------------
// Complementary Si totem-pole

/// Complementary Si pair (inverting) driving one GaN gate through the gate loop.
#[derive(Debug, Clone, PartialEq)]
pub struct TotemPoleModel {
    pub vth_v: f64,
    pub ron_ohm: f64,
    pub transconductance_s: f64,
    pub input_cap_f: f64,
    pub cross_cond_sat_a: f64,
    pub rail_v: f64,
    /// Capacitance at the pair's drain node.
    pub out_cap_f: f64,
    /// Loop from the pair's output to the GaN gate.
    pub loop_l_h: f64,
    pub loop_r_ohm: f64,
}

impl Default for TotemPoleModel {
    // Calibrated set: reproduces the supply-current and drive-rolloff curves.
    fn default() -> Self {
        Self {
            vth_v: 1.42,
            ron_ohm: 6.5,
            transconductance_s: 1.0,
            input_cap_f: 56.0e-12,
            cross_cond_sat_a: 0.1,
            rail_v: 3.8,
            out_cap_f: 1.2e-12,
            loop_l_h: 80.0e-9,
            loop_r_ohm: 9.2,
        }
    }
}

impl TotemPoleModel {
    pub fn validate(&self) -> Result<()> {
        const W: &str = "totem-pole";
        positive(W, "vth_v", self.vth_v)?;
        positive(W, "ron_ohm", self.ron_ohm)?;
        positive(W, "transconductance_s", self.transconductance_s)?;
        positive(W, "input_cap_f", self.input_cap_f)?;
        positive(W, "cross_cond_sat_a", self.cross_cond_sat_a)?;
        positive(W, "rail_v", self.rail_v)?;
        positive(W, "out_cap_f", self.out_cap_f)?;
        non_negative(W, "loop_l_h", self.loop_l_h)?;
        non_negative(W, "loop_r_ohm", self.loop_r_ohm)?;
        Ok(())
    }

    pub fn gate_loop(&self) -> SeriesLink {
        SeriesLink::new(self.loop_l_h, self.loop_r_ohm)
    }

    /// Input range in which both devices conduct; empty when `2 vth >= rail`.
    pub fn shoot_through_window(&self) -> Option<(f64, f64)> {
        let (lo, hi) = (self.vth_v, self.rail_v - self.vth_v);
        (hi > lo).then_some((lo, hi))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TotemCurrents {
    /// Rail to output through the upper (p-channel) device.
    pub i_up: f64,
    /// Output to ground through the lower device.
    pub i_down: f64,
    /// Rail to ground through both devices while both are partly on.
    pub i_shoot: f64,
}

pub fn totem_currents(model: &TotemPoleModel, v_ctrl: f64, v_out: f64) -> TotemCurrents {
    let g_up = conduction(
        model.rail_v - v_ctrl - model.vth_v,
        model.transconductance_s,
        model.ron_ohm,
    );
    let g_down = conduction(v_ctrl - model.vth_v, model.transconductance_s, model.ron_ohm);
    TotemCurrents {
        i_up: g_up * (model.rail_v - v_out),
        i_down: g_down * v_out,
        i_shoot: (g_up.min(g_down) * model.rail_v).min(model.cross_cond_sat_a),
    }
}

// ---------------------------------------------------------------------------
// GaN push-pull

#[derive(Debug, Clone, PartialEq)]
pub struct GanPushPullModel {
    pub vth_v: f64,
    pub ron_ohm: f64,
    pub transconductance_s: f64,
    pub ciss_f: f64,
    /// Output capacitance of each device; the switch node sees twice this.
    pub coss_f: f64,
    pub rail_v: f64,
    pub parasitic_l_h: f64,
    pub parasitic_r_ohm: f64,
}

impl Default for GanPushPullModel {
    // Datasheet-typical for a 40-V enhancement-mode GaN HEMT, except ciss,
    // which is calibrated together with the totem-pole set. Loop values are
    // the small-board setting.
    fn default() -> Self {
        Self {
            vth_v: 1.4,
            ron_ohm: 0.016,
            transconductance_s: 60.0,
            ciss_f: 567.0e-12,
            coss_f: 150.0e-12,
            rail_v: 18.0,
            parasitic_l_h: 2.0e-9,
            parasitic_r_ohm: 2.0,
        }
    }
}

impl GanPushPullModel {
    pub fn validate(&self) -> Result<()> {
        const W: &str = "push-pull";
        positive(W, "vth_v", self.vth_v)?;
        positive(W, "ron_ohm", self.ron_ohm)?;
        positive(W, "transconductance_s", self.transconductance_s)?;
        positive(W, "ciss_f", self.ciss_f)?;
        non_negative(W, "coss_f", self.coss_f)?;
        positive(W, "rail_v", self.rail_v)?;
        non_negative(W, "parasitic_l_h", self.parasitic_l_h)?;
        non_negative(W, "parasitic_r_ohm", self.parasitic_r_ohm)?;
        Ok(())
    }

    pub fn output_link(&self) -> SeriesLink {
        SeriesLink::new(self.parasitic_l_h, self.parasitic_r_ohm)
    }

    pub fn switch_node_cap(&self) -> f64 {
        2.0 * self.coss_f
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PushPullCurrents {
    pub i_high: f64,
    pub i_low: f64,
    /// Part of the device current that passes straight from rail to ground.
    pub i_shoot: f64,
}

/// Device currents for gate-source voltages `v_gate_hi`, `v_gate_lo` (each
/// referenced to its own source) and switch-node voltage `v_sw`.
pub fn pushpull_currents(
    model: &GanPushPullModel,
    v_gate_hi: f64,
    v_gate_lo: f64,
    v_sw: f64,
) -> PushPullCurrents {
    let g_hi = conduction(v_gate_hi - model.vth_v, model.transconductance_s, model.ron_ohm);
    let g_lo = conduction(v_gate_lo - model.vth_v, model.transconductance_s, model.ron_ohm);
    let i_high = g_hi * (model.rail_v - v_sw);
    let i_low = g_lo * v_sw;
    let i_shoot = if g_hi > 0.0 && g_lo > 0.0 {
        i_high.min(i_low).max(0.0)
    } else {
        0.0
    };
    PushPullCurrents {
        i_high,
        i_low,
        i_shoot,
    }
}

/// Time during which two opposing linear gate ramps of duration `edge_s`
/// from 0 to `drive_v` both stay above threshold when they start together.
/// A dead time at least this long removes all overlap.
pub fn edge_traversal_time(model: &GanPushPullModel, edge_s: f64, drive_v: f64) -> f64 {
    (edge_s * (1.0 - 2.0 * model.vth_v / drive_v)).max(0.0)
}

/// Shoot-through charge of one push-pull transition driven by linear gate
/// ramps: the conducting gate falls from `drive_v` to 0 over `edge_s`
/// starting at t = 0, the other rises from 0 to `drive_v` over `edge_s`
/// starting at `dead_s`. The rail sees both channels in series.
pub fn ramp_penetration_charge(model: &GanPushPullModel, dead_s: f64, edge_s: f64, drive_v: f64) -> f64 {
    let slope = drive_v / edge_s;
    let t_start = dead_s + model.vth_v / slope;
    let t_end = edge_s - model.vth_v / slope;
    if !(t_end > t_start) {
        return 0.0;
    }
    let current = |t: f64| {
        let g_off = conduction(drive_v - slope * t - model.vth_v, model.transconductance_s, model.ron_ohm);
        let g_on = conduction(slope * (t - dead_s) - model.vth_v, model.transconductance_s, model.ron_ohm);
        if g_off > 0.0 && g_on > 0.0 {
            model.rail_v * g_off * g_on / (g_off + g_on)
        } else {
            0.0
        }
    };
    // Composite Simpson; the integrand is smooth inside the window.
    const PANELS: usize = 2000;
    let h = (t_end - t_start) / PANELS as f64;
    let mut sum = current(t_start) + current(t_end);
    for k in 1..PANELS {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * current(t_start + k as f64 * h);
    }
    sum * h / 3.0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PushPullRates {
    pub dv_sw_dt: f64,
    /// Rate of the output-link current; zero unless the link is inductive.
    pub di_out_dt: f64,
}

/// Switch-node and output-link rates. `i_out` is the current leaving through
/// the output link and `v_load` the voltage at its far end. With a resistive
/// or shorted link `i_out` is whatever the caller computed algebraically.
pub fn pushpull_rhs(
    model: &GanPushPullModel,
    v_gate_hi: f64,
    v_gate_lo: f64,
    v_sw: f64,
    i_out: f64,
    v_load: f64,
    extra_node_cap_f: f64,
) -> PushPullRates {
    let cur = pushpull_currents(model, v_gate_hi, v_gate_lo, v_sw);
    let c_node = model.switch_node_cap() + extra_node_cap_f;
    let dv_sw_dt = (cur.i_high - cur.i_low - i_out) / c_node;
    let di_out_dt = match model.output_link() {
        SeriesLink::Inductive { l_h, r_ohm } => (v_sw - r_ohm * i_out - v_load) / l_h,
        _ => 0.0,
    };
    PushPullRates {
        dv_sw_dt,
        di_out_dt,
    }
}

// ---------------------------------------------------------------------------
// Thermal

/// First-order junction-to-ambient thermal network.
#[derive(Debug, Clone, PartialEq)]
pub struct ThermalModel {
    pub r_th_k_per_w: f64,
    pub c_th_j_per_k: f64,
    pub ambient_c: f64,
    pub runaway_threshold_c: f64,
}

impl Default for ThermalModel {
    /// `r_th` places 0.9 W (4.5 V at 200 mA) exactly on the 100 °C limit.
    fn default() -> Self {
        Self {
            r_th_k_per_w: (100.0 - 25.0) / 0.9,
            c_th_j_per_k: 0.02,
            ambient_c: 25.0,
            runaway_threshold_c: 100.0,
        }
    }
}

impl ThermalModel {
    pub fn validate(&self) -> Result<()> {
        positive("thermal", "r_th_k_per_w", self.r_th_k_per_w)?;
        positive("thermal", "c_th_j_per_k", self.c_th_j_per_k)?;
        if !(self.runaway_threshold_c > self.ambient_c) {
            return Err(Error::invalid(
                "thermal",
                "runaway_threshold_c must exceed ambient_c",
            ));
        }
        Ok(())
    }

    pub fn steady_state_c(&self, power_w: f64) -> f64 {
        self.ambient_c + self.r_th_k_per_w * power_w
    }

    pub fn is_runaway(&self, t_junction_c: f64) -> bool {
        t_junction_c >= self.runaway_threshold_c
    }
}

/// Exact update of the thermal RC over `dt` at constant power.
pub fn thermal_step(model: &ThermalModel, t_junction_c: f64, power_w: f64, dt: f64) -> (f64, bool) {
    let t_fix = model.steady_state_c(power_w);
    let decay = (-dt / (model.r_th_k_per_w * model.c_th_j_per_k)).exp();
    let t_next = t_fix + (t_junction_c - t_fix) * decay;
    (t_next, model.is_runaway(t_next))
}

/// Junction temperature history with a latched runaway flag.
#[derive(Debug, Clone, PartialEq)]
pub struct ThermalState {
    pub t_junction_c: f64,
    pub runaway: bool,
}

impl ThermalState {
    pub fn at_ambient(model: &ThermalModel) -> Self {
        Self {
            t_junction_c: model.ambient_c,
            runaway: false,
        }
    }

    pub fn advance(&mut self, model: &ThermalModel, power_w: f64, dt: f64) {
        let (t, flag) = thermal_step(model, self.t_junction_c, power_w, dt);
        self.t_junction_c = t;
        self.runaway |= flag;
    }
}
