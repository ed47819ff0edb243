//! Flat `key.path = value` scenario files.
//!
//! One assignment per line, `#` starts a comment. Later assignments win.
//! `include = <file>` splices another file in place; included names resolve
//! next to the including file first and then in the preset catalog.
//! Keys under `experiment.`, `bound.`, `plot.` and `variant.` describe an
//! experiment and are kept aside for the experiment layer.

use std::path::{Path, PathBuf};

use crate::chain::{Load, Scenario, Topology};
use crate::error::{Error, Result};
use crate::load::{CvTable, HardSwitchCircuit};

use super::presets;

/// One `key = value` line.
#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub origin: PathBuf,
    pub line: usize,
}

impl Entry {
    pub fn parse_error(&self, reason: impl Into<String>) -> Error {
        Error::Parse {
            path: self.origin.clone(),
            line: self.line,
            reason: reason.into(),
        }
    }
}

/// Where a document came from, for resolving includes and table files.
#[derive(Debug, Clone, PartialEq)]
enum Source {
    File(PathBuf),
    Catalog(String),
}

/// A parsed (but not yet built) scenario file.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigDoc {
    pub origin: PathBuf,
    pub entries: Vec<Entry>,
}

const EXPERIMENT_PREFIXES: [&str; 4] = ["experiment.", "bound.", "plot.", "variant."];

pub fn is_experiment_key(key: &str) -> bool {
    key == "description" || EXPERIMENT_PREFIXES.iter().any(|p| key.starts_with(p))
}

impl ConfigDoc {
    pub fn parse_str(text: &str, origin: &Path) -> Result<Self> {
        let mut entries = Vec::new();
        parse_into(text, &Source::File(origin.to_path_buf()), &mut entries, 0)?;
        Ok(Self {
            origin: origin.to_path_buf(),
            entries,
        })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_str(&text, path)
    }

    /// Parses a file of the shipped preset catalog.
    pub fn from_catalog(name: &str, text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        parse_into(text, &Source::Catalog(name.to_string()), &mut entries, 0)?;
        Ok(Self {
            origin: PathBuf::from(format!("presets/{name}")),
            entries,
        })
    }

    /// Last value assigned to `key`.
    pub fn get(&self, key: &str) -> Option<&Entry> {
        self.entries.iter().rev().find(|e| e.key == key)
    }

    /// Scenario entries in file order.
    pub fn scenario_entries(&self) -> impl Iterator<Item = &Entry> {
        self.entries.iter().filter(|e| !is_experiment_key(&e.key))
    }

    pub fn scenario(&self) -> Result<Scenario> {
        self.scenario_with(&[])
    }

    /// Builds the scenario with `overrides` applied after the file entries.
    pub fn scenario_with(&self, overrides: &[Entry]) -> Result<Scenario> {
        let mut b = Builder::new();
        for e in self.scenario_entries().chain(overrides) {
            b.set(e)?;
        }
        b.finish()
    }
}

fn parse_into(text: &str, source: &Source, out: &mut Vec<Entry>, depth: usize) -> Result<()> {
    let origin = match source {
        Source::File(p) => p.clone(),
        Source::Catalog(n) => PathBuf::from(format!("presets/{n}")),
    };
    if depth > 8 {
        return Err(Error::Parse {
            path: origin,
            line: 0,
            reason: "include nesting too deep".into(),
        });
    }
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Parse {
                path: origin,
                line: i + 1,
                reason: format!("expected `key = value`, found `{line}`"),
            });
        };
        let key = key.trim();
        let value = value.trim();
        if key.is_empty() || key.contains(char::is_whitespace) {
            return Err(Error::Parse {
                path: origin,
                line: i + 1,
                reason: format!("bad key `{key}`"),
            });
        }
        if key == "include" {
            let (text, inner) = resolve(source, value).map_err(|reason| Error::Parse {
                path: origin.clone(),
                line: i + 1,
                reason,
            })?;
            parse_into(&text, &inner, out, depth + 1)?;
            continue;
        }
        let value = match key {
            "load.device.cgd_table" | "load.device.cds_table" => {
                let resolved = resolve_path(source, value);
                resolved.to_string_lossy().into_owned()
            }
            _ => value.to_string(),
        };
        out.push(Entry {
            key: key.to_string(),
            value,
            origin: origin.clone(),
            line: i + 1,
        });
    }
    Ok(())
}

/// Path of a referenced file: relative to the including file, or a catalog
/// path prefixed with `presets/` for catalog documents.
fn resolve_path(source: &Source, name: &str) -> PathBuf {
    match source {
        Source::File(p) => {
            let candidate = p.parent().unwrap_or(Path::new(".")).join(name);
            if candidate.exists() || presets::catalog_file(name).is_none() {
                candidate
            } else {
                PathBuf::from(format!("presets/{name}"))
            }
        }
        Source::Catalog(_) => PathBuf::from(format!("presets/{name}")),
    }
}

fn resolve(source: &Source, name: &str) -> std::result::Result<(String, Source), String> {
    let path = resolve_path(source, name);
    if let Some(rest) = path.to_str().and_then(|p| p.strip_prefix("presets/")) {
        if let Some(text) = presets::catalog_file(rest) {
            return Ok((text.to_string(), Source::Catalog(rest.to_string())));
        }
    }
    match std::fs::read_to_string(&path) {
        Ok(text) => Ok((text, Source::File(path))),
        Err(e) => Err(format!("cannot include `{name}`: {e}")),
    }
}

/// Reads a C-V table from disk or from the preset catalog.
fn load_table(entry: &Entry) -> Result<CvTable> {
    let path = Path::new(&entry.value);
    if let Some(rest) = entry.value.strip_prefix("presets/") {
        if let Some(text) = presets::catalog_file(rest) {
            return CvTable::from_csv_str(text, path);
        }
    }
    CvTable::from_csv_file(path)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum LoadKind {
    Open,
    HardSwitch,
}

/// Accumulates assignments into a scenario. Both load variants are kept so
/// their keys can be set before `load.kind` is known.
#[derive(Debug, Clone)]
pub struct Builder {
    sc: Scenario,
    kind: LoadKind,
    open_cap_f: f64,
    hard: HardSwitchCircuit,
    bootstrap_drop_v: f64,
}

pub const DEFAULT_OPEN_CAP_F: f64 = 50e-12;

impl Default for Builder {
    fn default() -> Self {
        Self::new()
    }
}

impl Builder {
    pub fn new() -> Self {
        Self::from_scenario(Scenario::default())
    }

    pub fn from_scenario(sc: Scenario) -> Self {
        let (kind, open_cap_f, hard) = match &sc.load {
            Load::Open { cap_f } => (LoadKind::Open, *cap_f, HardSwitchCircuit::default()),
            Load::HardSwitch(c) => (LoadKind::HardSwitch, DEFAULT_OPEN_CAP_F, c.clone()),
        };
        Self {
            sc,
            kind,
            open_cap_f,
            hard,
            bootstrap_drop_v: 0.0,
        }
    }

    pub fn set(&mut self, e: &Entry) -> Result<()> {
        match e.key.as_str() {
            "label" => self.sc.label = e.value.clone(),
            "topology" => {
                self.sc.topology = Topology::from_name(&e.value).ok_or_else(|| Error::Validation {
                    key: e.key.clone(),
                    reason: format!("expected full, driver_hi or driver_lo, found `{}`", e.value),
                })?
            }
            "load.kind" => {
                self.kind = match e.value.as_str() {
                    "open" => LoadKind::Open,
                    "hardswitch" => LoadKind::HardSwitch,
                    other => {
                        return Err(Error::Validation {
                            key: e.key.clone(),
                            reason: format!("expected open or hardswitch, found `{other}`"),
                        })
                    }
                }
            }
            "load.device.cgd_table" => self.hard.device.cgd_table = load_table(e)?,
            "load.device.cds_table" => self.hard.device.cds_table = load_table(e)?,
            key => {
                let v: f64 = e
                    .value
                    .parse()
                    .map_err(|_| e.parse_error(format!("`{key}` needs a number, found `{}`", e.value)))?;
                if !v.is_finite() {
                    return Err(Error::Validation {
                        key: key.to_string(),
                        reason: "value must be finite".into(),
                    });
                }
                if !self.set_numeric(key, v) {
                    return Err(Error::Validation {
                        key: key.to_string(),
                        reason: "unknown key".into(),
                    });
                }
            }
        }
        Ok(())
    }

    /// Assigns a numeric field; false when `key` is not a numeric field.
    pub fn set_numeric(&mut self, key: &str, v: f64) -> bool {
        let sc = &mut self.sc;
        let count = |v: f64| v.max(0.0).round() as usize;
        match key {
            "pwm.frequency_hz" => sc.pwm.frequency_hz = v,
            "pwm.duty_high" => sc.pwm.duty_high = v,
            "pwm.duty_low" => sc.pwm.duty_low = v,
            "pwm.phase_offset" => sc.pwm.phase_offset = v,
            "pwm.logic_high_v" | "rails.v_dsig" => sc.pwm.logic_high_v = v,
            "pwm.logic_low_v" => sc.pwm.logic_low_v = v,
            "pwm.rise_fall_s" => sc.pwm.rise_fall_s = v,
            "rails.v_dsih" => {
                sc.isolator_hi.rail_v = v;
                sc.totem_hi.rail_v = v;
            }
            "rails.v_dsil" => {
                sc.isolator_lo.rail_v = v;
                sc.totem_lo.rail_v = v;
            }
            "rails.v_dgan" => sc.pushpull.rail_v = v,
            "rails.v_link" => self.hard.v_link_v = v,
            "rails.bootstrap_drop_v" => self.bootstrap_drop_v = v,
            "load.cap_f" => self.open_cap_f = v,
            "load.v_link_v" => self.hard.v_link_v = v,
            "load.r_limit_ohm" => self.hard.r_limit_ohm = v,
            "load.r_gate_ext_ohm" => self.hard.r_gate_ext_ohm = v,
            "load.device.vth_v" => self.hard.device.vth_v = v,
            "load.device.kp_a_per_v2" => self.hard.device.kp_a_per_v2 = v,
            "load.device.cgs_f" => self.hard.device.cgs_f = v,
            "load.device.rg_internal_ohm" => self.hard.device.rg_internal_ohm = v,
            "solver.rel_tol" => sc.solver.rel_tol = v,
            "solver.abs_tol_v" => sc.solver.abs_tol_v = v,
            "solver.dt_min_s" => sc.solver.dt_min_s = v,
            "solver.dt_max_s" => sc.solver.dt_max_s = v,
            "solver.newton_max_iter" => sc.solver.newton_max_iter = count(v),
            "solver.newton_tol" => sc.solver.newton_tol = v,
            "solver.pss_period_tol" => sc.solver.pss_period_tol = v,
            "solver.pss_max_periods" => sc.solver.pss_max_periods = count(v),
            "thermal.r_th_k_per_w" => sc.thermal.r_th_k_per_w = v,
            "thermal.c_th_j_per_k" => sc.thermal.c_th_j_per_k = v,
            "thermal.ambient_c" => sc.thermal.ambient_c = v,
            "thermal.runaway_threshold_c" => sc.thermal.runaway_threshold_c = v,
            "pushpull.vth_v" => sc.pushpull.vth_v = v,
            "pushpull.ron_ohm" => sc.pushpull.ron_ohm = v,
            "pushpull.transconductance_s" => sc.pushpull.transconductance_s = v,
            "pushpull.ciss_f" => sc.pushpull.ciss_f = v,
            "pushpull.coss_f" => sc.pushpull.coss_f = v,
            "pushpull.rail_v" => sc.pushpull.rail_v = v,
            "pushpull.parasitic_l_h" => sc.pushpull.parasitic_l_h = v,
            "pushpull.parasitic_r_ohm" => sc.pushpull.parasitic_r_ohm = v,
            _ => return self.set_sided(key, v),
        }
        true
    }

    fn set_sided(&mut self, key: &str, v: f64) -> bool {
        let Some((prefix, field)) = key.split_once('.') else {
            return false;
        };
        let sc = &mut self.sc;
        match prefix {
            "isolator" | "isolator_hi" | "isolator_lo" => {
                let targets: Vec<&mut crate::stages::IsolatorModel> = match prefix {
                    "isolator_hi" => vec![&mut sc.isolator_hi],
                    "isolator_lo" => vec![&mut sc.isolator_lo],
                    _ => vec![&mut sc.isolator_hi, &mut sc.isolator_lo],
                };
                for m in targets {
                    match field {
                        "prop_delay_s" => m.prop_delay_s = v,
                        "out_resistance_ohm" => m.out_resistance_ohm = v,
                        "slew_limit_v_per_s" => m.slew_limit_v_per_s = v,
                        "rail_v" => m.rail_v = v,
                        "self_cap_f" => m.self_cap_f = v,
                        "static_current_a" => m.static_current_a = v,
                        _ => return false,
                    }
                }
                true
            }
            "totem" | "totem_hi" | "totem_lo" => {
                let targets: Vec<&mut crate::stages::TotemPoleModel> = match prefix {
                    "totem_hi" => vec![&mut sc.totem_hi],
                    "totem_lo" => vec![&mut sc.totem_lo],
                    _ => vec![&mut sc.totem_hi, &mut sc.totem_lo],
                };
                for m in targets {
                    match field {
                        "vth_v" => m.vth_v = v,
                        "ron_ohm" => m.ron_ohm = v,
                        "transconductance_s" => m.transconductance_s = v,
                        "input_cap_f" => m.input_cap_f = v,
                        "cross_cond_sat_a" => m.cross_cond_sat_a = v,
                        "rail_v" => m.rail_v = v,
                        "out_cap_f" => m.out_cap_f = v,
                        "loop_l_h" => m.loop_l_h = v,
                        "loop_r_ohm" => m.loop_r_ohm = v,
                        _ => return false,
                    }
                }
                true
            }
            _ => false,
        }
    }

    /// Applies the bootstrap drop, selects the load and validates.
    pub fn finish(mut self) -> Result<Scenario> {
        if !(self.bootstrap_drop_v >= 0.0) {
            return Err(Error::Validation {
                key: "rails.bootstrap_drop_v".into(),
                reason: "must be >= 0".into(),
            });
        }
        self.sc.isolator_hi.rail_v -= self.bootstrap_drop_v;
        self.sc.totem_hi.rail_v -= self.bootstrap_drop_v;
        self.sc.load = match self.kind {
            LoadKind::Open => Load::Open {
                cap_f: self.open_cap_f,
            },
            LoadKind::HardSwitch => Load::HardSwitch(self.hard),
        };
        validate_keyed(&self.sc)?;
        Ok(self.sc)
    }
}

/// Validates a scenario, reporting failures against config keys.
pub fn validate_keyed(sc: &Scenario) -> Result<()> {
    use crate::signal::Side;
    let keyed = |prefix: &str, r: Result<()>| -> Result<()> {
        r.map_err(|e| match e {
            Error::Overlap { .. } => Error::Validation {
                key: "pwm.duty_high, pwm.duty_low".into(),
                reason: format!("{e}; the overlap invariant needs duty_high + duty_low >= 1"),
            },
            Error::InvalidModel { reason, .. } => {
                let field = reason.split_whitespace().next().unwrap_or("");
                let is_field = !field.is_empty()
                    && field.chars().all(|c| c.is_ascii_lowercase() || c == '_' || c.is_ascii_digit());
                Error::Validation {
                    key: if is_field && field.contains('_') {
                        format!("{prefix}.{field}")
                    } else {
                        prefix.to_string()
                    },
                    reason,
                }
            }
            other => other,
        })
    };
    keyed("pwm", sc.pwm.validate())?;
    for side in Side::BOTH {
        let s = side.suffix();
        keyed(&format!("isolator_{s}"), sc.isolator(side).validate())?;
        keyed(&format!("totem_{s}"), sc.totem(side).validate())?;
    }
    keyed("pushpull", sc.pushpull.validate())?;
    keyed("thermal", sc.thermal.validate())?;
    keyed("solver", sc.solver.validate())?;
    match &sc.load {
        Load::Open { .. } => {}
        Load::HardSwitch(c) => keyed("load", c.validate())?,
    }
    keyed("scenario", sc.validate())
}

/// Reads and validates a scenario file. Experiment keys are ignored.
pub fn load_scenario(path: &Path) -> Result<Scenario> {
    ConfigDoc::from_file(path)?.scenario()
}

/// Applies one numeric assignment to a built scenario.
pub fn apply_numeric(sc: &Scenario, key: &str, v: f64) -> Result<Scenario> {
    let mut b = Builder::from_scenario(sc.clone());
    if !b.set_numeric(key, v) {
        return Err(Error::BadParamPath(key.to_string()));
    }
    b.finish()
}

/// True when `key` addresses a numeric scenario field.
pub fn is_numeric_key(key: &str) -> bool {
    Builder::new().set_numeric(key, 1.0)
}
