//! Implicit trapezoidal integration with step-doubling error control.
//!
//! Systems expose their discrete switching instants as breakpoints. Steps
//! never straddle a breakpoint and every breakpoint is hit exactly, so the
//! right-hand side is smooth inside each step. Discrete logic inside a
//! system is evaluated at a `mode_t` that lies strictly inside the current
//! inter-breakpoint segment.

mod newton;
mod trace;

use std::cell::RefCell;

pub use newton::newton_solve;
pub use trace::{fmt_sig12, Channel, ProbeNames, Trace};
pub(crate) use trace::interpolate;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    pub rel_tol: f64,
    pub abs_tol_v: f64,
    pub dt_min_s: f64,
    pub dt_max_s: f64,
    pub newton_max_iter: usize,
    pub newton_tol: f64,
    pub pss_period_tol: f64,
    pub pss_max_periods: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-6,
            abs_tol_v: 1e-4,
            dt_min_s: 1e-16,
            dt_max_s: 1e-9,
            newton_max_iter: 20,
            newton_tol: 1e-10,
            pss_period_tol: 1e-4,
            pss_max_periods: 200,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        let bad = |r: &str| Err(Error::invalid("solver options", r.to_string()));
        if !(self.dt_min_s > 0.0 && self.dt_min_s <= self.dt_max_s) {
            return bad("need 0 < dt_min_s <= dt_max_s");
        }
        for (name, v) in [
            ("rel_tol", self.rel_tol),
            ("abs_tol_v", self.abs_tol_v),
            ("newton_tol", self.newton_tol),
            ("pss_period_tol", self.pss_period_tol),
        ] {
            if !(v > 0.0) {
                return bad(&format!("{name} must be positive"));
            }
        }
        if self.newton_max_iter == 0 || self.pss_max_periods == 0 {
            return bad("iteration limits must be positive");
        }
        Ok(())
    }
}

/// A first-order system `x' = f(t, x)` with discrete modes.
pub trait OdeSystem {
    fn dim(&self) -> usize;

    /// Writes `f(t, x)` into `dx`. Discrete state (logic levels) must be a
    /// function of `mode_t` only.
    fn rhs(&self, t: f64, mode_t: f64, x: &[f64], dx: &mut [f64]) -> Result<()>;

    /// Absolute-tolerance multiplier of state `i` (1 for node voltages).
    fn tolerance_scale(&self, _i: usize) -> f64 {
        1.0
    }

    /// Instants where the right-hand side may be discontinuous, in `(t0, t1)`.
    fn breakpoints(&self, _t0: f64, _t1: f64) -> Vec<f64> {
        Vec::new()
    }

    /// Labeled instants in `[t0, t1)` that must appear in the trace; they are
    /// breakpoints as well.
    fn events(&self, _t0: f64, _t1: f64) -> Vec<(f64, String)> {
        Vec::new()
    }

    fn probe_names(&self) -> ProbeNames {
        ProbeNames {
            nodes: (0..self.dim()).map(|i| format!("x{i}")).collect(),
            ..ProbeNames::default()
        }
    }

    /// Writes every probe (nodes, then branches, then powers).
    fn observe(&self, _t: f64, _mode_t: f64, x: &[f64], out: &mut [f64]) -> Result<()> {
        out.copy_from_slice(x);
        Ok(())
    }

    fn initial_state(&self) -> Vec<f64> {
        vec![0.0; self.dim()]
    }
}

/// Result of one integration.
#[derive(Debug, Clone)]
pub struct Run {
    pub trace: Trace,
    pub final_state: Vec<f64>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    /// Step size the controller would have tried next.
    pub next_dt: f64,
}

/// Segment boundaries in `(t0, t1]` and the events to attach.
fn segments<S: OdeSystem + ?Sized>(sys: &S, t0: f64, t1: f64) -> (Vec<f64>, Vec<(f64, String)>) {
    let events: Vec<(f64, String)> = sys
        .events(t0, t1)
        .into_iter()
        .filter(|(t, _)| *t >= t0 && *t < t1)
        .collect();
    let mut bps: Vec<f64> = sys
        .breakpoints(t0, t1)
        .into_iter()
        .chain(events.iter().map(|(t, _)| *t))
        .filter(|t| *t > t0 && *t < t1)
        .collect();
    bps.push(t1);
    bps.sort_by(f64::total_cmp);
    bps.dedup();
    (bps, events)
}

struct Stepper<'a, S: OdeSystem + ?Sized> {
    sys: &'a S,
    opts: &'a SolverOptions,
    scales: Vec<f64>,
    n: usize,
}

impl<'a, S: OdeSystem + ?Sized> Stepper<'a, S> {
    fn new(sys: &'a S, opts: &'a SolverOptions) -> Self {
        let n = sys.dim();
        let scales = (0..n).map(|i| sys.tolerance_scale(i)).collect();
        Self {
            sys,
            opts,
            scales,
            n,
        }
    }

    fn f(&self, t: f64, mode_t: f64, x: &[f64]) -> Result<Vec<f64>> {
        let mut dx = vec![0.0; self.n];
        self.sys.rhs(t, mode_t, x, &mut dx)?;
        if dx.iter().any(|v| !v.is_finite()) {
            return Err(Error::NewtonDivergence {
                iterations: 0,
                last_norm: f64::NAN,
            });
        }
        Ok(dx)
    }

    /// One trapezoidal step; returns the new state and its derivative.
    fn trap(&self, t0: f64, x0: &[f64], f0: &[f64], h: f64, mode_t: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        let t1 = t0 + h;
        let failure: RefCell<Option<Error>> = RefCell::new(None);
        let mut dx = vec![0.0; self.n];
        let residual = |y: &[f64], r: &mut [f64]| {
            if let Err(e) = self.sys.rhs(t1, mode_t, y, &mut dx) {
                failure.borrow_mut().get_or_insert(e);
                r.iter_mut().for_each(|v| *v = f64::NAN);
                return;
            }
            for i in 0..r.len() {
                r[i] = y[i] - x0[i] - 0.5 * h * (f0[i] + dx[i]);
            }
        };
        let guess: Vec<f64> = x0.iter().zip(f0).map(|(x, f)| x + h * f).collect();
        let guess = if guess.iter().all(|v| v.is_finite()) {
            guess
        } else {
            x0.to_vec()
        };
        let outcome = newton_solve(
            residual,
            &guess,
            None,
            &self.scales,
            self.opts.newton_tol,
            self.opts.newton_max_iter,
        );
        if let Some(e) = failure.into_inner() {
            if !matches!(e, Error::NewtonDivergence { .. }) {
                return Err(e);
            }
        }
        let (x1, _) = outcome?;
        let f1 = self.f(t1, mode_t, &x1)?;
        Ok((x1, f1))
    }

    fn observe(&self, t: f64, mode_t: f64, x: &[f64], len: usize) -> Result<Vec<f64>> {
        let mut out = vec![0.0; len];
        self.sys.observe(t, mode_t, x, &mut out)?;
        Ok(out)
    }

    fn error_ratio(&self, x0: &[f64], fine: &[f64], coarse: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            let err = (fine[i] - coarse[i]).abs() / 3.0;
            let tol = self.opts.rel_tol * x0[i].abs().max(fine[i].abs())
                + self.opts.abs_tol_v * self.scales[i];
            worst = worst.max(err / tol);
        }
        if worst.is_nan() {
            f64::INFINITY
        } else {
            worst
        }
    }
}

fn is_structural(e: &Error) -> bool {
    !matches!(e, Error::NewtonDivergence { .. })
}

/// Adaptive integration over `[t0, t1]` starting from `x0` (or the system's
/// initial state).
pub fn integrate<S: OdeSystem + ?Sized>(
    sys: &S,
    x0: Option<&[f64]>,
    t0: f64,
    t1: f64,
    opts: &SolverOptions,
) -> Result<Run> {
    integrate_from(sys, x0, t0, t1, opts, None)
}

pub(crate) fn integrate_from<S: OdeSystem + ?Sized>(
    sys: &S,
    x0: Option<&[f64]>,
    t0: f64,
    t1: f64,
    opts: &SolverOptions,
    dt_hint: Option<f64>,
) -> Result<Run> {
    opts.validate()?;
    if !(t1 > t0) {
        return Err(Error::invalid("integration window", "need t0 < t1"));
    }
    let stepper = Stepper::new(sys, opts);
    let names = sys.probe_names();
    let n_probes = names.len();
    let mut trace = Trace::with_probes(&names);
    let mut x = match x0 {
        Some(x) => x.to_vec(),
        None => sys.initial_state(),
    };
    assert_eq!(x.len(), stepper.n, "initial state dimension");
    let (bps, events) = segments(sys, t0, t1);
    trace.events = events;

    let mut dt = dt_hint
        .unwrap_or(opts.dt_max_s.min((t1 - t0) / 100.0))
        .clamp(opts.dt_min_s, opts.dt_max_s);
    let mut t = t0;
    let mut accepted = 0;
    let mut rejected = 0;
    let mut first = true;

    for &bp in &bps {
        if bp <= t {
            continue;
        }
        let mode_t = 0.5 * (t + bp);
        let mut f0 = stepper.f(t, mode_t, &x)?;
        let mut p0 = stepper.observe(t, mode_t, &x, n_probes)?;
        if first {
            trace.push_sample(t, &p0);
            first = false;
        }
        let mut newton_failures = 0;
        while t < bp {
            let remaining = bp - t;
            let mut h = dt;
            let landing = h >= remaining || remaining - h < 0.3 * h;
            if landing {
                h = if h >= remaining { remaining } else { 0.5 * remaining };
            }
            let t_next = if h == remaining { bp } else { t + h };
            let h = t_next - t;

            let attempt = (|| -> Result<_> {
                let (coarse, _) = stepper.trap(t, &x, &f0, h, mode_t)?;
                let (mid, f_mid) = stepper.trap(t, &x, &f0, 0.5 * h, mode_t)?;
                let tm = t + 0.5 * h;
                let (fine, f_fine) = stepper.trap(tm, &mid, &f_mid, t_next - tm, mode_t)?;
                Ok((coarse, mid, fine, f_fine))
            })();

            let (coarse, mid, fine, f_fine) = match attempt {
                Ok(v) => v,
                Err(e) if is_structural(&e) => return Err(e),
                Err(e) => {
                    newton_failures += 1;
                    rejected += 1;
                    if newton_failures > 5 || h <= opts.dt_min_s {
                        return Err(e);
                    }
                    dt = (h / 4.0).max(opts.dt_min_s);
                    continue;
                }
            };
            newton_failures = 0;

            let ratio = stepper.error_ratio(&x, &fine, &coarse);
            let factor = if ratio == 0.0 {
                2.0
            } else {
                (0.9 * ratio.powf(-1.0 / 3.0)).clamp(0.2, 2.0)
            };
            if ratio > 1.0 {
                rejected += 1;
                if h <= opts.dt_min_s * (1.0 + 1e-9) {
                    return Err(Error::StepUnderflow {
                        t,
                        dt: h,
                        error_ratio: ratio,
                    });
                }
                dt = (h * factor).max(opts.dt_min_s);
                continue;
            }

            let tm = t + 0.5 * h;
            let pm = stepper.observe(tm, mode_t, &mid, n_probes)?;
            let p1 = stepper.observe(t_next, mode_t, &fine, n_probes)?;
            if pm.iter().chain(&p1).any(|v| !v.is_finite()) {
                rejected += 1;
                dt = (h / 4.0).max(opts.dt_min_s);
                continue;
            }
            let half = 0.5 * h;
            let inc0: Vec<f64> = p0.iter().zip(&pm).map(|(a, b)| 0.5 * half * (a + b)).collect();
            trace.push_sample(tm, &pm);
            trace.add_integrals(&inc0);
            let inc1: Vec<f64> = pm.iter().zip(&p1).map(|(a, b)| 0.5 * half * (a + b)).collect();
            trace.push_sample(t_next, &p1);
            trace.add_integrals(&inc1);

            accepted += 1;
            t = t_next;
            x = fine;
            f0 = f_fine;
            p0 = p1;
            // A shortened landing step says nothing about the step size the
            // smooth part can take.
            if !(landing && h < dt) {
                dt = (h * factor).clamp(opts.dt_min_s, opts.dt_max_s);
            }
        }
    }
    Ok(Run {
        trace,
        final_state: x,
        accepted_steps: accepted,
        rejected_steps: rejected,
        next_dt: dt,
    })
}

/// Trapezoidal integration on the fixed grid `t0 + k dt`, merged with the
/// system's breakpoints. No error control.
pub fn integrate_fixed<S: OdeSystem + ?Sized>(
    sys: &S,
    x0: Option<&[f64]>,
    t0: f64,
    t1: f64,
    dt: f64,
    opts: &SolverOptions,
) -> Result<Run> {
    if !(t1 > t0 && dt > 0.0) {
        return Err(Error::invalid("integration window", "need t0 < t1 and dt > 0"));
    }
    let stepper = Stepper::new(sys, opts);
    let names = sys.probe_names();
    let n_probes = names.len();
    let mut trace = Trace::with_probes(&names);
    let mut x = match x0 {
        Some(x) => x.to_vec(),
        None => sys.initial_state(),
    };
    let (bps, events) = segments(sys, t0, t1);
    trace.events = events;

    let mut t = t0;
    let mut first = true;
    let mut steps = 0;
    for &bp in &bps {
        if bp <= t {
            continue;
        }
        let mode_t = 0.5 * (t + bp);
        let mut f0 = stepper.f(t, mode_t, &x)?;
        let mut p0 = stepper.observe(t, mode_t, &x, n_probes)?;
        if first {
            trace.push_sample(t, &p0);
            first = false;
        }
        while t < bp {
            let k = ((t - t0) / dt).floor() + 1.0;
            let mut t_next = t0 + k * dt;
            if t_next <= t {
                t_next = t0 + (k + 1.0) * dt;
            }
            if t_next >= bp || (bp - t_next) < 1e-9 * dt {
                t_next = bp;
            }
            let (x1, f1) = stepper.trap(t, &x, &f0, t_next - t, mode_t)?;
            let p1 = stepper.observe(t_next, mode_t, &x1, n_probes)?;
            let inc: Vec<f64> = p0
                .iter()
                .zip(&p1)
                .map(|(a, b)| 0.5 * (t_next - t) * (a + b))
                .collect();
            trace.push_sample(t_next, &p1);
            trace.add_integrals(&inc);
            t = t_next;
            x = x1;
            f0 = f1;
            p0 = p1;
            steps += 1;
        }
    }
    Ok(Run {
        trace,
        final_state: x,
        accepted_steps: steps,
        rejected_steps: 0,
        next_dt: dt,
    })
}

/// Outcome of a periodic-steady-state search.
#[derive(Debug, Clone)]
pub struct Pss {
    /// Trace of the final (converged) period.
    pub trace: Trace,
    pub periods: usize,
    /// Scaled change of the state over the final period.
    pub residual: f64,
    /// State at the end of the final period.
    pub state: Vec<f64>,
    /// State at the start of the final period.
    pub period_start_state: Vec<f64>,
}

/// Scaled max-norm of `b - a`, each component measured against the larger of
/// its magnitudes and its tolerance scale.
pub fn scaled_change<S: OdeSystem + ?Sized>(sys: &S, a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .enumerate()
        .map(|(i, (x, y))| (y - x).abs() / x.abs().max(y.abs()).max(sys.tolerance_scale(i)))
        .fold(0.0, f64::max)
}

/// Integrates whole periods from `t = 0` until the state at consecutive
/// period boundaries agrees to `pss_period_tol`.
pub fn run_to_pss<S: OdeSystem + ?Sized>(
    sys: &S,
    x0: Option<&[f64]>,
    period: f64,
    opts: &SolverOptions,
) -> Result<Pss> {
    if !(period > 0.0) {
        return Err(Error::invalid("pss", "period must be positive"));
    }
    let mut x = match x0 {
        Some(x) => x.to_vec(),
        None => sys.initial_state(),
    };
    let mut dt_hint = None;
    let mut residual = f64::INFINITY;
    for k in 1..=opts.pss_max_periods {
        let t0 = (k - 1) as f64 * period;
        let t1 = k as f64 * period;
        let run = integrate_from(sys, Some(&x), t0, t1, opts, dt_hint)?;
        residual = scaled_change(sys, &x, &run.final_state);
        dt_hint = Some(run.next_dt);
        if residual <= opts.pss_period_tol {
            return Ok(Pss {
                trace: run.trace,
                periods: k,
                residual,
                state: run.final_state,
                period_start_state: x,
            });
        }
        x = run.final_state;
    }
    Err(Error::NoSteadyState {
        periods: opts.pss_max_periods,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `x' = (u - x)/tau` with a constant input.
    struct Rc {
        tau: f64,
        u: f64,
    }

    impl OdeSystem for Rc {
        fn dim(&self) -> usize {
            1
        }
        fn rhs(&self, _t: f64, _m: f64, x: &[f64], dx: &mut [f64]) -> Result<()> {
            dx[0] = (self.u - x[0]) / self.tau;
            Ok(())
        }
    }

    #[test]
    fn rc_one_time_constant() {
        let sys = Rc { tau: 1e-6, u: 1.0 };
        let opts = SolverOptions {
            dt_max_s: 1e-7,
            rel_tol: 1e-8,
            abs_tol_v: 1e-10,
            ..SolverOptions::default()
        };
        let run = integrate(&sys, Some(&[0.0]), 0.0, 1e-6, &opts).unwrap();
        let exact = 1.0 - (-1.0f64).exp();
        let got = run.final_state[0];
        assert!((got - exact).abs() / exact < 1e-6, "{got} vs {exact}");
    }

    #[test]
    fn equilibrium_is_preserved() {
        let sys = Rc { tau: 1e-9, u: 2.0 };
        let run = integrate(&sys, Some(&[2.0]), 0.0, 1e-7, &SolverOptions::default()).unwrap();
        assert!(run.trace.nodes[0].values.iter().all(|v| (v - 2.0).abs() <= 1e-4));
    }

    struct Stepped;
    impl OdeSystem for Stepped {
        fn dim(&self) -> usize {
            1
        }
        fn rhs(&self, _t: f64, mode_t: f64, x: &[f64], dx: &mut [f64]) -> Result<()> {
            let u = if mode_t.rem_euclid(1e-6) < 0.5e-6 { 1.0 } else { 0.0 };
            dx[0] = (u - x[0]) / 1e-7;
            Ok(())
        }
        fn events(&self, t0: f64, t1: f64) -> Vec<(f64, String)> {
            let mut out = Vec::new();
            let mut k = (t0 / 0.5e-6).floor() as i64;
            loop {
                let t = k as f64 * 0.5e-6;
                if t >= t1 {
                    break;
                }
                if t >= t0 {
                    out.push((t, "edge".to_string()));
                }
                k += 1;
            }
            out
        }
    }

    #[test]
    fn events_land_exactly_and_times_increase() {
        let run = integrate(&Stepped, Some(&[0.0]), 0.0, 3e-6, &SolverOptions::default()).unwrap();
        for (t, _) in &run.trace.events {
            assert!(run.trace.times.contains(t), "missing {t}");
        }
        assert!(run.trace.times.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn pss_of_square_driven_rc() {
        let pss = run_to_pss(&Stepped, Some(&[0.0]), 1e-6, &SolverOptions::default()).unwrap();
        assert!(pss.periods <= 4, "{}", pss.periods);
        let again = run_to_pss(&Stepped, Some(&pss.period_start_state), 1e-6, &SolverOptions::default())
            .unwrap();
        assert_eq!(again.periods, 1);
    }

    #[test]
    fn bad_options_rejected() {
        let opts = SolverOptions {
            dt_min_s: 1.0,
            dt_max_s: 0.5,
            ..SolverOptions::default()
        };
        assert!(integrate(&Stepped, None, 0.0, 1.0, &opts).is_err());
    }
}
