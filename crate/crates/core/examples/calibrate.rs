//! Prints the calibration targets for the shipped defaults.
//!
//! Usage: cargo run --release --example calibrate [fig3|fig5|fig7|fig8|fig10]...

use std::time::Instant;

use gatewave::chain::{avg_supply_current, ChainSystem, Load, Scenario, Topology};
use gatewave::load::switching_times;
use gatewave::metrics::waveform_stats;
use gatewave::signal::Side;

fn driver(rail: f64, f: f64, duty: f64) -> Scenario {
    let mut sc = Scenario {
        topology: Topology::DriverSide(Side::Low),
        ..Scenario::default()
    };
    sc.pwm.frequency_hz = f;
    sc.pwm.duty_high = duty;
    sc.pwm.duty_low = duty;
    sc.isolator_lo.rail_v = rail;
    sc.totem_lo.rail_v = rail;
    sc
}

fn fig3() {
    for f in [1e6, 10e6, 20e6, 30e6] {
        let sc = driver(3.5, f, 0.5);
        let sys = ChainSystem::new(&sc).unwrap();
        let pss = sys.pss().unwrap();
        let w = waveform_stats(&pss.trace, "v_iso_lo", 3.5).unwrap();
        println!("fig3 f={:>5.1}MHz iso max {:.3} min {:.3}", f / 1e6, w.v_max, w.v_min);
    }
}

fn fig5() {
    let base = Scenario::default();
    for rail in [3.0, 3.5, 3.8, 4.0, 4.5] {
        let mut row = format!("fig5 rail {rail:.1}:");
        for f in [1e6, 2e6, 5e6, 10e6, 20e6, 30e6] {
            let s = avg_supply_current(&base, Side::Low, f, rail).unwrap();
            row.push_str(&format!(
                " {:.4}{}",
                s.avg_current_a,
                if s.runaway { "!" } else { "" }
            ));
        }
        println!("{row}");
    }
}

fn fig7() {
    for f in [1e6, 5e6, 10e6, 14e6, 20e6, 25e6, 30e6] {
        let sc = driver(3.5, f, 0.5);
        let sys = ChainSystem::new(&sc).unwrap();
        let pss = sys.pss().unwrap();
        let w = waveform_stats(&pss.trace, "v_gate_gan_lo", 3.5).unwrap();
        let wi = waveform_stats(&pss.trace, "v_iso_lo", 3.5).unwrap();
        println!(
            "fig7 f={:>5.1}MHz gate max {:.3} min {:.3}  iso {:.3}/{:.3} periods {}",
            f / 1e6,
            w.v_max,
            w.v_min,
            wi.v_max,
            wi.v_min,
            pss.periods
        );
    }
}

fn fig8() {
    for l in [20e-9, 2e-9] {
        let mut sc = Scenario {
            load: Load::Open { cap_f: 50e-12 },
            ..Scenario::default()
        };
        sc.pwm.frequency_hz = 14e6;
        sc.pwm.duty_high = 0.6;
        sc.pwm.duty_low = 0.6;
        sc.pushpull.parasitic_l_h = l;
        let sys = ChainSystem::new(&sc).unwrap();
        let pss = sys.pss().unwrap();
        let w = waveform_stats(&pss.trace, "v_out", 18.0).unwrap();
        let q = pss.trace.branch("i_shoot_pushpull").unwrap().total();
        println!(
            "fig8 L={:.0}nH max {:.3} min {:.3} overshoot {:.3} shoot {:.3e} periods {}",
            l * 1e9,
            w.v_max,
            w.v_min,
            w.overshoot_v,
            q,
            pss.periods
        );
    }
}

fn fig10() {
    let mut sc = Scenario::default();
    sc.pwm.frequency_hz = 20e6;
    sc.pwm.duty_high = 0.55;
    sc.pwm.duty_low = 0.55;
    let sys = ChainSystem::new(&sc).unwrap();
    let pss = sys.pss().unwrap();
    let g = waveform_stats(&pss.trace, "v_gs_sic", 18.0).unwrap();
    let d = waveform_stats(&pss.trace, "v_ds_sic", 50.0).unwrap();
    let (t_on, t_off) = switching_times(&pss.trace).unwrap_or((f64::NAN, f64::NAN));
    let q = pss.trace.branch("i_shoot_pushpull").unwrap().total();
    println!(
        "fig10 periods {} vgs {:.3}/{:.3} vds {:.3}/{:.3} t_on {:.2}ns t_off {:.2}ns shoot {:.3e}",
        pss.periods,
        g.v_max,
        g.v_min,
        d.v_min,
        d.v_max,
        t_on * 1e9,
        t_off * 1e9,
        q
    );
}

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let all = args.is_empty();
    let want = |name: &str| all || args.iter().any(|a| a == name);
    for (name, f) in [
        ("fig3", fig3 as fn()),
        ("fig5", fig5),
        ("fig7", fig7),
        ("fig8", fig8),
        ("fig10", fig10),
    ] {
        if want(name) {
            let start = Instant::now();
            f();
            println!("  ({name}: {:.2} s)", start.elapsed().as_secs_f64());
        }
    }
}
