//! Acceptance checks, one line per criterion. Runs without the libtest
//! harness so the lines are always printed; exits non-zero if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use ehsim_core::circuit::CircuitParams;
use ehsim_core::load::{active_cycle_energy, sleep_energy};
use ehsim_core::planner::{harvest_power_oracle, solve_sleep_time};
use ehsim_core::presets::{
    nominal_scenario, perturbation_grid, reference_profile, LIGHT_LEVELS, LUX_PERTURBATION,
    OPERATIONAL_VOLTAGE, SLEEP_CURRENT,
};
use ehsim_core::validation::{
    compare_series, EnergyDeviationAt, FitSettings, FreeParameter, ParameterRange, TraceMetadata,
};
use ehsim_core::{
    compare, fit_parameters, run, CircuitMode, Dynamics, EventKind, MeasuredTrace, ScenarioConfig,
    SimTrace,
};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(id: u32, name: &str, budget: Duration, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let out = f();
    let elapsed = start.elapsed();
    let in_time = elapsed <= budget;
    let pass = out.pass && in_time;
    println!(
        "criterion {id} [{}] {name}: {} ({:.3} s, limit {} s)",
        if pass { "PASS" } else { "FAIL" },
        out.detail,
        elapsed.as_secs_f64(),
        budget.as_secs()
    );
    pass
}

/// Printed joule values next to current (A) and duration (s).
const PRINTED_ENERGIES: [(&str, f64, f64, f64); 6] = [
    ("sensors reading", 7.550e-3, 0.260, 0.0065),
    ("advertising", 0.400e-3, 2.000, 0.0026),
    ("data exchange", 0.225e-3, 3.000, 0.0022),
    ("sleep 300 lx", SLEEP_CURRENT, 209.9, 0.0484),
    ("sleep 500 lx", SLEEP_CURRENT, 42.44, 0.0098),
    ("sleep 700 lx", SLEEP_CURRENT, 18.10, 0.0041),
];

fn criterion_1() -> Outcome {
    let profile = reference_profile();
    let mut worst: (f64, &str) = (0.0, "");
    for (name, current, time, printed) in PRINTED_ENERGIES {
        let e = current * OPERATIONAL_VOLTAGE * time;
        let rel = (e - printed).abs() / printed;
        if rel > worst.0 {
            worst = (rel, name);
        }
    }
    // the shipped profile must reproduce the same cells
    let active: f64 = PRINTED_ENERGIES[..3]
        .iter()
        .map(|(_, i, t, _)| i * OPERATIONAL_VOLTAGE * t)
        .sum();
    let consistent = (active_cycle_energy(&profile) - active).abs() < 1e-15
        && LIGHT_LEVELS.iter().zip(&PRINTED_ENERGIES[3..]).all(|(l, row)| {
            (sleep_energy(&profile, l.sleep_time) - row.1 * OPERATIONAL_VOLTAGE * row.2).abs()
                < 1e-15
        });
    Outcome {
        pass: worst.0 <= 0.02 && consistent,
        detail: format!(
            "worst cell {} off by {:.2}% (tolerance 2%), profile consistent: {consistent}",
            worst.1,
            worst.0 * 100.0
        ),
    }
}

fn criterion_2() -> Outcome {
    let profile = reference_profile();
    let mut pass = true;
    let mut parts = Vec::new();
    for level in &LIGHT_LEVELS {
        let p = harvest_power_oracle(&profile, level.sleep_time);
        let t_s = solve_sleep_time(p, &profile).unwrap_or(f64::NAN);
        let period = profile.active_duration() + t_s;
        let e_ts = (t_s - level.sleep_time).abs() / level.sleep_time;
        let e_t = (period - level.reported_period).abs() / level.reported_period;
        pass &= e_ts <= 0.005 && e_t <= 0.01;
        parts.push(format!(
            "{} lx T_s {:.4} s ({:.1e}) T {:.2} s vs {} ({:.2}%)",
            level.lux,
            t_s,
            e_ts,
            period,
            level.reported_period,
            e_t * 100.0
        ));
    }
    Outcome {
        pass,
        detail: parts.join("; "),
    }
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    let unit = (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
    lo + (hi - lo) * unit
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    uniform(rng, lo.ln(), hi.ln()).exp()
}

/// Longest span over which the trajectory stays within `[0.25, 4.5]` V,
/// capped at one time constant.
fn physical_span(d: &Dynamics, v0: f64, params: &CircuitParams) -> f64 {
    let bound = match d.trend(v0, params) {
        1 => d.time_to_voltage(v0, 4.5, params).ok().flatten(),
        -1 => d.time_to_voltage(v0, 0.25, params).ok().flatten(),
        _ => None,
    };
    bound.unwrap_or(f64::INFINITY).min(params.time_constant())
}

fn criterion_3() -> Outcome {
    const SETS: usize = 1000;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut pass = true;
    let mut parts = Vec::new();
    for mode in CircuitMode::ALL {
        let mut worst: f64 = 0.0;
        let mut failures = 0;
        for _ in 0..SETS {
            let params = CircuitParams {
                capacitance: uniform(&mut rng, 0.01, 1.0),
                leakage_resistance: log_uniform(&mut rng, 1e4, 1e7),
                w_pm: 1.0,
                e_pm: 3.3,
                v_on: 3.0,
                v_off: 2.5,
                coldstart_energy: 0.0,
                coldstart_duration: 0.0,
            };
            let p_eh = log_uniform(&mut rng, 1e-5, 1e-1);
            let p_cl = log_uniform(&mut rng, 1e-5, 1e-1);
            let v0 = uniform(&mut rng, 0.5, 4.5);
            let frac = uniform(&mut rng, 0.01, 1.0);
            let d = Dynamics::new(mode, p_eh, p_cl);
            let t = frac * physical_span(&d, v0, &params);
            match (d.voltage_at(v0, t, &params), d.rk4(v0, t, 1e-4 * t, &params)) {
                (Ok(exact), Ok(reference)) => {
                    worst = worst.max((exact - reference).abs() / exact);
                }
                _ => failures += 1,
            }
        }
        pass &= worst <= 1e-6 && failures == 0;
        parts.push(format!(
            "{}/{} max rel {:.1e}{}",
            if mode.pm_on { "on" } else { "off" },
            if mode.eh_connected { "conn" } else { "disc" },
            worst,
            if failures > 0 { format!(" ({failures} errors)") } else { String::new() }
        ));
    }
    Outcome {
        pass,
        detail: format!("{SETS} sets per mode: {}", parts.join(", ")),
    }
}

const GRID_PERIODS: usize = 4;

fn grid_traces(periods: usize, horizon: Option<f64>) -> Vec<(String, f64, ScenarioConfig, SimTrace)> {
    perturbation_grid(periods)
        .into_iter()
        .map(|(level, offset, mut cfg)| {
            if let Some(h) = horizon {
                cfg.illumination.horizon = h;
                cfg.record_interval = 10.0;
            }
            let trace = run(&cfg).expect("grid scenario runs");
            (format!("{}@{}", level.lux, level.lux + offset), offset, cfg, trace)
        })
        .collect()
}

fn criterion_4(grid: &[(String, f64, ScenarioConfig, SimTrace)]) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (label, offset, _, trace) in grid {
        let dv = trace.cycle_voltage_deltas();
        let ok = dv.len() == GRID_PERIODS
            && dv.iter().all(|&d| {
                if *offset == 0.0 {
                    d.abs() <= 1e-3
                } else if *offset == LUX_PERTURBATION {
                    d > 0.0
                } else {
                    d < 0.0
                }
            });
        pass &= ok;
        let mean = dv.iter().sum::<f64>() / dv.len().max(1) as f64;
        parts.push(format!("{label} {mean:+.2e}{}", if ok { "" } else { " !" }));
    }
    Outcome {
        pass,
        detail: format!("mean dV/period [V]: {}", parts.join(", ")),
    }
}

fn threshold_events(
    grid: &[(String, f64, ScenarioConfig, SimTrace)],
) -> (usize, f64, [usize; 3]) {
    let mut count = 0;
    let mut worst: f64 = 0.0;
    let mut kinds = [0; 3];
    for (_, _, cfg, trace) in grid {
        for e in &trace.events {
            let (slot, target) = match e.kind {
                EventKind::VOn => (0, cfg.circuit.v_on),
                EventKind::VOff => (1, cfg.circuit.v_off),
                EventKind::EehClamp => (2, cfg.harvest.sample(cfg.illumination.lux_at(e.t)).e_eh),
                _ => continue,
            };
            count += 1;
            kinds[slot] += 1;
            worst = worst.max((e.v_c - target).abs());
        }
    }
    (count, worst, kinds)
}

fn criterion_5(grid: &[(String, f64, ScenarioConfig, SimTrace)]) -> Outcome {
    let (n, worst, _) = threshold_events(grid);
    // The nominal runs stay between the thresholds, so the same nine
    // scenarios are also run long enough to cross them.
    let long = grid_traces(GRID_PERIODS, Some(20_000.0));
    let (n_long, worst_long, kinds) = threshold_events(&long);
    Outcome {
        pass: worst <= 1e-9 && worst_long <= 1e-9 && n_long > 0,
        detail: format!(
            "{n} threshold events in the criterion-4 runs (max error {worst:.1e} V); \
             20000 s runs: {n_long} events (v_on {}, v_off {}, eeh_clamp {}), max error {worst_long:.1e} V",
            kinds[0], kinds[1], kinds[2]
        ),
    }
}

fn criterion_6() -> Outcome {
    let mut cfg = nominal_scenario(&LIGHT_LEVELS[0], 0.0, 1);
    cfg.illumination.horizon = 800.0;
    let trace = run(&cfg).expect("runs");
    let meas = MeasuredTrace::from_sim(&trace, TraceMetadata::default()).expect("valid");
    let own = compare(&trace, &meas, &cfg.circuit).expect("overlap");
    let zero = own.max_abs_dv == 0.0
        && own.dv_at_horizon == 0.0
        && own.rms_dv == 0.0
        && own.energy_deviation_pct == 0.0;
    let shifted: Vec<_> = meas.records.iter().map(|&(t, v)| (t, v + 0.0012)).collect();
    let report = compare_series(
        &trace.voltage_series(),
        &shifted,
        &cfg.circuit,
        EnergyDeviationAt::Horizon,
    )
    .expect("overlap");
    let err = (report.dv_at_horizon - 0.0012).abs();
    Outcome {
        pass: zero && err <= 1e-6 && report.horizon == 800.0,
        detail: format!(
            "self-comparison zero: {zero}; planted 0.0012 V over {} s -> dv_at_horizon {:.9} V (error {err:.1e})",
            report.horizon, report.dv_at_horizon
        ),
    }
}

fn recover(parameter: FreeParameter, planted: f64, lower: f64, upper: f64) -> (bool, String) {
    let mut base = nominal_scenario(&LIGHT_LEVELS[1], 0.0, 2);
    base.record_interval = 0.5;
    let mut truth = base.clone();
    parameter.set(&mut truth, planted);
    let meas = MeasuredTrace::from_sim(&run(&truth).expect("runs"), TraceMetadata::default())
        .expect("valid");
    let free = [ParameterRange {
        parameter,
        lower,
        upper,
    }];
    match fit_parameters(&meas, &base, &free, &FitSettings::default()) {
        Ok(fit) => {
            let p = &fit.parameters[0];
            let ok = (p.value - planted).abs() <= p.resolution;
            (
                ok,
                format!(
                    "{parameter:?} planted {planted} fitted {:.6} (grid step {:.1e})",
                    p.value, p.resolution
                ),
            )
        }
        Err(e) => (false, format!("{parameter:?}: {e}")),
    }
}

fn criterion_7() -> Outcome {
    let (a, da) = recover(FreeParameter::WPm, 1.1, 1.0, 1.3);
    let (b, db) = recover(FreeParameter::HarvestScale, 1.05, 0.8, 1.2);
    Outcome {
        pass: a && b,
        detail: format!("{da}; {db}"),
    }
}

fn main() -> ExitCode {
    let secs = Duration::from_secs;
    let mut all = true;
    all &= check(1, "load-profile energy cells", secs(1), criterion_1);
    all &= check(2, "duty-cycle round trip", secs(1), criterion_2);
    all &= check(3, "closed forms vs RK4", secs(30), criterion_3);

    let mut grid = Vec::new();
    all &= check(4, "trend signs at nominal / +100 lx / -100 lx", secs(10), || {
        grid = grid_traces(GRID_PERIODS, None);
        criterion_4(&grid)
    });
    all &= check(5, "event exactness", secs(60), || criterion_5(&grid));
    all &= check(6, "validation self-test", secs(10), criterion_6);
    all &= check(7, "parameter recovery", secs(60), criterion_7);

    if all {
        println!("acceptance: all criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: FAILURES above");
        ExitCode::FAILURE
    }
}
