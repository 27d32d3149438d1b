use ehsim_core::circuit::{v_off_disconnected, VOLTAGE_TOL};
use ehsim_core::presets::{nominal_scenario, prototype_circuit, reference_profile, LIGHT_LEVELS};
use ehsim_core::scenario::LuxSegment;
use ehsim_core::trace::energy_balance_over;
use ehsim_core::{
    energy_balance, run, sweep, CircuitMode, EventKind, IlluminationProfile, PhaseKind,
    ScenarioConfig, SimTrace, SleepTime,
};

fn auto_700(horizon: f64) -> ScenarioConfig {
    let mut cfg = nominal_scenario(&LIGHT_LEVELS[2], 0.0, 1);
    cfg.sleep_time = SleepTime::Auto;
    cfg.illumination.horizon = horizon;
    cfg
}

fn assert_well_formed(trace: &SimTrace) {
    for w in trace.records.windows(2) {
        assert!(w[1].t > w[0].t, "time not increasing at {}", w[1].t);
    }
    for w in trace.segments.windows(2) {
        assert_eq!(w[0].t_end, w[1].t_start);
        assert!((w[0].v_end - w[1].v_start).abs() <= VOLTAGE_TOL);
    }
    for r in &trace.records {
        let charging = r.p_eh > r.p_cl;
        if r.mode == CircuitMode::ON_CONNECTED && r.p_eh != r.p_cl {
            assert_eq!(r.i_c > 0.0, charging, "i_c sign at t = {}", r.t);
        }
    }
}

#[test]
fn steady_state_at_700_lux() {
    let trace = run(&auto_700(200.0)).unwrap();
    assert_well_formed(&trace);
    let deltas = trace.cycle_voltage_deltas();
    assert!(deltas.len() >= 7, "{deltas:?}");
    for dv in deltas {
        assert!(dv.abs() <= 1e-3, "{dv}");
    }
    for period in trace.cycle_periods() {
        assert!((period - 23.3).abs() / 23.3 < 0.01, "{period}");
    }
}

#[test]
fn dark_and_unpowered_is_pure_leakage() {
    let mut cfg = auto_700(1000.0);
    cfg.illumination = IlluminationProfile::constant(0.0, 1000.0);
    cfg.circuit.v_on = 3.5;
    cfg.circuit.v_off = 2.0;
    cfg.record_interval = 7.0;
    let trace = run(&cfg).unwrap();
    assert!(trace.records.iter().all(|r| r.load_state == PhaseKind::Off));
    for r in &trace.records {
        let expected = v_off_disconnected(3.3, r.t, &cfg.circuit).unwrap();
        assert!((r.v_c - expected).abs() < 1e-12, "t = {}", r.t);
        assert!(r.i_c < 0.0);
    }
    let b = energy_balance(&trace, &cfg.circuit).unwrap();
    assert_eq!(b.harvested, 0.0);
    assert_eq!(b.consumed, 0.0);
    assert!((b.delta_stored + b.leaked).abs() < 1e-12);
}

#[test]
fn over_harvesting_raises_the_envelope() {
    // 500 lx schedule at 600 lx
    let cfg = nominal_scenario(&LIGHT_LEVELS[1], 100.0, 6);
    let trace = run(&cfg).unwrap();
    let deltas = trace.cycle_voltage_deltas();
    assert_eq!(deltas.len(), 6);
    assert!(deltas.iter().all(|&dv| dv > 0.0), "{deltas:?}");
}

#[test]
fn zero_horizon_gives_one_record() {
    let mut cfg = auto_700(0.0);
    cfg.illumination.horizon = 0.0;
    let trace = run(&cfg).unwrap();
    assert_eq!(trace.records.len(), 1);
    assert_eq!(trace.records[0].v_c, cfg.initial_voltage);
    assert!(trace.segments.is_empty());
}

#[test]
fn runs_are_deterministic() {
    let mut cfg = auto_700(120.0);
    cfg.options.randomize_advertising = true;
    cfg.options.seed = 7;
    let traces = sweep(&[cfg.clone(), cfg.clone()]);
    let a = traces[0].as_ref().unwrap();
    let b = traces[1].as_ref().unwrap();
    assert_eq!(a, b);
    assert_eq!(a, &run(&cfg).unwrap());

    cfg.options.seed = 8;
    assert_ne!(a, &run(&cfg).unwrap());
}

#[test]
fn sweep_collects_errors_without_aborting() {
    let good = auto_700(50.0);
    let mut bad = good.clone();
    bad.circuit.v_off = 5.0;
    let results = sweep(&[good.clone(), bad, good]);
    assert!(results[0].is_ok());
    assert!(results[1].is_err());
    assert!(results[2].is_ok());
}

#[test]
fn randomized_advertising_stays_in_window() {
    let mut cfg = auto_700(300.0);
    cfg.options.randomize_advertising = true;
    cfg.options.seed = 42;
    let trace = run(&cfg).unwrap();
    let mut durations = Vec::new();
    for w in trace.events.windows(2) {
        if w[0].kind == EventKind::PhaseChange && w[0].load_state == PhaseKind::BleAdvertising {
            durations.push(w[1].t - w[0].t);
        }
    }
    assert!(durations.len() >= 5);
    assert!(durations.iter().all(|&d| (0.0..4.0).contains(&d)));
    assert!(durations.windows(2).any(|w| w[0] != w[1]));
}

/// Light for a while, then darkness long enough to hit V_off, then light again.
fn dropout_scenario() -> ScenarioConfig {
    let mut cfg = auto_700(0.0);
    cfg.sleep_time = SleepTime::Fixed(5.0);
    cfg.illumination = IlluminationProfile {
        segments: vec![
            LuxSegment { start: 0.0, lux: 700.0 },
            LuxSegment { start: 60.0, lux: 0.0 },
            LuxSegment { start: 6000.0, lux: 2000.0 },
        ],
        horizon: 9000.0,
    };
    cfg.record_interval = 1.0;
    cfg
}

#[test]
fn dropout_crosses_thresholds_exactly() {
    let cfg = dropout_scenario();
    let trace = run(&cfg).unwrap();
    assert_well_formed(&trace);
    assert!(trace.count(EventKind::VOff) >= 1);
    assert!(trace.count(EventKind::VOn) >= 1);
    for e in &trace.events {
        let threshold = match e.kind {
            EventKind::VOff => cfg.circuit.v_off,
            EventKind::VOn => cfg.circuit.v_on,
            _ => continue,
        };
        assert!((e.v_c - threshold).abs() <= 1e-9);
        // the record at the event instant carries the same voltage
        let rec = trace.records.iter().find(|r| r.t == e.t).unwrap();
        assert!((rec.v_c - threshold).abs() <= 1e-9);
    }
    // no load power while off
    for r in &trace.records {
        if !r.mode.pm_on {
            assert_eq!(r.p_cl, 0.0);
            assert_eq!(r.load_state, PhaseKind::Off);
        }
    }
}

#[test]
fn lux_change_mid_phase_splits_the_interval() {
    let mut cfg = auto_700(0.0);
    cfg.sleep_time = SleepTime::Fixed(18.10);
    cfg.illumination = IlluminationProfile {
        segments: vec![
            LuxSegment { start: 0.0, lux: 700.0 },
            LuxSegment { start: 1.0, lux: 500.0 },
        ],
        horizon: 4.0,
    };
    let trace = run(&cfg).unwrap();
    let lux = trace.events.iter().find(|e| e.kind == EventKind::LuxChange).unwrap();
    assert_eq!(lux.t, 1.0);
    assert_eq!(lux.load_state, PhaseKind::BleAdvertising);
    // the advertising phase still ends at 0.26 + 2 s
    let next = trace
        .events
        .iter()
        .find(|e| e.kind == EventKind::PhaseChange && e.load_state == PhaseKind::DataExchange)
        .unwrap();
    assert!((next.t - 2.26).abs() < 1e-12);
    let split: Vec<_> = trace
        .segments
        .iter()
        .filter(|s| s.load_state == PhaseKind::BleAdvertising)
        .collect();
    assert_eq!(split.len(), 2);
    assert!(split[1].p_eh < split[0].p_eh);
}

#[test]
fn overcharge_clamps_at_e_eh() {
    let mut cfg = auto_700(0.0);
    cfg.sleep_time = SleepTime::Fixed(30.0);
    cfg.initial_voltage = 3.98;
    cfg.illumination = IlluminationProfile::constant(3000.0, 600.0);
    let trace = run(&cfg).unwrap();
    assert_well_formed(&trace);
    let e_eh = cfg.harvest.sample(3000.0).e_eh;
    assert!(trace.count(EventKind::EehClamp) >= 1);
    for e in trace.events.iter().filter(|e| e.kind == EventKind::EehClamp) {
        assert!((e.v_c - e_eh).abs() <= 1e-9);
    }
    for r in &trace.records {
        assert!(r.v_c <= e_eh + 1e-9, "overcharged: {} at {}", r.v_c, r.t);
    }
    // while clamped the harvester is disconnected
    assert!(trace
        .segments
        .iter()
        .any(|s| s.mode == CircuitMode::ON_DISCONNECTED));
}

#[test]
fn cold_start_penalty_is_applied() {
    let mut cfg = dropout_scenario();
    cfg.circuit.coldstart_energy = 0.05;
    cfg.circuit.coldstart_duration = 2.0;
    let trace = run(&cfg).unwrap();
    let begin = trace
        .events
        .iter()
        .find(|e| e.kind == EventKind::ColdStartBegin)
        .unwrap();
    let end = trace
        .events
        .iter()
        .find(|e| e.kind == EventKind::ColdStartEnd)
        .unwrap();
    assert!((end.t - begin.t - 2.0).abs() < 1e-9);
    let b = energy_balance_over(&trace, &cfg.circuit, begin.t, end.t).unwrap();
    assert!((b.consumed - 0.05).abs() < 1e-12);
    assert!(b.imbalance().abs() < 1e-9);
}

#[test]
fn segments_match_the_rk4_reference() {
    for cfg in [dropout_scenario(), auto_700(60.0)] {
        let trace = run(&cfg).unwrap();
        for seg in trace.segments.iter().filter(|s| s.v_end > 0.5) {
            let d = seg.duration();
            let reference = seg
                .dynamics()
                .rk4(seg.v_start, d, d / 1e4, &cfg.circuit)
                .unwrap();
            let err = (reference - seg.v_end).abs() / seg.v_end;
            assert!(err <= 1e-6, "{seg:?}: rk4 {reference}");
        }
    }
}

#[test]
fn energy_balance_over_a_steady_period() {
    let cfg = auto_700(100.0);
    let trace = run(&cfg).unwrap();
    let starts = trace.cycle_starts();
    let b = energy_balance_over(&trace, &cfg.circuit, starts[1].0, starts[2].0).unwrap();
    assert!((b.harvested - b.consumed).abs() <= 0.01 * b.consumed);
    assert_eq!(b.leaked, 0.0);
    assert!(b.imbalance().abs() < 1e-12);

    let whole = energy_balance(&trace, &cfg.circuit).unwrap();
    assert!(whole.imbalance().abs() < 1e-9);
}

#[test]
fn off_connected_charging_is_lossless() {
    let mut cfg = auto_700(3000.0);
    cfg.initial_voltage = 1.0;
    cfg.record_interval = 10.0;
    let trace = run(&cfg).unwrap();
    let seg = trace.segments[0];
    assert_eq!(seg.mode, CircuitMode::OFF_CONNECTED);
    let b = energy_balance_over(&trace, &cfg.circuit, seg.t_start, seg.t_end).unwrap();
    assert_eq!(b.leaked, 0.0);
    assert!((b.harvested - b.delta_stored).abs() < 1e-12);
    // charging ends exactly at V_on
    assert!((seg.v_end - cfg.circuit.v_on).abs() < 1e-9);
}

#[test]
fn leaky_connected_modes_balance() {
    let mut cfg = dropout_scenario();
    cfg.options.leakage_in_connected_modes = true;
    let trace = run(&cfg).unwrap();
    assert_well_formed(&trace);
    let b = energy_balance(&trace, &cfg.circuit).unwrap();
    assert!(b.leaked > 0.0);
    assert!(b.imbalance().abs() < 1e-9, "{b:?}");
}

#[test]
fn auto_sleep_replans_on_lux_change() {
    let mut cfg = auto_700(0.0);
    cfg.illumination = IlluminationProfile {
        segments: vec![
            LuxSegment { start: 0.0, lux: 700.0 },
            LuxSegment { start: 200.0, lux: 500.0 },
        ],
        horizon: 500.0,
    };
    let trace = run(&cfg).unwrap();
    let periods = trace.cycle_periods();
    let last = *periods.last().unwrap();
    assert!((last - 47.6).abs() / 47.6 < 0.01, "{periods:?}");
    assert!((periods[0] - 23.3).abs() / 23.3 < 0.01);
}

#[test]
fn invalid_configs_are_rejected() {
    let mut cfg = auto_700(10.0);
    cfg.initial_voltage = 4.5;
    assert!(run(&cfg).is_err());
    let mut cfg = auto_700(10.0);
    cfg.record_interval = 0.0;
    assert!(run(&cfg).is_err());
    let mut cfg = auto_700(10.0);
    cfg.circuit = prototype_circuit();
    cfg.circuit.v_on = 4.2;
    assert!(run(&cfg).is_err());
    let mut cfg = auto_700(10.0);
    cfg.load = reference_profile();
    cfg.illumination.segments[0].start = 1.0;
    assert!(run(&cfg).is_err());
}
