//! Event-driven scenario simulation.
//!
//! The scenario is cut into intervals over which the illuminance, the load
//! phase and the circuit mode are all constant. Each interval is advanced with
//! its closed-form law; its end is the earliest of the phase end, the lux
//! segment end, the horizon, and the analytic crossing times of `V_off`,
//! `V_on` and `E_eh`.

use alloc::vec::Vec;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::circuit::{CircuitMode, Dynamics, VOLTAGE_TOL};
use crate::error::{Error, Result};
use crate::harvest::HarvestSample;
use crate::load::PhaseKind;
use crate::planner::solve_sleep_time;
use crate::scenario::{ScenarioConfig, SleepTime};
use crate::trace::{Event, EventKind, Segment, SimTrace, TraceRecord};

/// Upper bound of the randomized advertising window (s).
pub const ADVERTISING_WINDOW: f64 = 4.0;

/// Zero-length steps tolerated in a row before the engine gives up.
const MAX_STALLS: usize = 64;

fn same_time_tol(t: f64) -> f64 {
    1e-12 * t.abs().max(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Stage {
    Active(usize),
    Sleep,
    ColdStart,
    Off,
}

struct Engine<'a> {
    cfg: &'a ScenarioConfig,
    rng: Option<ChaCha8Rng>,
    t: f64,
    v: f64,
    pm_on: bool,
    stage: Stage,
    stage_end: f64,
    sleep_start: f64,
    clamped: bool,
    lux_idx: usize,
    advertising: f64,
    next_grid: u64,
    trace: SimTrace,
}

/// Simulates one scenario over `[0, horizon]`.
pub fn run(config: &ScenarioConfig) -> Result<SimTrace> {
    config.validate()?;
    let mut engine = Engine::new(config);
    engine.start()?;
    engine.run()?;
    Ok(engine.trace)
}

/// Runs every scenario in order; a failing scenario does not abort the batch.
pub fn sweep(configs: &[ScenarioConfig]) -> Vec<Result<SimTrace>> {
    configs.iter().map(run).collect()
}

impl<'a> Engine<'a> {
    fn new(cfg: &'a ScenarioConfig) -> Self {
        let rng = cfg
            .options
            .randomize_advertising
            .then(|| ChaCha8Rng::seed_from_u64(cfg.options.seed));
        Engine {
            cfg,
            rng,
            t: 0.0,
            v: cfg.initial_voltage,
            pm_on: false,
            stage: Stage::Off,
            stage_end: f64::INFINITY,
            sleep_start: 0.0,
            clamped: false,
            lux_idx: 0,
            advertising: 0.0,
            next_grid: 0,
            trace: SimTrace::default(),
        }
    }

    fn start(&mut self) -> Result<()> {
        if self.v >= self.cfg.circuit.v_on {
            self.pm_on = true;
            self.start_cycle()
        } else {
            self.event(EventKind::PhaseChange, PhaseKind::Off);
            Ok(())
        }
    }

    fn run(&mut self) -> Result<()> {
        let params = &self.cfg.circuit;
        let horizon = self.cfg.illumination.horizon;
        let mut stalls = 0;
        while self.t < horizon {
            let dynamics = self.dynamics();
            self.record(&dynamics, self.t, self.v);

            let e_eh = self.harvest().e_eh;
            let trend = dynamics.trend(self.v, params);
            let lux_end = self.cfg.illumination.segment_end(self.lux_idx);
            let stage_end = if self.stage == Stage::Off {
                f64::INFINITY
            } else {
                self.stage_end
            };
            let mut t_next = horizon.min(lux_end).min(stage_end);

            let mut threshold: Option<(EventKind, f64)> = None;
            let mut candidates = Vec::with_capacity(2);
            if self.pm_on && trend < 0 {
                candidates.push((EventKind::VOff, params.v_off));
            }
            if !self.pm_on && trend > 0 {
                candidates.push((EventKind::VOn, params.v_on));
            }
            if dynamics.mode.eh_connected && trend > 0 {
                candidates.push((EventKind::EehClamp, e_eh));
            }
            for (kind, target) in candidates {
                let crossing = if kind == EventKind::EehClamp && self.v >= target - VOLTAGE_TOL {
                    Some(0.0)
                } else {
                    dynamics.time_to_voltage(self.v, target, params)?
                };
                if let Some(dt) = crossing {
                    if self.t + dt <= t_next {
                        t_next = self.t + dt;
                        threshold = Some((kind, target));
                    }
                }
            }

            let dt = t_next - self.t;
            let v_end = match threshold {
                Some((_, target)) => target,
                None => dynamics.voltage_at(self.v, dt, params)?,
            };
            if dt > 0.0 {
                self.emit_grid(&dynamics, t_next)?;
                self.trace.segments.push(Segment {
                    t_start: self.t,
                    t_end: t_next,
                    v_start: self.v,
                    v_end,
                    load_state: self.stage_kind(),
                    mode: dynamics.mode,
                    p_eh: dynamics.p_eh,
                    p_cl: dynamics.load_power(),
                    leakage: dynamics.leakage,
                });
                stalls = 0;
            } else {
                stalls += 1;
                if stalls > MAX_STALLS {
                    return Err(Error::Nonconvergence {
                        t0: self.t,
                        t1: t_next,
                    });
                }
            }
            self.t = t_next;
            self.v = v_end;

            if let Some((kind, _)) = threshold {
                self.on_threshold(kind)?;
            }
            let mut boundary = false;
            if self.stage != Stage::Off && self.stage_end <= self.t + same_time_tol(self.t) {
                self.advance_stage()?;
                boundary = true;
            }
            if lux_end <= self.t + same_time_tol(self.t)
                && self.lux_idx + 1 < self.cfg.illumination.segments.len()
                && lux_end < horizon
            {
                self.lux_idx += 1;
                self.event(EventKind::LuxChange, self.stage_kind());
                if self.stage == Stage::Sleep && self.cfg.sleep_time == SleepTime::Auto {
                    let t_s = self.sleep_duration()?;
                    self.stage_end = (self.sleep_start + t_s).max(self.t);
                }
                boundary = true;
            }
            if boundary {
                self.release_clamp();
            }
        }
        let dynamics = self.dynamics();
        self.record(&dynamics, self.t, self.v);
        Ok(())
    }

    fn harvest(&self) -> HarvestSample {
        let lux = self.cfg.illumination.segments[self.lux_idx].lux;
        self.cfg.harvest.sample(lux)
    }

    fn stage_kind(&self) -> PhaseKind {
        match self.stage {
            Stage::Active(i) => self.cfg.load.phases[i].kind,
            Stage::Sleep => PhaseKind::Sleep,
            Stage::ColdStart => PhaseKind::ColdStart,
            Stage::Off => PhaseKind::Off,
        }
    }

    fn load_power(&self) -> f64 {
        let load = &self.cfg.load;
        match self.stage {
            Stage::Active(i) => load.phases[i].power(),
            Stage::Sleep => load.sleep_power(),
            Stage::ColdStart => {
                let c = &self.cfg.circuit;
                c.coldstart_energy / c.coldstart_duration
            }
            Stage::Off => 0.0,
        }
    }

    fn dynamics(&self) -> Dynamics {
        let p_eh = self.harvest().power;
        let mode = CircuitMode::new(self.pm_on, p_eh > 0.0 && !self.clamped);
        let p_cl = if self.pm_on { self.load_power() } else { 0.0 };
        Dynamics::new(mode, p_eh, p_cl).with_leakage(self.cfg.options.leakage_model())
    }

    fn phase_duration(&self, i: usize) -> f64 {
        let phase = &self.cfg.load.phases[i];
        if phase.kind == PhaseKind::BleAdvertising && self.rng.is_some() {
            self.advertising
        } else {
            phase.duration
        }
    }

    fn sleep_duration(&self) -> Result<f64> {
        match self.cfg.sleep_time {
            SleepTime::Fixed(t_s) => Ok(t_s),
            SleepTime::Auto => match solve_sleep_time(self.harvest().power, &self.cfg.load) {
                Ok(t_s) => Ok(t_s),
                // Sleep until the light changes.
                Err(Error::NeverFeasible { .. }) => Ok(f64::INFINITY),
                Err(e) => Err(e),
            },
        }
    }

    fn start_cycle(&mut self) -> Result<()> {
        if let Some(rng) = self.rng.as_mut() {
            let unit = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
            self.advertising = unit * ADVERTISING_WINDOW;
        }
        self.stage = Stage::Active(0);
        self.stage_end = self.t + self.phase_duration(0);
        self.event(EventKind::PhaseChange, self.stage_kind());
        Ok(())
    }

    fn advance_stage(&mut self) -> Result<()> {
        match self.stage {
            Stage::Active(i) if i + 1 < self.cfg.load.phases.len() => {
                self.stage = Stage::Active(i + 1);
                self.stage_end = self.t + self.phase_duration(i + 1);
                self.event(EventKind::PhaseChange, self.stage_kind());
                Ok(())
            }
            Stage::Active(_) => {
                let t_s = self.sleep_duration()?;
                if t_s > 0.0 {
                    self.stage = Stage::Sleep;
                    self.sleep_start = self.t;
                    self.stage_end = self.t + t_s;
                    self.event(EventKind::PhaseChange, PhaseKind::Sleep);
                    Ok(())
                } else {
                    self.start_cycle()
                }
            }
            Stage::Sleep => self.start_cycle(),
            Stage::ColdStart => {
                self.event(EventKind::ColdStartEnd, self.cfg.load.phases[0].kind);
                self.start_cycle()
            }
            Stage::Off => Ok(()),
        }
    }

    fn on_threshold(&mut self, kind: EventKind) -> Result<()> {
        match kind {
            EventKind::VOff => {
                self.pm_on = false;
                self.stage = Stage::Off;
                self.stage_end = f64::INFINITY;
                self.clamped = false;
                self.event(EventKind::VOff, PhaseKind::Off);
                Ok(())
            }
            EventKind::VOn => {
                self.pm_on = true;
                let c = &self.cfg.circuit;
                if c.coldstart_duration > 0.0 {
                    self.event(EventKind::VOn, PhaseKind::ColdStart);
                    self.stage = Stage::ColdStart;
                    self.stage_end = self.t + c.coldstart_duration;
                    self.event(EventKind::ColdStartBegin, PhaseKind::ColdStart);
                    Ok(())
                } else {
                    self.event(EventKind::VOn, self.cfg.load.phases[0].kind);
                    self.start_cycle()
                }
            }
            EventKind::EehClamp => {
                self.clamped = true;
                self.event(EventKind::EehClamp, self.stage_kind());
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// The harvester reconnects at the next boundary unless it would
    /// immediately overcharge the capacitor again.
    fn release_clamp(&mut self) {
        if !self.clamped {
            return;
        }
        let sample = self.harvest();
        if !(sample.power > 0.0) || self.v < sample.e_eh - VOLTAGE_TOL {
            self.clamped = false;
            return;
        }
        let connected = Dynamics::new(
            CircuitMode::new(self.pm_on, true),
            sample.power,
            if self.pm_on { self.load_power() } else { 0.0 },
        )
        .with_leakage(self.cfg.options.leakage_model());
        self.clamped = connected.trend(self.v, &self.cfg.circuit) > 0;
    }

    fn event(&mut self, kind: EventKind, load_state: PhaseKind) {
        self.trace.events.push(Event {
            t: self.t,
            kind,
            v_c: self.v,
            load_state,
        });
    }

    fn record(&mut self, dynamics: &Dynamics, t: f64, v: f64) {
        let record = TraceRecord {
            t,
            v_c: v,
            load_state: self.stage_kind(),
            mode: dynamics.mode,
            p_eh: dynamics.harvested_power(),
            p_cl: dynamics.load_power(),
            i_c: dynamics.capacitor_current(v, &self.cfg.circuit),
        };
        match self.trace.records.last_mut() {
            Some(last) if (last.t - t).abs() <= same_time_tol(t) => *last = record,
            _ => self.trace.records.push(record),
        }
    }

    /// Regular samples strictly inside `(self.t, t_end)`.
    fn emit_grid(&mut self, dynamics: &Dynamics, t_end: f64) -> Result<()> {
        let interval = self.cfg.record_interval;
        loop {
            let tg = self.next_grid as f64 * interval;
            if tg >= t_end - same_time_tol(t_end) {
                return Ok(());
            }
            if tg > self.t + same_time_tol(self.t) {
                let v = dynamics.voltage_at(self.v, tg - self.t, &self.cfg.circuit)?;
                self.record(dynamics, tg, v);
            }
            self.next_grid += 1;
        }
    }
}
