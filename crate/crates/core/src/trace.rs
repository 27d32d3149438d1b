//! Simulator output and the energy bookkeeping derived from it.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::circuit::{CircuitMode, CircuitParams, Dynamics, LeakageModel};
use crate::error::{Error, Result};
use crate::load::PhaseKind;

/// One sample of the capacitor state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    /// s
    pub t: f64,
    /// V
    pub v_c: f64,
    pub load_state: PhaseKind,
    pub mode: CircuitMode,
    /// Harvested power reaching the capacitor node (W).
    pub p_eh: f64,
    /// Load-side power (W).
    pub p_cl: f64,
    /// Capacitor current, positive while charging (A).
    pub i_c: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    VOn,
    VOff,
    EehClamp,
    PhaseChange,
    LuxChange,
    ColdStartBegin,
    ColdStartEnd,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::VOn => "v_on",
            EventKind::VOff => "v_off",
            EventKind::EehClamp => "eeh_clamp",
            EventKind::PhaseChange => "phase_change",
            EventKind::LuxChange => "lux_change",
            EventKind::ColdStartBegin => "cold_start_begin",
            EventKind::ColdStartEnd => "cold_start_end",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub t: f64,
    pub kind: EventKind,
    pub v_c: f64,
    /// Load state after the event.
    pub load_state: PhaseKind,
}

/// A maximal interval over which a single closed-form law applies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub t_start: f64,
    pub t_end: f64,
    pub v_start: f64,
    pub v_end: f64,
    pub load_state: PhaseKind,
    pub mode: CircuitMode,
    /// Harvester power available while connected (W).
    pub p_eh: f64,
    /// Load-side power while ON (W).
    pub p_cl: f64,
    pub leakage: LeakageModel,
}

impl Segment {
    pub fn dynamics(&self) -> Dynamics {
        Dynamics::new(self.mode, self.p_eh, self.p_cl).with_leakage(self.leakage)
    }

    pub fn duration(&self) -> f64 {
        self.t_end - self.t_start
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SimTrace {
    pub records: Vec<TraceRecord>,
    pub events: Vec<Event>,
    pub segments: Vec<Segment>,
}

impl SimTrace {
    pub fn start_time(&self) -> f64 {
        self.records.first().map_or(0.0, |r| r.t)
    }

    pub fn end_time(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.t)
    }

    /// `(t, v_c)` pairs.
    pub fn voltage_series(&self) -> Vec<(f64, f64)> {
        self.records.iter().map(|r| (r.t, r.v_c)).collect()
    }

    /// Exact capacitor voltage at `t`, evaluated from the segment laws.
    pub fn voltage_at(&self, t: f64, params: &CircuitParams) -> Result<f64> {
        if self.segments.is_empty() || t <= self.segments[0].t_start {
            return self
                .records
                .first()
                .map(|r| r.v_c)
                .ok_or(Error::domain("t", t, "a non-empty trace"));
        }
        let idx = self
            .segments
            .partition_point(|s| s.t_start <= t)
            .saturating_sub(1);
        let seg = &self.segments[idx];
        if t >= seg.t_end {
            return Ok(seg.v_end);
        }
        seg.dynamics()
            .voltage_at(seg.v_start, t - seg.t_start, params)
    }

    /// Instants (and voltages) at which a new active cycle begins.
    pub fn cycle_starts(&self) -> Vec<(f64, f64)> {
        let mut starts = Vec::new();
        let mut previous: Option<PhaseKind> = None;
        for e in &self.events {
            let entering_cycle = e.load_state.is_active() && !previous.is_some_and(PhaseKind::is_active);
            if matches!(e.kind, EventKind::PhaseChange) && entering_cycle {
                starts.push((e.t, e.v_c));
            }
            if matches!(
                e.kind,
                EventKind::PhaseChange | EventKind::VOff | EventKind::ColdStartBegin
            ) {
                previous = Some(e.load_state);
            }
        }
        starts
    }

    /// Voltage change over each complete duty cycle.
    pub fn cycle_voltage_deltas(&self) -> Vec<f64> {
        self.cycle_starts()
            .windows(2)
            .map(|w| w[1].1 - w[0].1)
            .collect()
    }

    /// Duration of each complete duty cycle.
    pub fn cycle_periods(&self) -> Vec<f64> {
        self.cycle_starts()
            .windows(2)
            .map(|w| w[1].0 - w[0].0)
            .collect()
    }

    pub fn count(&self, kind: EventKind) -> usize {
        self.events.iter().filter(|e| e.kind == kind).count()
    }
}

/// Energy flows over a time window (J). `consumed` is measured on the
/// capacitor side, i.e. it includes the power-manager overhead `w_pm`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBalance {
    pub harvested: f64,
    pub consumed: f64,
    pub leaked: f64,
    pub delta_stored: f64,
}

impl EnergyBalance {
    /// `harvested − consumed − leaked − delta_stored`; zero for an exact trace.
    pub fn imbalance(&self) -> f64 {
        self.harvested - self.consumed - self.leaked - self.delta_stored
    }
}

/// Energy balance over the whole trace.
pub fn energy_balance(trace: &SimTrace, params: &CircuitParams) -> Result<EnergyBalance> {
    energy_balance_over(trace, params, trace.start_time(), trace.end_time())
}

/// Energy balance over `[t0, t1]`, integrating each segment's powers exactly.
pub fn energy_balance_over(
    trace: &SimTrace,
    params: &CircuitParams,
    t0: f64,
    t1: f64,
) -> Result<EnergyBalance> {
    if trace.records.is_empty() {
        return Err(Error::domain("trace", 0.0, "a non-empty trace"));
    }
    let mut balance = EnergyBalance {
        harvested: 0.0,
        consumed: 0.0,
        leaked: 0.0,
        delta_stored: 0.0,
    };
    for seg in &trace.segments {
        let a = seg.t_start.max(t0);
        let b = seg.t_end.min(t1);
        if b <= a {
            continue;
        }
        let dynamics = seg.dynamics();
        let v_a = dynamics.voltage_at(seg.v_start, a - seg.t_start, params)?;
        let len = b - a;
        balance.harvested += dynamics.harvested_power() * len;
        balance.consumed += params.w_pm * dynamics.load_power() * len;
        balance.leaked += dynamics.leaked_energy(v_a, len, params);
    }
    let v0 = trace.voltage_at(t0, params)?;
    let v1 = trace.voltage_at(t1, params)?;
    balance.delta_stored = params.stored_energy(v1) - params.stored_energy(v0);
    Ok(balance)
}
