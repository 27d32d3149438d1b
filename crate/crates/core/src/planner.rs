//! Energy-conservation duty-cycle planning.
//!
//! A cycle of period `T = T_a + T_s` is sustainable when the energy harvested
//! over the period covers the active and sleep consumption:
//! `p_harv·(T_a + T_s) ≥ E_deva + p_devs·T_s`.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::circuit::CircuitParams;
use crate::error::{Error, Result};
use crate::load::{active_cycle_energy, sleep_energy, LoadProfile};

/// Margins smaller than this are reported as exactly zero (J).
pub const MARGIN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DutyCyclePlan {
    pub t_a: f64,
    pub t_s: f64,
    pub period: f64,
    pub e_deva: f64,
    pub e_devs: f64,
    pub e_harv: f64,
    pub p_harv: f64,
    pub feasible: bool,
    /// `E_harv(T) − E_dev(T)` (J).
    pub margin: f64,
}

impl DutyCyclePlan {
    pub fn e_dev(&self) -> f64 {
        self.e_deva + self.e_devs
    }
}

/// Evaluates the per-cycle energy balance for a given sleep time.
pub fn check_feasibility(p_harv: f64, profile: &LoadProfile, t_s: f64) -> DutyCyclePlan {
    let t_a = profile.active_duration();
    let period = t_a + t_s;
    let e_deva = active_cycle_energy(profile);
    let e_devs = sleep_energy(profile, t_s);
    let e_harv = p_harv * period;
    let mut margin = e_harv - (e_deva + e_devs);
    if margin.abs() <= MARGIN_TOL {
        margin = 0.0;
    }
    DutyCyclePlan {
        t_a,
        t_s,
        period,
        e_deva,
        e_devs,
        e_harv,
        p_harv,
        feasible: margin >= 0.0,
        margin,
    }
}

/// Minimal sleep time that balances the cycle, `0` when the active phase alone
/// is already covered.
pub fn solve_sleep_time(p_harv: f64, profile: &LoadProfile) -> Result<f64> {
    if !(p_harv >= 0.0) {
        return Err(Error::domain("p_harv", p_harv, "p_harv >= 0"));
    }
    let t_a = profile.active_duration();
    let e_deva = active_cycle_energy(profile);
    let p_sleep = profile.sleep_power();
    if p_harv * t_a >= e_deva {
        return Ok(0.0);
    }
    if p_harv <= p_sleep {
        return Err(Error::NeverFeasible { p_harv, p_sleep });
    }
    Ok((e_deva - p_harv * t_a) / (p_harv - p_sleep))
}

/// Sleep time and resulting plan in one call.
pub fn plan(p_harv: f64, profile: &LoadProfile) -> Result<DutyCyclePlan> {
    let t_s = solve_sleep_time(p_harv, profile)?;
    Ok(check_feasibility(p_harv, profile, t_s))
}

/// Harvested power for which `t_s` is exactly the balancing sleep time.
pub fn harvest_power_oracle(profile: &LoadProfile, t_s: f64) -> f64 {
    (active_cycle_energy(profile) + sleep_energy(profile, t_s)) / (profile.active_duration() + t_s)
}

/// Minimal buffer energy that must never be overdrawn, over a finite horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBudget {
    /// J
    pub e_buf: f64,
    /// s
    pub horizon: f64,
}

impl EnergyBudget {
    pub fn new(e_buf: f64, horizon: f64) -> Result<Self> {
        if !(e_buf >= 0.0 && e_buf.is_finite()) {
            return Err(Error::domain("e_buf", e_buf, "finite e_buf >= 0"));
        }
        if !(horizon >= 0.0 && horizon.is_finite()) {
            return Err(Error::domain("horizon", horizon, "finite horizon >= 0"));
        }
        Ok(EnergyBudget { e_buf, horizon })
    }

    /// The buffer cannot hold more than the capacitor stores at `v0`.
    pub fn check_capacity(&self, params: &CircuitParams, v0: f64) -> Result<()> {
        let stored = params.stored_energy(v0);
        if self.e_buf <= stored {
            Ok(())
        } else {
            Err(Error::domain("e_buf", self.e_buf, "e_buf <= ½·C·V_c(0)²"))
        }
    }
}

/// Right-continuous piecewise-constant function of time starting at `t = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepFunction {
    /// `(start, value)` pairs; each value holds until the next start.
    segments: Vec<(f64, f64)>,
}

impl StepFunction {
    pub fn new(segments: Vec<(f64, f64)>) -> Result<Self> {
        match segments.first() {
            Some(&(0.0, _)) => {}
            _ => return Err(Error::config("step function must start at t = 0")),
        }
        if segments.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::config("step function breakpoints must be strictly increasing"));
        }
        if segments.iter().any(|&(t, v)| !t.is_finite() || !v.is_finite()) {
            return Err(Error::config("step function values must be finite"));
        }
        Ok(StepFunction { segments })
    }

    pub fn constant(value: f64) -> Self {
        StepFunction {
            segments: alloc::vec![(0.0, value)],
        }
    }

    pub fn value_at(&self, t: f64) -> f64 {
        let idx = self.segments.partition_point(|&(start, _)| start <= t);
        self.segments[idx.saturating_sub(1)].1
    }

    pub fn breakpoints(&self) -> impl Iterator<Item = f64> + '_ {
        self.segments.iter().map(|&(t, _)| t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BufferedFeasibility {
    /// Slack never went negative; `min_slack` is its smallest value (J).
    Feasible { min_slack: f64 },
    /// Slack first drops below zero at `at` (s).
    Violated { at: f64 },
}

impl BufferedFeasibility {
    pub fn is_feasible(&self) -> bool {
        matches!(self, BufferedFeasibility::Feasible { .. })
    }
}

/// Checks `E_buf + ∫₀ᵀ P_harv − ∫₀ᵀ P_dev ≥ 0` for every `T` in the horizon.
///
/// The slack is piecewise linear, so its extrema sit on the merged
/// breakpoints and the first violation is found exactly inside the segment.
pub fn check_buffered_feasibility(
    budget: &EnergyBudget,
    p_harv_fn: &StepFunction,
    p_dev_fn: &StepFunction,
) -> BufferedFeasibility {
    let mut cuts: Vec<f64> = p_harv_fn
        .breakpoints()
        .chain(p_dev_fn.breakpoints())
        .filter(|&t| t < budget.horizon)
        .collect();
    cuts.push(budget.horizon);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let mut slack = budget.e_buf;
    let mut min_slack = slack;
    let mut t0 = 0.0;
    for &t1 in &cuts {
        if t1 <= t0 {
            continue;
        }
        let rate = p_harv_fn.value_at(t0) - p_dev_fn.value_at(t0);
        let end = slack + rate * (t1 - t0);
        if end < -MARGIN_TOL && rate < 0.0 {
            return BufferedFeasibility::Violated {
                at: t0 + slack.max(0.0) / -rate,
            };
        }
        slack = end;
        min_slack = min_slack.min(slack);
        t0 = t1;
    }
    if min_slack.abs() <= MARGIN_TOL {
        min_slack = 0.0;
    }
    BufferedFeasibility::Feasible { min_slack }
}
