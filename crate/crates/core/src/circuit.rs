//! Closed-form model of the harvester / power-manager / supercapacitor circuit.
//!
//! The capacitor voltage `V_c` obeys one of four laws depending on whether the
//! power manager powers the load (`pm_on`) and whether the harvester is
//! delivering power (`eh_connected`):
//!
//! | mode                 | law                                              |
//! |----------------------|--------------------------------------------------|
//! | OFF, EH disconnected | `v0·exp(−t/(C·R_c))`                             |
//! | OFF, EH connected    | `sqrt(2·p_h·t/C + v0²)`                          |
//! | ON, EH disconnected  | `sqrt(α·exp(−2t/(C·R_c)) − w_pm·p_cl·R_c)`       |
//! | ON, EH connected     | `sqrt(2·(p_eh − w_pm·p_cl)·t/C + v0²)`           |
//!
//! with `α = v0² + w_pm·p_cl·R_c`. All of them are solutions of an ODE that is
//! linear in `u = V_c²`, which is what the inverses in [`Dynamics::time_to_voltage`]
//! exploit.

use libm::{exp, expm1, log, log1p, sqrt};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used for every voltage comparison (V).
pub const VOLTAGE_TOL: f64 = 1e-9;
/// Resolution of the event-time bisection fallback (s).
pub const TIME_TOL: f64 = 1e-9;

/// Physical parameters of the supercapacitor and power manager.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitParams {
    /// Supercapacitor capacitance `C` (F).
    pub capacitance: f64,
    /// Self-discharge resistance `R_c` (Ω).
    pub leakage_resistance: f64,
    /// Voltage-scaling inefficiency multiplier `w_pm` (≥ 1).
    pub w_pm: f64,
    /// Regulated load-side voltage `E_pm` (V).
    pub e_pm: f64,
    /// Turn-on threshold (V).
    pub v_on: f64,
    /// Cut-off threshold (V).
    pub v_off: f64,
    /// Extra load-side energy spent while restarting after an OFF excursion (J).
    #[serde(default)]
    pub coldstart_energy: f64,
    /// Duration of the restart transient (s).
    #[serde(default)]
    pub coldstart_duration: f64,
}

impl CircuitParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("capacitance", self.capacitance),
            ("leakage_resistance", self.leakage_resistance),
            ("e_pm", self.e_pm),
            ("v_off", self.v_off),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::config(alloc::format!("{name} must be positive, got {value}")));
            }
        }
        if !(self.w_pm >= 1.0 && self.w_pm.is_finite()) {
            return Err(Error::config(alloc::format!("w_pm must be >= 1, got {}", self.w_pm)));
        }
        if !(self.v_on > self.v_off && self.v_on.is_finite()) {
            return Err(Error::config(alloc::format!(
                "thresholds must satisfy 0 < v_off < v_on, got v_off = {}, v_on = {}",
                self.v_off, self.v_on
            )));
        }
        if !(self.coldstart_energy >= 0.0 && self.coldstart_duration >= 0.0) {
            return Err(Error::config("cold-start energy and duration must be >= 0"));
        }
        if self.coldstart_energy > 0.0 && self.coldstart_duration == 0.0 {
            return Err(Error::config(
                "a positive cold-start energy needs a positive cold-start duration",
            ));
        }
        Ok(())
    }

    /// Leakage time constant `C·R_c` (s).
    pub fn time_constant(&self) -> f64 {
        self.capacitance * self.leakage_resistance
    }

    /// Energy stored at voltage `v` (J).
    pub fn stored_energy(&self, v: f64) -> f64 {
        0.5 * self.capacitance * v * v
    }
}

/// Capacitor voltage, bounded by the harvester voltage at which the power
/// manager stops charging.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct CapVoltage(f64);

impl CapVoltage {
    pub fn new(value: f64, e_eh: f64) -> Result<Self> {
        if value >= 0.0 && value <= e_eh {
            Ok(CapVoltage(value))
        } else {
            Err(Error::domain("V_c", value, "0 <= V_c <= E_eh"))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

/// Operating configuration of the circuit during one interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CircuitMode {
    /// Power manager powering the load (switch closed).
    pub pm_on: bool,
    /// Harvester delivering power to the capacitor node.
    pub eh_connected: bool,
}

impl CircuitMode {
    pub const OFF_DISCONNECTED: Self = CircuitMode::new(false, false);
    pub const OFF_CONNECTED: Self = CircuitMode::new(false, true);
    pub const ON_DISCONNECTED: Self = CircuitMode::new(true, false);
    pub const ON_CONNECTED: Self = CircuitMode::new(true, true);
    pub const ALL: [Self; 4] = [
        Self::OFF_DISCONNECTED,
        Self::OFF_CONNECTED,
        Self::ON_DISCONNECTED,
        Self::ON_CONNECTED,
    ];

    pub const fn new(pm_on: bool, eh_connected: bool) -> Self {
        CircuitMode {
            pm_on,
            eh_connected,
        }
    }
}

/// Which set of laws governs the connected modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeakageModel {
    /// Leakage only acts while the harvester is disconnected.
    #[default]
    ConnectedLossless,
    /// `R_c` also drains the capacitor while the harvester is connected.
    AllModes,
}

/// Series resistance of the harvester + power-manager Thevenin model (Ω).
pub fn r_eh(v_c: f64, e_eh: f64, p_eh: f64) -> Result<f64> {
    if !(p_eh > 0.0) {
        return Err(Error::domain("p_eh", p_eh, "p_eh > 0"));
    }
    if !(v_c > 0.0 && v_c < e_eh - VOLTAGE_TOL) {
        return Err(Error::domain("v_c", v_c, "0 < v_c < E_eh"));
    }
    Ok(v_c * (e_eh - v_c) / p_eh)
}

/// Power drawn on the capacitor side to deliver `p_cl` to the load (W).
pub fn p_pm(p_cl: f64, w_pm: f64) -> Result<f64> {
    if !(w_pm >= 1.0) {
        return Err(Error::domain("w_pm", w_pm, "w_pm >= 1"));
    }
    if !(p_cl >= 0.0) {
        return Err(Error::domain("p_cl", p_cl, "p_cl >= 0"));
    }
    Ok(w_pm * p_cl)
}

/// Equivalent resistance presented by the power manager (Ω).
///
/// Returns `f64::INFINITY` when the load draws nothing, i.e. the switch is open.
pub fn r_pm(v_c: f64, w_pm: f64, p_cl: f64) -> Result<f64> {
    if !(v_c > 0.0) {
        return Err(Error::domain("v_c", v_c, "v_c > 0"));
    }
    if p_cl == 0.0 {
        return Ok(f64::INFINITY);
    }
    let p = p_pm(p_cl, w_pm)?;
    Ok(v_c * v_c / p)
}

fn check_time(t: f64) -> Result<()> {
    if t >= 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::domain("t", t, "finite t >= 0"))
    }
}

fn check_v0(v0: f64) -> Result<()> {
    if v0 >= 0.0 && v0.is_finite() {
        Ok(())
    } else {
        Err(Error::domain("v0", v0, "finite v0 >= 0"))
    }
}

/// OFF state, harvester disconnected: pure leakage decay.
pub fn v_off_disconnected(v0: f64, t: f64, params: &CircuitParams) -> Result<f64> {
    check_time(t)?;
    check_v0(v0)?;
    if t == 0.0 {
        return Ok(v0);
    }
    Ok(v0 * exp(-t / params.time_constant()))
}

/// OFF state, harvester connected: lossless charge at constant power.
pub fn v_off_connected(v0: f64, t: f64, p_h: f64, params: &CircuitParams) -> Result<f64> {
    check_time(t)?;
    check_v0(v0)?;
    if !(p_h > 0.0) {
        return Err(Error::domain("p_h", p_h, "p_h > 0"));
    }
    lossless_law(v0, t, p_h, params.capacitance)
}

/// ON state, harvester disconnected: the load and the leakage drain the capacitor.
///
/// Fails with [`Error::BeyondValidity`] past [`on_disconnected_validity`].
pub fn v_on_disconnected(v0: f64, t: f64, p_cl: f64, params: &CircuitParams) -> Result<f64> {
    check_time(t)?;
    check_v0(v0)?;
    let drain = p_pm(p_cl, params.w_pm)?;
    leaky_law(v0, t, -drain, params)
}

/// Latest instant at which the ON/disconnected law is defined (voltage reaches 0).
pub fn on_disconnected_validity(v0: f64, p_cl: f64, params: &CircuitParams) -> f64 {
    let k = params.w_pm * p_cl * params.leakage_resistance;
    if k <= 0.0 {
        return f64::INFINITY;
    }
    0.5 * params.time_constant() * log1p(v0 * v0 / k)
}

/// ON state, harvester connected: net power `p_eh − w_pm·p_cl` changes the stored energy.
pub fn v_on_connected(
    v0: f64,
    t: f64,
    p_eh: f64,
    p_cl: f64,
    params: &CircuitParams,
) -> Result<f64> {
    check_time(t)?;
    check_v0(v0)?;
    if !(p_eh > 0.0) {
        return Err(Error::domain("p_eh", p_eh, "p_eh > 0"));
    }
    let drain = p_pm(p_cl, params.w_pm)?;
    lossless_law(v0, t, p_eh - drain, params.capacitance)
}

/// `u = v0² + 2·p_net·t/C`.
fn lossless_law(v0: f64, t: f64, p_net: f64, capacitance: f64) -> Result<f64> {
    if t == 0.0 {
        return Ok(v0);
    }
    let u = v0 * v0 + 2.0 * p_net * t / capacitance;
    if u >= 0.0 {
        return Ok(sqrt(u));
    }
    let t_valid = capacitance * v0 * v0 / (2.0 * -p_net);
    if t <= t_valid {
        Ok(0.0)
    } else {
        Err(Error::BeyondValidity { t, t_valid })
    }
}

/// Validity bound of the leaky law for a draining net power (`p_net < 0`).
fn leaky_validity(v0: f64, p_net: f64, params: &CircuitParams) -> f64 {
    if p_net >= 0.0 {
        return f64::INFINITY;
    }
    let k = -p_net * params.leakage_resistance;
    0.5 * params.time_constant() * log1p(v0 * v0 / k)
}

/// `du/dt = 2·p_net/C − 2u/(C·R_c)`, i.e. `u(t) = u∞ + (u0 − u∞)·exp(−2t/(C·R_c))`
/// with `u∞ = p_net·R_c`.
fn leaky_law(v0: f64, t: f64, p_net: f64, params: &CircuitParams) -> Result<f64> {
    if t == 0.0 {
        return Ok(v0);
    }
    let tau = params.time_constant();
    let u0 = v0 * v0;
    let u_inf = p_net * params.leakage_resistance;
    if p_net < 0.0 {
        let t_valid = leaky_validity(v0, p_net, params);
        if t > t_valid {
            return Err(Error::BeyondValidity { t, t_valid });
        }
        if t_valid.is_finite() {
            // Written relative to the zero crossing so that u(t_valid) = 0 exactly.
            let u = -u_inf * expm1(2.0 * (t_valid - t) / tau);
            return Ok(sqrt(u.max(0.0)));
        }
    }
    let x = 2.0 * t / tau;
    let u = u0 * exp(-x) - u_inf * expm1(-x);
    Ok(sqrt(u.max(0.0)))
}

/// Inverse of [`lossless_law`].
fn lossless_inverse(v0: f64, target: f64, p_net: f64, capacitance: f64) -> Option<f64> {
    if target == v0 {
        return Some(0.0);
    }
    if p_net == 0.0 {
        return None;
    }
    let t = capacitance * (target * target - v0 * v0) / (2.0 * p_net);
    (t >= 0.0).then_some(t)
}

/// Inverse of [`leaky_law`].
fn leaky_inverse(v0: f64, target: f64, p_net: f64, params: &CircuitParams) -> Option<f64> {
    if target == v0 {
        return Some(0.0);
    }
    let tau = params.time_constant();
    let u0 = v0 * v0;
    let ut = target * target;
    let u_inf = p_net * params.leakage_resistance;
    if p_net < 0.0 {
        if ut > u0 {
            return None;
        }
        let t_valid = leaky_validity(v0, p_net, params);
        if t_valid.is_finite() {
            let t = t_valid - 0.5 * tau * log1p(ut / -u_inf);
            return Some(t.max(0.0));
        }
    }
    // Reachable only strictly between u0 and the asymptote.
    let ratio = (u0 - ut) / (ut - u_inf);
    if !(ratio > 0.0) || !ratio.is_finite() {
        return None;
    }
    Some(0.5 * tau * log1p(ratio))
}

/// Pure leakage decay inverse.
fn decay_inverse(v0: f64, target: f64, params: &CircuitParams) -> Option<f64> {
    if target == v0 {
        return Some(0.0);
    }
    if !(target > 0.0 && target < v0) {
        return None;
    }
    Some(params.time_constant() * log(v0 / target))
}

/// The complete description of one constant-condition interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dynamics {
    pub mode: CircuitMode,
    /// Harvested power while connected (W); ignored when disconnected.
    pub p_eh: f64,
    /// Load-side power while ON (W); ignored when OFF.
    pub p_cl: f64,
    pub leakage: LeakageModel,
}

impl Dynamics {
    pub fn new(mode: CircuitMode, p_eh: f64, p_cl: f64) -> Self {
        Dynamics {
            mode,
            p_eh,
            p_cl,
            leakage: LeakageModel::ConnectedLossless,
        }
    }

    pub fn with_leakage(mut self, leakage: LeakageModel) -> Self {
        self.leakage = leakage;
        self
    }

    /// Harvested power actually reaching the capacitor node (W).
    pub fn harvested_power(&self) -> f64 {
        if self.mode.eh_connected {
            self.p_eh
        } else {
            0.0
        }
    }

    /// Load-side power (W).
    pub fn load_power(&self) -> f64 {
        if self.mode.pm_on {
            self.p_cl
        } else {
            0.0
        }
    }

    /// Harvested minus capacitor-side load power, leakage excluded (W).
    pub fn net_power(&self, params: &CircuitParams) -> f64 {
        self.harvested_power() - params.w_pm * self.load_power()
    }

    /// Whether `R_c` drains the capacitor in this interval.
    pub fn is_leaky(&self) -> bool {
        !self.mode.eh_connected || self.leakage == LeakageModel::AllModes
    }

    fn check(&self, params: &CircuitParams) -> Result<()> {
        if self.mode.eh_connected && !(self.p_eh > 0.0) {
            return Err(Error::domain("p_eh", self.p_eh, "p_eh > 0 while connected"));
        }
        if self.mode.pm_on {
            p_pm(self.p_cl, params.w_pm)?;
        }
        Ok(())
    }

    /// Capacitor voltage after `t` seconds starting from `v0`.
    pub fn voltage_at(&self, v0: f64, t: f64, params: &CircuitParams) -> Result<f64> {
        check_time(t)?;
        check_v0(v0)?;
        self.check(params)?;
        match (self.mode, self.leakage) {
            (CircuitMode::OFF_DISCONNECTED, _) => v_off_disconnected(v0, t, params),
            (CircuitMode::ON_DISCONNECTED, _) => v_on_disconnected(v0, t, self.p_cl, params),
            (_, LeakageModel::ConnectedLossless) => {
                lossless_law(v0, t, self.net_power(params), params.capacitance)
            }
            (_, LeakageModel::AllModes) => leaky_law(v0, t, self.net_power(params), params),
        }
    }

    /// Time at which the law reaches zero volts, or infinity.
    pub fn validity_horizon(&self, v0: f64, params: &CircuitParams) -> f64 {
        let p_net = self.net_power(params);
        if self.mode == CircuitMode::OFF_DISCONNECTED || p_net >= 0.0 {
            f64::INFINITY
        } else if self.is_leaky() {
            leaky_validity(v0, p_net, params)
        } else {
            params.capacitance * v0 * v0 / (2.0 * -p_net)
        }
    }

    /// Direction of the voltage trajectory from `v`: +1 rising, -1 falling, 0 constant.
    pub fn trend(&self, v: f64, params: &CircuitParams) -> i8 {
        let d = self.derivative(v, params);
        if d > 0.0 {
            1
        } else if d < 0.0 {
            -1
        } else {
            0
        }
    }

    /// `dV/dt` of the interval's ODE at voltage `v`.
    pub fn derivative(&self, v: f64, params: &CircuitParams) -> f64 {
        let c = params.capacitance;
        let mut d = if self.mode == CircuitMode::OFF_DISCONNECTED {
            0.0
        } else {
            self.net_power(params) / (c * v)
        };
        if self.is_leaky() {
            d -= v / params.time_constant();
        }
        d
    }

    /// Capacitor current `C·dV/dt` (A), positive while charging.
    pub fn capacitor_current(&self, v: f64, params: &CircuitParams) -> f64 {
        if v <= 0.0 && self.mode != CircuitMode::OFF_DISCONNECTED {
            return 0.0;
        }
        params.capacitance * self.derivative(v, params)
    }

    /// Energy dissipated in `R_c` over `[0, t]` starting from `v0` (J).
    pub fn leaked_energy(&self, v0: f64, t: f64, params: &CircuitParams) -> f64 {
        if !self.is_leaky() || t <= 0.0 {
            return 0.0;
        }
        // ∫u dt with u(t) = u∞ + (u0 − u∞)·e^{−2t/τ}.
        let tau = params.time_constant();
        let u_inf = self.net_power(params) * params.leakage_resistance;
        let integral = u_inf * t - (v0 * v0 - u_inf) * 0.5 * tau * expm1(-2.0 * t / tau);
        integral / params.leakage_resistance
    }

    /// Unique `t ≥ 0` at which the trajectory from `v0` hits `target`, or `None`.
    ///
    /// Falls back to bisection when the analytic inverse misses the target by
    /// more than [`VOLTAGE_TOL`].
    pub fn time_to_voltage(
        &self,
        v0: f64,
        target: f64,
        params: &CircuitParams,
    ) -> Result<Option<f64>> {
        check_v0(v0)?;
        if !(target >= 0.0) {
            return Err(Error::domain("v_target", target, "v_target >= 0"));
        }
        self.check(params)?;
        let p_net = self.net_power(params);
        let analytic = match (self.mode, self.leakage) {
            (CircuitMode::OFF_DISCONNECTED, _) => decay_inverse(v0, target, params),
            (CircuitMode::ON_DISCONNECTED, _) | (_, LeakageModel::AllModes) => {
                leaky_inverse(v0, target, p_net, params)
            }
            (_, LeakageModel::ConnectedLossless) => {
                lossless_inverse(v0, target, p_net, params.capacitance)
            }
        };
        let Some(t) = analytic else {
            return Ok(None);
        };
        let t = t.min(self.validity_horizon(v0, params));
        let v = self.voltage_at(v0, t, params)?;
        if (v - target).abs() <= VOLTAGE_TOL {
            return Ok(Some(t));
        }
        self.bisect(v0, target, t, params).map(Some)
    }

    fn bisect(&self, v0: f64, target: f64, estimate: f64, params: &CircuitParams) -> Result<f64> {
        let rising = target > v0;
        let horizon = self.validity_horizon(v0, params);
        let crossed = |t: f64| -> Result<bool> {
            let v = self.voltage_at(v0, t.min(horizon), params)?;
            Ok(if rising { v >= target } else { v <= target })
        };
        let mut lo = 0.0;
        let mut hi = estimate.max(TIME_TOL).min(horizon);
        let mut expansions = 0;
        while !crossed(hi)? {
            if hi >= horizon || expansions > 200 {
                return Err(Error::Nonconvergence { t0: lo, t1: hi });
            }
            lo = hi;
            hi = (hi * 2.0).min(horizon);
            expansions += 1;
        }
        for _ in 0..400 {
            let mid = 0.5 * (lo + hi);
            if hi - lo <= TIME_TOL || mid <= lo || mid >= hi {
                return Ok(hi);
            }
            if crossed(mid)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Err(Error::Nonconvergence { t0: lo, t1: hi })
    }

    /// Classical fixed-step fourth-order Runge–Kutta integration of the interval's ODE.
    ///
    /// The step is shrunk so that an integer number of steps lands exactly on `t`.
    pub fn rk4(&self, v0: f64, t: f64, dt: f64, params: &CircuitParams) -> Result<f64> {
        check_time(t)?;
        check_v0(v0)?;
        self.check(params)?;
        if t == 0.0 {
            return Ok(v0);
        }
        if !(dt > 0.0 && dt <= t * (1.0 + 1e-12)) {
            return Err(Error::domain("dt", dt, "0 < dt <= t"));
        }
        let steps = libm::ceil(t / dt - 1e-9).max(1.0) as usize;
        let h = t / steps as f64;
        let singular = self.mode != CircuitMode::OFF_DISCONNECTED;
        let f = |v: f64, step: usize| -> Result<f64> {
            if !(v.is_finite()) || v < 0.0 || (singular && v <= 0.0) {
                return Err(Error::NonPositiveVoltage {
                    step,
                    t: step as f64 * h,
                });
            }
            Ok(self.derivative(v, params))
        };
        let mut v = v0;
        for step in 0..steps {
            let k1 = f(v, step)?;
            let k2 = f(v + 0.5 * h * k1, step)?;
            let k3 = f(v + 0.5 * h * k2, step)?;
            let k4 = f(v + h * k3, step)?;
            v += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            if !(v >= 0.0) || (singular && v == 0.0) {
                return Err(Error::NonPositiveVoltage {
                    step: step + 1,
                    t: (step + 1) as f64 * h,
                });
            }
        }
        Ok(v)
    }
}

/// Time at which the given mode's law (without leakage in connected modes)
/// carries `v0` to `v_target`; `None` when the law never crosses it.
pub fn time_to_voltage(
    mode: CircuitMode,
    v0: f64,
    v_target: f64,
    p_eh: f64,
    p_cl: f64,
    params: &CircuitParams,
) -> Result<Option<f64>> {
    Dynamics::new(mode, p_eh, p_cl).time_to_voltage(v0, v_target, params)
}

/// Fixed-step RK4 reference solution of the mode's ODE.
pub fn rk4_oracle(
    mode: CircuitMode,
    v0: f64,
    t: f64,
    dt: f64,
    p_eh: f64,
    p_cl: f64,
    params: &CircuitParams,
) -> Result<f64> {
    Dynamics::new(mode, p_eh, p_cl).rk4(v0, t, dt, params)
}
