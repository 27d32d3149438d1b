//! Model-versus-measurement comparison and grid-refinement calibration.

use alloc::string::String;
use alloc::vec::Vec;

use libm::sqrt;
use serde::{Deserialize, Serialize};

use crate::circuit::CircuitParams;
use crate::engine::run;
use crate::error::{Error, Result};
use crate::scenario::ScenarioConfig;
use crate::trace::SimTrace;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TraceMetadata {
    /// lx
    pub lux_nominal: Option<f64>,
    /// lx
    pub lux_tolerance: Option<f64>,
    pub label: String,
}

/// Capacitor voltage samples from a measurement campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasuredTrace {
    /// `(t, v_c)` with strictly increasing `t`.
    pub records: Vec<(f64, f64)>,
    pub metadata: TraceMetadata,
}

impl MeasuredTrace {
    /// Validates the samples. Row numbers in errors are 1-based sample indices.
    pub fn new(records: Vec<(f64, f64)>, metadata: TraceMetadata) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::InvalidTrace {
                row: 0,
                reason: "trace is empty".into(),
            });
        }
        for (i, &(t, v)) in records.iter().enumerate() {
            if !t.is_finite() || !v.is_finite() {
                return Err(Error::InvalidTrace {
                    row: i + 1,
                    reason: "non-finite value".into(),
                });
            }
            if v < 0.0 {
                return Err(Error::InvalidTrace {
                    row: i + 1,
                    reason: alloc::format!("negative voltage {v}"),
                });
            }
            if i > 0 && !(t > records[i - 1].0) {
                return Err(Error::InvalidTrace {
                    row: i + 1,
                    reason: alloc::format!("time {t} does not increase"),
                });
            }
        }
        Ok(MeasuredTrace { records, metadata })
    }

    pub fn from_sim(trace: &SimTrace, metadata: TraceMetadata) -> Result<Self> {
        MeasuredTrace::new(trace.voltage_series(), metadata)
    }
}

/// Where the stored-energy deviation is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergyDeviationAt {
    #[default]
    Horizon,
    /// Largest deviation over the compared window.
    MaxOverTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    /// V
    pub max_abs_dv: f64,
    /// V
    pub dv_at_horizon: f64,
    /// `|E_sim − E_meas| / E_meas × 100` with `E = ½CV²`.
    pub energy_deviation_pct: f64,
    /// Time-weighted RMS of the voltage difference (V).
    pub rms_dv: f64,
    /// Start of the compared window (s).
    pub t_start: f64,
    /// End of the compared window (s).
    pub horizon: f64,
}

/// Linear interpolation on a strictly increasing series, clamped at the ends.
pub fn interpolate(series: &[(f64, f64)], t: f64) -> f64 {
    let idx = series.partition_point(|&(ts, _)| ts <= t);
    if idx == 0 {
        return series[0].1;
    }
    if idx == series.len() {
        return series[idx - 1].1;
    }
    let (t0, v0) = series[idx - 1];
    let (t1, v1) = series[idx];
    v0 + (v1 - v0) * (t - t0) / (t1 - t0)
}

fn energy_deviation_pct(params: &CircuitParams, v_model: f64, v_ref: f64) -> f64 {
    let e_model = params.stored_energy(v_model);
    let e_ref = params.stored_energy(v_ref);
    if e_ref == 0.0 {
        return if e_model == 0.0 { 0.0 } else { f64::INFINITY };
    }
    (e_model - e_ref).abs() / e_ref * 100.0
}

/// Compares two voltage series over their common time range.
///
/// Both are treated as piecewise-linear; the difference is evaluated on the
/// union of their sample times, so refining either series on its own
/// polyline leaves every metric unchanged.
pub fn compare_series(
    model: &[(f64, f64)],
    reference: &[(f64, f64)],
    params: &CircuitParams,
    at: EnergyDeviationAt,
) -> Result<ComparisonReport> {
    if model.is_empty() || reference.is_empty() {
        return Err(Error::NoOverlap);
    }
    let t0 = model[0].0.max(reference[0].0);
    let t1 = model[model.len() - 1].0.min(reference[reference.len() - 1].0);
    if t1 < t0 {
        return Err(Error::NoOverlap);
    }
    let mut grid: Vec<f64> = model
        .iter()
        .chain(reference)
        .map(|&(t, _)| t)
        .filter(|&t| t > t0 && t < t1)
        .collect();
    grid.push(t0);
    grid.push(t1);
    grid.sort_by(f64::total_cmp);
    grid.dedup();

    let mut max_abs: f64 = 0.0;
    let mut max_energy: f64 = 0.0;
    let mut integral = 0.0;
    let mut prev: Option<(f64, f64)> = None;
    for &t in &grid {
        let vm = interpolate(model, t);
        let vr = interpolate(reference, t);
        let d = vm - vr;
        max_abs = max_abs.max(d.abs());
        max_energy = max_energy.max(energy_deviation_pct(params, vm, vr));
        if let Some((tp, dp)) = prev {
            // exact ∫d² for a linear d
            integral += (t - tp) * (dp * dp + dp * d + d * d) / 3.0;
        }
        prev = Some((t, d));
    }
    let vm_end = interpolate(model, t1);
    let vr_end = interpolate(reference, t1);
    let rms_dv = if t1 > t0 {
        sqrt(integral / (t1 - t0))
    } else {
        (vm_end - vr_end).abs()
    };
    Ok(ComparisonReport {
        max_abs_dv: max_abs,
        dv_at_horizon: (vm_end - vr_end).abs(),
        energy_deviation_pct: match at {
            EnergyDeviationAt::Horizon => energy_deviation_pct(params, vm_end, vr_end),
            EnergyDeviationAt::MaxOverTime => max_energy,
        },
        rms_dv,
        t_start: t0,
        horizon: t1,
    })
}

/// Simulated versus measured capacitor voltage.
pub fn compare(
    sim: &SimTrace,
    meas: &MeasuredTrace,
    params: &CircuitParams,
) -> Result<ComparisonReport> {
    compare_series(&sim.voltage_series(), &meas.records, params, EnergyDeviationAt::Horizon)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FreeParameter {
    WPm,
    LeakageResistance,
    HarvestScale,
}

impl FreeParameter {
    pub fn get(self, cfg: &ScenarioConfig) -> f64 {
        match self {
            FreeParameter::WPm => cfg.circuit.w_pm,
            FreeParameter::LeakageResistance => cfg.circuit.leakage_resistance,
            FreeParameter::HarvestScale => cfg.harvest.scale,
        }
    }

    pub fn set(self, cfg: &mut ScenarioConfig, value: f64) {
        match self {
            FreeParameter::WPm => cfg.circuit.w_pm = value,
            FreeParameter::LeakageResistance => cfg.circuit.leakage_resistance = value,
            FreeParameter::HarvestScale => cfg.harvest.scale = value,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParameterRange {
    pub parameter: FreeParameter,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitSettings {
    /// Points per grid, ends included (≥ 3).
    pub grid_points: usize,
    /// Zoom levels after the initial full-range grid.
    pub refinements: usize,
    /// Coordinate-descent passes over all free parameters.
    pub sweeps: usize,
}

impl Default for FitSettings {
    fn default() -> Self {
        FitSettings {
            grid_points: 11,
            refinements: 4,
            sweeps: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FittedParameter {
    pub parameter: FreeParameter,
    pub value: f64,
    /// Spacing of the finest grid that selected `value`.
    pub resolution: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub config: ScenarioConfig,
    pub report: ComparisonReport,
    pub parameters: Vec<FittedParameter>,
}

fn objective(cfg: &ScenarioConfig, meas: &MeasuredTrace) -> f64 {
    run(cfg)
        .and_then(|trace| compare(&trace, meas, &cfg.circuit))
        .map_or(f64::INFINITY, |r| r.rms_dv)
}

/// Coordinate descent with successive grid refinement, minimizing `rms_dv`.
pub fn fit_parameters(
    meas: &MeasuredTrace,
    base: &ScenarioConfig,
    free: &[ParameterRange],
    settings: &FitSettings,
) -> Result<FitResult> {
    if free.is_empty() {
        return Err(Error::config("at least one free parameter is required"));
    }
    if settings.grid_points < 3 || settings.sweeps == 0 {
        return Err(Error::config("fit needs grid_points >= 3 and sweeps >= 1"));
    }
    for r in free {
        if !(r.lower < r.upper) || !r.lower.is_finite() || !r.upper.is_finite() {
            return Err(Error::config(alloc::format!(
                "degenerate range for {:?}: [{}, {}]",
                r.parameter, r.lower, r.upper
            )));
        }
    }
    base.validate()?;

    let mut cfg = base.clone();
    for r in free {
        let v = r.parameter.get(&cfg).clamp(r.lower, r.upper);
        r.parameter.set(&mut cfg, v);
    }
    let mut resolution: Vec<f64> = free.iter().map(|r| r.upper - r.lower).collect();

    let n = settings.grid_points;
    for _ in 0..settings.sweeps {
        for (k, r) in free.iter().enumerate() {
            let (mut lo, mut hi) = (r.lower, r.upper);
            for _ in 0..=settings.refinements {
                let step = (hi - lo) / (n - 1) as f64;
                let mut best = (f64::INFINITY, r.parameter.get(&cfg));
                for i in 0..n {
                    let value = lo + step * i as f64;
                    let mut trial = cfg.clone();
                    r.parameter.set(&mut trial, value);
                    let score = objective(&trial, meas);
                    if score < best.0 {
                        best = (score, value);
                    }
                }
                r.parameter.set(&mut cfg, best.1);
                resolution[k] = step;
                lo = (best.1 - step).max(r.lower);
                hi = (best.1 + step).min(r.upper);
            }
        }
    }

    let trace = run(&cfg)?;
    let report = compare(&trace, meas, &cfg.circuit)?;
    let parameters = free
        .iter()
        .zip(resolution)
        .map(|(r, resolution)| FittedParameter {
            parameter: r.parameter,
            value: r.parameter.get(&cfg),
            resolution,
        })
        .collect();
    Ok(FitResult {
        config: cfg,
        report,
        parameters,
    })
}
