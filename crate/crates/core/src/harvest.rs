//! Illuminance to harvested-power lookup.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::circuit::CircuitParams;
use crate::error::{Error, Result};

/// One calibration point of the transduction curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarvestPoint {
    /// lx
    pub lux: f64,
    /// Power delivered after MPPT and conversion (W).
    pub power: f64,
    /// Nominal harvester voltage `E_eh` (V).
    pub e_eh: f64,
}

/// Behaviour above the brightest calibration point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AboveRange {
    #[default]
    Clamp,
    /// Continue the last segment's slope.
    Extrapolate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarvestSample {
    pub power: f64,
    pub e_eh: f64,
}

/// Piecewise-linear transduction curve. Below the first point the curve runs
/// straight to the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarvestModel {
    pub points: Vec<HarvestPoint>,
    #[serde(default)]
    pub above_range: AboveRange,
    /// Multiplier applied to every looked-up power.
    #[serde(default = "unit_scale")]
    pub scale: f64,
}

fn unit_scale() -> f64 {
    1.0
}

impl HarvestModel {
    pub fn new(points: Vec<HarvestPoint>, above_range: AboveRange) -> Result<Self> {
        let model = HarvestModel {
            points,
            above_range,
            scale: 1.0,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if self.points.is_empty() {
            return Err(Error::config("harvest model needs at least one point"));
        }
        for p in &self.points {
            if !(p.lux >= 0.0 && p.power >= 0.0 && p.lux.is_finite() && p.power.is_finite()) {
                return Err(Error::config("harvest points need finite lux >= 0 and power >= 0"));
            }
            if p.lux == 0.0 && p.power != 0.0 {
                return Err(Error::config("harvested power must be 0 at 0 lx"));
            }
            if !(p.e_eh > 0.0 && p.e_eh.is_finite()) {
                return Err(Error::config("harvest point e_eh must be positive"));
            }
        }
        for w in self.points.windows(2) {
            if !(w[1].lux > w[0].lux) {
                return Err(Error::config("harvest points must be sorted by strictly increasing lux"));
            }
            if w[1].power < w[0].power {
                return Err(Error::config("harvested power must be non-decreasing in lux"));
            }
        }
        if !(self.scale >= 0.0 && self.scale.is_finite()) {
            return Err(Error::config("harvest scale must be >= 0"));
        }
        Ok(())
    }

    /// Every harvester voltage must exceed the turn-on threshold, otherwise the
    /// node could never start.
    pub fn validate_against(&self, params: &CircuitParams) -> Result<()> {
        match self.points.iter().find(|p| !(p.e_eh > params.v_on)) {
            Some(p) => Err(Error::config(alloc::format!(
                "e_eh = {} V at {} lx does not exceed v_on = {} V",
                p.e_eh, p.lux, params.v_on
            ))),
            None => Ok(()),
        }
    }

    pub fn sample(&self, lux: f64) -> HarvestSample {
        let lux = lux.max(0.0);
        let pts = &self.points;
        let first = pts[0];
        let last = pts[pts.len() - 1];
        let (power, e_eh) = if lux <= first.lux {
            let power = if first.lux > 0.0 {
                first.power * lux / first.lux
            } else {
                0.0
            };
            (power, first.e_eh)
        } else if lux >= last.lux {
            let power = match self.above_range {
                AboveRange::Clamp => last.power,
                AboveRange::Extrapolate => {
                    let (a, b) = if pts.len() >= 2 {
                        (pts[pts.len() - 2], last)
                    } else {
                        (
                            HarvestPoint {
                                lux: 0.0,
                                power: 0.0,
                                e_eh: last.e_eh,
                            },
                            last,
                        )
                    };
                    b.power + (b.power - a.power) / (b.lux - a.lux) * (lux - b.lux)
                }
            };
            (power, last.e_eh)
        } else {
            let i = pts.partition_point(|p| p.lux <= lux);
            let (a, b) = (pts[i - 1], pts[i]);
            let w = (lux - a.lux) / (b.lux - a.lux);
            (a.power + w * (b.power - a.power), a.e_eh + w * (b.e_eh - a.e_eh))
        };
        HarvestSample {
            power: power * self.scale,
            e_eh,
        }
    }

    pub fn power_at(&self, lux: f64) -> f64 {
        self.sample(lux).power
    }
}
