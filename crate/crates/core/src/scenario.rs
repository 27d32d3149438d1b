//! Scenario description consumed by the engine.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::circuit::{CapVoltage, CircuitParams, LeakageModel};
use crate::error::{Error, Result};
use crate::harvest::HarvestModel;
use crate::load::LoadProfile;

/// Illuminance level starting at `start` and holding until the next segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LuxSegment {
    /// s
    pub start: f64,
    /// lx
    pub lux: f64,
}

/// Piecewise-constant illuminance over `[0, horizon]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IlluminationProfile {
    pub segments: Vec<LuxSegment>,
    /// s
    pub horizon: f64,
}

impl IlluminationProfile {
    pub fn constant(lux: f64, horizon: f64) -> Self {
        IlluminationProfile {
            segments: alloc::vec![LuxSegment { start: 0.0, lux }],
            horizon,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.segments.first() {
            Some(s) if s.start == 0.0 => {}
            _ => return Err(Error::config("illumination must have a first segment at t = 0")),
        }
        if self.segments.windows(2).any(|w| !(w[1].start > w[0].start)) {
            return Err(Error::config("illumination segment starts must be strictly increasing"));
        }
        if self.segments.iter().any(|s| !(s.lux >= 0.0 && s.lux.is_finite())) {
            return Err(Error::config("illumination lux must be finite and >= 0"));
        }
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            return Err(Error::config("horizon must be finite and >= 0"));
        }
        Ok(())
    }

    /// Index of the segment active at `t`.
    pub fn index_at(&self, t: f64) -> usize {
        self.segments
            .partition_point(|s| s.start <= t)
            .saturating_sub(1)
    }

    pub fn lux_at(&self, t: f64) -> f64 {
        self.segments[self.index_at(t)].lux
    }

    /// End of segment `idx`: the next start, or the horizon for the last one.
    pub fn segment_end(&self, idx: usize) -> f64 {
        self.segments
            .get(idx + 1)
            .map_or(self.horizon, |s| s.start.min(self.horizon))
    }
}

/// Sleep-phase length: fixed, or re-planned for the current illuminance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SleepRepr", into = "SleepRepr")]
pub enum SleepTime {
    Auto,
    Fixed(f64),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum SleepRepr {
    Seconds(f64),
    Keyword(String),
}

impl TryFrom<SleepRepr> for SleepTime {
    type Error = Error;

    fn try_from(repr: SleepRepr) -> Result<Self> {
        match repr {
            SleepRepr::Seconds(s) if s >= 0.0 && s.is_finite() => Ok(SleepTime::Fixed(s)),
            SleepRepr::Keyword(k) if k == "auto" => Ok(SleepTime::Auto),
            SleepRepr::Seconds(s) => Err(Error::config(alloc::format!(
                "sleep_time must be >= 0, got {s}"
            ))),
            SleepRepr::Keyword(k) => Err(Error::config(alloc::format!(
                "sleep_time must be a number of seconds or \"auto\", got \"{k}\""
            ))),
        }
    }
}

impl From<SleepTime> for SleepRepr {
    fn from(s: SleepTime) -> Self {
        match s {
            SleepTime::Auto => SleepRepr::Keyword("auto".into()),
            SleepTime::Fixed(v) => SleepRepr::Seconds(v),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimOptions {
    /// Draw the advertising time uniformly from `[0, 4)` s once per cycle.
    #[serde(default)]
    pub randomize_advertising: bool,
    #[serde(default)]
    pub seed: u64,
    /// Let `R_c` drain the capacitor while the harvester is connected.
    #[serde(default)]
    pub leakage_in_connected_modes: bool,
}

impl SimOptions {
    pub fn leakage_model(&self) -> LeakageModel {
        if self.leakage_in_connected_modes {
            LeakageModel::AllModes
        } else {
            LeakageModel::ConnectedLossless
        }
    }
}

fn default_record_interval() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub circuit: CircuitParams,
    pub harvest: HarvestModel,
    pub load: LoadProfile,
    pub illumination: IlluminationProfile,
    /// V
    pub initial_voltage: f64,
    pub sleep_time: SleepTime,
    /// Spacing of regular trace samples (s); events are always recorded.
    #[serde(default = "default_record_interval")]
    pub record_interval: f64,
    #[serde(default)]
    pub options: SimOptions,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        self.circuit.validate()?;
        self.harvest.validate()?;
        self.harvest.validate_against(&self.circuit)?;
        self.load.validate()?;
        self.illumination.validate()?;
        let e_eh = self.harvest.sample(self.illumination.lux_at(0.0)).e_eh;
        CapVoltage::new(self.initial_voltage, e_eh).map_err(|_| {
            Error::config(alloc::format!(
                "initial_voltage must lie in [0, {e_eh}] V, got {}",
                self.initial_voltage
            ))
        })?;
        if !(self.record_interval > 0.0 && self.record_interval.is_finite()) {
            return Err(Error::config("record_interval must be > 0"));
        }
        Ok(())
    }
}
