//! Operational states of the node and their load power.

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// State of the node's firmware finite-state machine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseKind {
    SensorsReading,
    BleAdvertising,
    DataExchange,
    Sleep,
    /// Restart transient after the power manager turns back on.
    ColdStart,
    /// Load unpowered.
    Off,
}

impl PhaseKind {
    pub const ACTIVE: [PhaseKind; 3] = [
        PhaseKind::SensorsReading,
        PhaseKind::BleAdvertising,
        PhaseKind::DataExchange,
    ];

    pub fn is_active(self) -> bool {
        Self::ACTIVE.contains(&self)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PhaseKind::SensorsReading => "sensors_reading",
            PhaseKind::BleAdvertising => "ble_advertising",
            PhaseKind::DataExchange => "data_exchange",
            PhaseKind::Sleep => "sleep",
            PhaseKind::ColdStart => "cold_start",
            PhaseKind::Off => "off",
        }
    }
}

impl fmt::Display for PhaseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PhaseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            PhaseKind::SensorsReading,
            PhaseKind::BleAdvertising,
            PhaseKind::DataExchange,
            PhaseKind::Sleep,
            PhaseKind::ColdStart,
            PhaseKind::Off,
        ]
        .into_iter()
        .find(|k| k.as_str() == s)
        .ok_or_else(|| Error::config(alloc::format!("unknown load state `{s}`")))
    }
}

/// One state of the consumption profile: a constant current drawn at the
/// operational voltage for a fixed time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadPhase {
    pub kind: PhaseKind,
    /// A
    pub current: f64,
    /// s
    pub duration: f64,
    /// V
    pub operational_voltage: f64,
}

impl LoadPhase {
    pub fn off(operational_voltage: f64) -> Self {
        LoadPhase {
            kind: PhaseKind::Off,
            current: 0.0,
            duration: f64::INFINITY,
            operational_voltage,
        }
    }

    /// Load-side power (W).
    pub fn power(&self) -> f64 {
        phase_power(self)
    }

    /// Energy over the phase duration (J).
    pub fn energy(&self) -> f64 {
        self.power() * self.duration
    }
}

/// Load-side power of a phase (W). An unpowered load draws nothing.
pub fn phase_power(phase: &LoadPhase) -> f64 {
    if phase.kind == PhaseKind::Off {
        0.0
    } else {
        phase.current * phase.operational_voltage
    }
}

/// The active cycle (fixed order) plus the sleep current.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ProfileDoc", into = "ProfileDoc")]
pub struct LoadProfile {
    pub phases: Vec<LoadPhase>,
    /// A
    pub sleep_current: f64,
    /// V
    pub operational_voltage: f64,
}

impl LoadProfile {
    /// Builds and validates a profile whose phases all run at `operational_voltage`.
    pub fn new(
        phases: impl IntoIterator<Item = (PhaseKind, f64, f64)>,
        sleep_current: f64,
        operational_voltage: f64,
    ) -> Result<Self> {
        let profile = LoadProfile {
            phases: phases
                .into_iter()
                .map(|(kind, current, duration)| LoadPhase {
                    kind,
                    current,
                    duration,
                    operational_voltage,
                })
                .collect(),
            sleep_current,
            operational_voltage,
        };
        profile.validate()?;
        Ok(profile)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.operational_voltage > 0.0 && self.operational_voltage.is_finite()) {
            return Err(Error::config("operational_voltage must be positive"));
        }
        if !(self.sleep_current >= 0.0 && self.sleep_current.is_finite()) {
            return Err(Error::config("sleep_current must be >= 0"));
        }
        if self.phases.is_empty() {
            return Err(Error::config("load profile needs at least one active phase"));
        }
        let mut previous: Option<PhaseKind> = None;
        for phase in &self.phases {
            if !phase.kind.is_active() {
                return Err(Error::config(alloc::format!(
                    "`{}` is not an active-cycle phase",
                    phase.kind
                )));
            }
            if previous.is_some_and(|p| p >= phase.kind) {
                return Err(Error::config(
                    "active phases must appear once each, in the order sensors_reading, ble_advertising, data_exchange",
                ));
            }
            previous = Some(phase.kind);
            if !(phase.current >= 0.0 && phase.current.is_finite()) {
                return Err(Error::config(alloc::format!("{} current must be >= 0", phase.kind)));
            }
            if !(phase.duration > 0.0 && phase.duration.is_finite()) {
                return Err(Error::config(alloc::format!("{} duration must be > 0", phase.kind)));
            }
            if !(phase.operational_voltage > 0.0) {
                return Err(Error::config(alloc::format!("{} voltage must be > 0", phase.kind)));
            }
        }
        Ok(())
    }

    /// Active time `T_a` (s).
    pub fn active_duration(&self) -> f64 {
        self.phases.iter().map(|p| p.duration).sum()
    }

    /// Sleep power `p_devs` (W).
    pub fn sleep_power(&self) -> f64 {
        self.sleep_current * self.operational_voltage
    }

    pub fn sleep_phase(&self, duration: f64) -> LoadPhase {
        LoadPhase {
            kind: PhaseKind::Sleep,
            current: self.sleep_current,
            duration,
            operational_voltage: self.operational_voltage,
        }
    }

    pub fn phase(&self, kind: PhaseKind) -> Option<&LoadPhase> {
        self.phases.iter().find(|p| p.kind == kind)
    }
}

/// `E_deva`: energy of one active cycle (J).
pub fn active_cycle_energy(profile: &LoadProfile) -> f64 {
    profile.phases.iter().map(LoadPhase::energy).sum()
}

/// `E_devs(T_s)`: energy spent sleeping for `t_s` seconds (J).
pub fn sleep_energy(profile: &LoadProfile, t_s: f64) -> f64 {
    profile.sleep_power() * t_s
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileDoc {
    operational_voltage: f64,
    sleep_current: f64,
    phases: Vec<PhaseDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PhaseDoc {
    kind: PhaseKind,
    current: f64,
    duration: f64,
}

impl TryFrom<ProfileDoc> for LoadProfile {
    type Error = Error;

    fn try_from(doc: ProfileDoc) -> Result<Self> {
        LoadProfile::new(
            doc.phases.into_iter().map(|p| (p.kind, p.current, p.duration)),
            doc.sleep_current,
            doc.operational_voltage,
        )
    }
}

impl From<LoadProfile> for ProfileDoc {
    fn from(profile: LoadProfile) -> Self {
        ProfileDoc {
            operational_voltage: profile.operational_voltage,
            sleep_current: profile.sleep_current,
            phases: profile
                .phases
                .iter()
                .map(|p| PhaseDoc {
                    kind: p.kind,
                    current: p.current,
                    duration: p.duration,
                })
                .collect(),
        }
    }
}
