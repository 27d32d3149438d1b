//! Built-in data: the measured BLE node consumption profile, the harvest curve
//! recovered from its published sleep schedules, and ready-to-run scenarios.
//!
//! The node never published its thresholds, leakage resistance or harvester
//! voltage. [`prototype_circuit`] and [`PLACEHOLDER_E_EH`] fill them with
//! plausible values for a 400 mF supercapacitor behind an MPPT power manager;
//! override them for real hardware.

use alloc::vec::Vec;

use crate::circuit::CircuitParams;
use crate::harvest::{AboveRange, HarvestModel, HarvestPoint};
use crate::load::{LoadProfile, PhaseKind};
use crate::planner::harvest_power_oracle;
use crate::scenario::{IlluminationProfile, ScenarioConfig, SimOptions, SleepTime};

/// Operational voltage of the node's load (V).
pub const OPERATIONAL_VOLTAGE: f64 = 3.3;
/// Sleep current (A).
pub const SLEEP_CURRENT: f64 = 0.070e-3;
/// Placeholder harvester voltage (V).
pub const PLACEHOLDER_E_EH: f64 = 4.0;
/// Illuminance step used for the over/under-harvesting experiments (lx).
pub const LUX_PERTURBATION: f64 = 100.0;
/// Starting voltage of the built-in scenarios (V).
pub const NOMINAL_INITIAL_VOLTAGE: f64 = 3.3;

/// A published operating point: illuminance, the sleep time designed for it,
/// and the duty-cycle period reported for it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LightLevel {
    pub lux: f64,
    pub sleep_time: f64,
    pub reported_period: f64,
}

pub const LIGHT_LEVELS: [LightLevel; 3] = [
    LightLevel {
        lux: 300.0,
        sleep_time: 209.9,
        reported_period: 215.0,
    },
    LightLevel {
        lux: 500.0,
        sleep_time: 42.44,
        reported_period: 47.6,
    },
    LightLevel {
        lux: 700.0,
        sleep_time: 18.10,
        reported_period: 23.3,
    },
];

/// Sensing 7.550 mA / 0.260 s, advertising 0.400 mA / 2 s, data exchange
/// 0.225 mA / 3 s, sleep 0.070 mA, all at 3.3 V.
pub fn reference_profile() -> LoadProfile {
    LoadProfile::new(
        [
            (PhaseKind::SensorsReading, 7.550e-3, 0.260),
            (PhaseKind::BleAdvertising, 0.400e-3, 2.000),
            (PhaseKind::DataExchange, 0.225e-3, 3.000),
        ],
        SLEEP_CURRENT,
        OPERATIONAL_VOLTAGE,
    )
    .expect("built-in profile is valid")
}

/// 400 mF supercapacitor; `R_c`, `w_pm`, `V_on` and `V_off` are placeholders.
pub fn prototype_circuit() -> CircuitParams {
    CircuitParams {
        capacitance: 0.4,
        leakage_resistance: 1e5,
        w_pm: 1.0,
        e_pm: OPERATIONAL_VOLTAGE,
        v_on: 3.0,
        v_off: 2.5,
        coldstart_energy: 0.0,
        coldstart_duration: 0.0,
    }
}

/// Harvest curve through the three powers for which the published sleep
/// times exactly balance the cycle. Extrapolates above 700 lx.
pub fn oracle_harvest_model() -> HarvestModel {
    let profile = reference_profile();
    let points = LIGHT_LEVELS
        .iter()
        .map(|level| HarvestPoint {
            lux: level.lux,
            power: harvest_power_oracle(&profile, level.sleep_time),
            e_eh: PLACEHOLDER_E_EH,
        })
        .collect();
    HarvestModel::new(points, AboveRange::Extrapolate).expect("oracle points are monotone")
}

/// The published schedule for `level`, run at `level.lux + lux_offset` for
/// `periods` nominal periods (plus one second so the last cycle boundary is
/// inside the horizon).
pub fn nominal_scenario(level: &LightLevel, lux_offset: f64, periods: usize) -> ScenarioConfig {
    let profile = reference_profile();
    let period = profile.active_duration() + level.sleep_time;
    ScenarioConfig {
        circuit: prototype_circuit(),
        harvest: oracle_harvest_model(),
        load: profile,
        illumination: IlluminationProfile::constant(
            level.lux + lux_offset,
            periods as f64 * period + 1.0,
        ),
        initial_voltage: NOMINAL_INITIAL_VOLTAGE,
        sleep_time: SleepTime::Fixed(level.sleep_time),
        record_interval: 0.1,
        options: SimOptions::default(),
    }
}

/// The nine published experiments: each schedule at nominal, +100 lx and −100 lx.
pub fn perturbation_grid(periods: usize) -> Vec<(LightLevel, f64, ScenarioConfig)> {
    LIGHT_LEVELS
        .iter()
        .flat_map(|level| {
            [0.0, LUX_PERTURBATION, -LUX_PERTURBATION]
                .into_iter()
                .map(move |offset| (*level, offset, nominal_scenario(level, offset, periods)))
        })
        .collect()
}

pub struct ScenarioPreset {
    pub name: &'static str,
    pub description: &'static str,
    pub build: fn() -> ScenarioConfig,
}

pub const SCENARIO_PRESETS: [ScenarioPreset; 4] = [
    ScenarioPreset {
        name: "node-300lx",
        description: "Reference profile, 209.9 s sleep, 300 lx, four periods",
        build: || nominal_scenario(&LIGHT_LEVELS[0], 0.0, 4),
    },
    ScenarioPreset {
        name: "node-500lx",
        description: "Reference profile, 42.44 s sleep, 500 lx, ten periods",
        build: || nominal_scenario(&LIGHT_LEVELS[1], 0.0, 10),
    },
    ScenarioPreset {
        name: "node-700lx",
        description: "Reference profile, 18.10 s sleep, 700 lx, twenty periods",
        build: || nominal_scenario(&LIGHT_LEVELS[2], 0.0, 20),
    },
    ScenarioPreset {
        name: "node-auto",
        description: "Reference profile, sleep time re-planned per lux, 700 lx for 300 s",
        build: || {
            let mut cfg = nominal_scenario(&LIGHT_LEVELS[2], 0.0, 1);
            cfg.sleep_time = SleepTime::Auto;
            cfg.illumination.horizon = 300.0;
            cfg
        },
    },
];

pub fn scenario_preset(name: &str) -> Option<ScenarioConfig> {
    SCENARIO_PRESETS
        .iter()
        .find(|p| p.name == name)
        .map(|p| (p.build)())
}
