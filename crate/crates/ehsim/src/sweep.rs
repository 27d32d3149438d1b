//! Batch runs: cartesian parameter grids evaluated in parallel.

use std::collections::BTreeMap;
use std::str::FromStr;

use ehsim_core::{run, EventKind, ScenarioConfig, SimTrace};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{apply_overrides, parse_value, Override};
use crate::error::{Error, Result};

/// Runs every scenario on the rayon pool; results keep the input order.
pub fn par_sweep(configs: &[ScenarioConfig]) -> Vec<ehsim_core::Result<SimTrace>> {
    configs.par_iter().map(run).collect()
}

/// `--vary key=v1,v2,...`: one axis of a sweep grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Vary {
    pub key: String,
    pub values: Vec<serde_json::Value>,
}

impl FromStr for Vary {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (key, list) = s.split_once('=').ok_or_else(|| Error::Override {
            key: s.to_owned(),
            reason: "expected KEY=V1,V2,...".into(),
        })?;
        let values: Vec<_> = list
            .split(',')
            .map(str::trim)
            .filter(|v| !v.is_empty())
            .map(parse_value)
            .collect();
        if values.is_empty() {
            return Err(Error::Override {
                key: key.to_owned(),
                reason: "no values given".into(),
            });
        }
        Ok(Vary {
            key: key.trim().to_owned(),
            values,
        })
    }
}

/// Cartesian product of the axes applied to `base`, first axis slowest.
pub fn expand(base: &ScenarioConfig, axes: &[Vary]) -> Result<Vec<(Vec<Override>, ScenarioConfig)>> {
    let mut combos: Vec<Vec<Override>> = vec![Vec::new()];
    for axis in axes {
        combos = combos
            .into_iter()
            .flat_map(|prefix| {
                axis.values.iter().map(move |v| {
                    let mut next = prefix.clone();
                    next.push(Override {
                        key: axis.key.clone(),
                        value: v.clone(),
                    });
                    next
                })
            })
            .collect();
    }
    combos
        .into_iter()
        .map(|o| apply_overrides(base, &o).map(|cfg| (o, cfg)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    /// Completed duty cycles.
    pub periods: usize,
    pub period_lengths: Vec<f64>,
    /// Capacitor voltage change over each completed cycle (V).
    pub dv_per_period: Vec<f64>,
    pub final_time: f64,
    pub final_voltage: f64,
    pub events: BTreeMap<EventKind, usize>,
}

pub fn summarize(trace: &SimTrace) -> RunSummary {
    let mut events = BTreeMap::new();
    for e in &trace.events {
        *events.entry(e.kind).or_insert(0) += 1;
    }
    let dv = trace.cycle_voltage_deltas();
    RunSummary {
        periods: dv.len(),
        period_lengths: trace.cycle_periods(),
        dv_per_period: dv,
        final_time: trace.end_time(),
        final_voltage: trace.records.last().map_or(f64::NAN, |r| r.v_c),
        events,
    }
}
