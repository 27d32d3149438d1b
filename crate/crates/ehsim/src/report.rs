//! Human-readable renderings. Values are rounded here only; the structured
//! outputs keep full precision.

use std::fmt::Write;

use ehsim_core::validation::FittedParameter;
use ehsim_core::{ComparisonReport, DutyCyclePlan};

use crate::sweep::RunSummary;

pub fn plan_table(plan: &DutyCyclePlan) -> String {
    let mut s = String::new();
    let rows = [
        ("T_a", format!("{:.3} s", plan.t_a)),
        ("T_s", format!("{:.3} s", plan.t_s)),
        ("T", format!("{:.3} s", plan.period)),
        ("E_deva", format!("{:.6} J", plan.e_deva)),
        ("E_devs", format!("{:.6} J", plan.e_devs)),
        ("E_harv", format!("{:.6} J", plan.e_harv)),
        ("p_harv", format!("{:.6e} W", plan.p_harv)),
        ("margin", format!("{:.3e} J", plan.margin)),
        ("feasible", plan.feasible.to_string()),
    ];
    for (k, v) in rows {
        let _ = writeln!(s, "{k:<10}{v}");
    }
    s
}

pub fn comparison_table(report: &ComparisonReport) -> String {
    let mut s = String::new();
    let rows = [
        ("window", format!("[{}, {}] s", report.t_start, report.horizon)),
        ("max |dV|", format!("{:.6e} V", report.max_abs_dv)),
        ("|dV| end", format!("{:.6e} V", report.dv_at_horizon)),
        ("rms dV", format!("{:.6e} V", report.rms_dv)),
        ("dE", format!("{:.4} %", report.energy_deviation_pct)),
    ];
    for (k, v) in rows {
        let _ = writeln!(s, "{k:<10}{v}");
    }
    s
}

pub fn fit_table(params: &[FittedParameter]) -> String {
    let mut s = String::new();
    for p in params {
        let _ = writeln!(s, "{:<20?}{} (grid step {:.3e})", p.parameter, p.value, p.resolution);
    }
    s
}

pub fn summary_text(summary: &RunSummary) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "periods {}  end {:.3} s  V_c {:.6} V",
        summary.periods, summary.final_time, summary.final_voltage
    );
    for (i, (dv, len)) in summary
        .dv_per_period
        .iter()
        .zip(&summary.period_lengths)
        .enumerate()
    {
        let _ = writeln!(s, "  period {:>3}: T = {len:.3} s  dV = {dv:+.6e} V", i + 1);
    }
    let events: Vec<String> = summary
        .events
        .iter()
        .map(|(k, n)| format!("{}={n}", k.as_str()))
        .collect();
    let _ = writeln!(s, "events {}", events.join(" "));
    s
}
