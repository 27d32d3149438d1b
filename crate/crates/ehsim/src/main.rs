use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use ehsim::report::{comparison_table, fit_table, plan_table, summary_text};
use ehsim::{
    apply_overrides, expand, ingest_path, load_config, par_sweep, summarize, write_trace, Format,
    Override, Vary,
};
use ehsim_core::planner::{check_feasibility, plan};
use ehsim_core::presets::{
    oracle_harvest_model, perturbation_grid, reference_profile, scenario_preset, LIGHT_LEVELS,
    SCENARIO_PRESETS,
};
use ehsim_core::validation::{
    compare_series, EnergyDeviationAt, FitSettings, FreeParameter, ParameterRange,
};
use ehsim_core::{fit_parameters, run, Error as ModelError, ScenarioConfig};
use serde_json::json;

const EXIT_INFEASIBLE: u8 = 2;
const EXIT_OVER_THRESHOLD: u8 = 3;

/// Energy-harvesting sensor node simulator.
#[derive(Parser)]
#[command(name = "ehsim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Source {
    /// Scenario document (JSON)
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in scenario (see `ehsim presets`)
    #[arg(long)]
    preset: Option<String>,
    /// Override a config field, e.g. `illumination.segments.0.lux=600`
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<Override>,
    /// Seed for the randomized advertising time
    #[arg(long)]
    seed: Option<u64>,
}

impl Source {
    fn is_given(&self) -> bool {
        self.config.is_some() || self.preset.is_some()
    }

    fn finish(&self, cfg: ScenarioConfig) -> anyhow::Result<ScenarioConfig> {
        let mut cfg = apply_overrides(&cfg, &self.overrides)?;
        if let Some(seed) = self.seed {
            cfg.options.seed = seed;
        }
        Ok(cfg)
    }

    fn load(&self) -> anyhow::Result<ScenarioConfig> {
        let base = match (&self.config, &self.preset) {
            (Some(path), _) => load_config(path)?,
            (None, Some(name)) => {
                scenario_preset(name).ok_or_else(|| ehsim::Error::UnknownPreset(name.clone()))?
            }
            (None, None) => bail!("one of --config or --preset is required"),
        };
        self.finish(base)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum EnergyAt {
    Horizon,
    Max,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the sleep time that balances one duty cycle
    Plan {
        #[command(flatten)]
        source: Source,
        /// Illuminance to plan for (lx); defaults to the scenario's initial lux
        #[arg(long, conflicts_with = "p_harv")]
        lux: Option<f64>,
        /// Harvested power to plan for (W)
        #[arg(long)]
        p_harv: Option<f64>,
        /// Check this sleep time instead of solving for one (s)
        #[arg(long)]
        sleep: Option<f64>,
        /// Output format; a table when omitted
        #[arg(long)]
        format: Option<Format>,
    },
    /// Run one scenario and write its trace
    Simulate {
        #[command(flatten)]
        source: Source,
        /// Trace destination; standard output when omitted
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Run a grid of scenarios in parallel
    Sweep {
        #[command(flatten)]
        source: Source,
        /// Grid axis, e.g. `illumination.segments.0.lux=600,700,800` (repeatable)
        #[arg(long, value_name = "KEY=V1,V2,...")]
        vary: Vec<Vary>,
        /// Run the nine nominal / +100 lx / -100 lx schedule experiments instead
        #[arg(long, conflicts_with_all = ["vary", "config", "preset"])]
        perturbation_grid: bool,
        /// Duty cycles per run for --perturbation-grid
        #[arg(long, default_value_t = 4)]
        periods: usize,
        /// Directory for per-run traces and summary.json
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Compare a simulation with a measured voltage trace
    Validate {
        #[command(flatten)]
        source: Source,
        /// Measured trace: CSV with t_s, v_c_V columns
        #[arg(long)]
        measured: PathBuf,
        /// Largest acceptable stored-energy deviation (%)
        #[arg(long, default_value_t = 1.0)]
        threshold: f64,
        /// Where the energy deviation is evaluated
        #[arg(long, value_enum, default_value_t = EnergyAt::Horizon)]
        energy_at: EnergyAt,
        /// Fit a parameter before comparing: `w_pm=1:1.3`, `leakage_resistance=..`, `harvest_scale=..`
        #[arg(long, value_name = "PARAM=LO:HI")]
        fit: Vec<String>,
        /// Report destination; standard output when omitted
        #[arg(long)]
        out: Option<PathBuf>,
        /// Output format; a table when omitted
        #[arg(long)]
        format: Option<Format>,
    },
    /// List built-in scenarios, the load profile and the harvest curve
    Presets {
        /// Print one preset as a complete scenario document
        #[arg(long)]
        show: Option<String>,
        #[arg(long)]
        format: Option<Format>,
    },
}

fn output(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn cmd_plan(
    source: &Source,
    lux: Option<f64>,
    p_harv: Option<f64>,
    sleep: Option<f64>,
    format: Option<Format>,
) -> anyhow::Result<u8> {
    let cfg = source.load()?;
    let p = match (p_harv, lux) {
        (Some(p), _) => p,
        (None, Some(lux)) => cfg.harvest.power_at(lux),
        (None, None) => cfg.harvest.power_at(cfg.illumination.lux_at(0.0)),
    };
    let result = match sleep {
        Some(t_s) if t_s >= 0.0 => Ok(check_feasibility(p, &cfg.load, t_s)),
        Some(t_s) => bail!("sleep time must be >= 0, got {t_s}"),
        None => plan(p, &cfg.load),
    };
    let plan = match result {
        Ok(plan) => plan,
        Err(ModelError::NeverFeasible { p_harv, p_sleep }) => {
            println!(
                "never feasible: harvested power {p_harv} W does not exceed sleep power {p_sleep} W"
            );
            return Ok(EXIT_INFEASIBLE);
        }
        Err(e) => return Err(e.into()),
    };
    let mut out = output(None)?;
    match format {
        None => write!(out, "{}", plan_table(&plan))?,
        Some(Format::Structured) => {
            serde_json::to_writer_pretty(&mut out, &plan)?;
            writeln!(out)?;
        }
        Some(Format::Csv) => {
            let mut w = csv::Writer::from_writer(&mut out);
            w.serialize(plan)?;
            w.flush()?;
        }
    }
    out.flush()?;
    Ok(if plan.feasible { 0 } else { EXIT_INFEASIBLE })
}

fn cmd_simulate(source: &Source, out: Option<&Path>, format: Format) -> anyhow::Result<u8> {
    let cfg = source.load()?;
    let trace = run(&cfg)?;
    let mut sink = output(out)?;
    write_trace(&trace, format, &mut sink)?;
    sink.flush()?;
    drop(sink);
    let summary = summary_text(&summarize(&trace));
    // keep standard output clean when it carries the trace
    if out.is_some() {
        print!("{summary}");
    } else {
        eprint!("{summary}");
    }
    Ok(0)
}

fn cmd_sweep(
    source: &Source,
    vary: &[Vary],
    grid: bool,
    periods: usize,
    out: Option<&Path>,
    format: Format,
) -> anyhow::Result<u8> {
    let runs: Vec<(String, ScenarioConfig)> = if grid {
        perturbation_grid(periods)
            .into_iter()
            .map(|(level, offset, cfg)| {
                let label = format!("{} lx schedule at {} lx", level.lux, level.lux + offset);
                source.finish(cfg).map(|cfg| (label, cfg))
            })
            .collect::<anyhow::Result<_>>()?
    } else {
        let base = source.load()?;
        expand(&base, vary)?
            .into_iter()
            .map(|(o, cfg)| {
                let label = o.iter().map(ToString::to_string).collect::<Vec<_>>().join(" ");
                (label, cfg)
            })
            .collect()
    };
    let configs: Vec<ScenarioConfig> = runs.iter().map(|(_, c)| c.clone()).collect();
    let results = par_sweep(&configs);

    if let Some(dir) = out {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let mut failed = false;
    let mut rows = Vec::new();
    for (i, ((label, _), result)) in runs.iter().zip(&results).enumerate() {
        match result {
            Ok(trace) => {
                let summary = summarize(trace);
                let mean_dv = if summary.dv_per_period.is_empty() {
                    f64::NAN
                } else {
                    summary.dv_per_period.iter().sum::<f64>() / summary.dv_per_period.len() as f64
                };
                println!(
                    "{i:>4}  {label:<40} periods {:>4}  mean dV {mean_dv:+.4e} V  V_c {:.6} V",
                    summary.periods, summary.final_voltage
                );
                if let Some(dir) = out {
                    let path = dir.join(format!("run_{i:03}.{}", format.extension()));
                    let mut w = output(Some(&path))?;
                    write_trace(trace, format, &mut w)?;
                    w.flush()?;
                }
                rows.push(json!({ "index": i, "label": label, "summary": summary }));
            }
            Err(e) => {
                failed = true;
                println!("{i:>4}  {label:<40} error: {e}");
                rows.push(json!({ "index": i, "label": label, "error": e.to_string() }));
            }
        }
    }
    if let Some(dir) = out {
        let mut w = output(Some(&dir.join("summary.json")))?;
        serde_json::to_writer_pretty(&mut w, &rows)?;
        writeln!(w)?;
        w.flush()?;
    }
    Ok(if failed { 1 } else { 0 })
}

fn parse_fit(arg: &str) -> anyhow::Result<ParameterRange> {
    let (name, range) = arg
        .split_once('=')
        .with_context(|| format!("--fit `{arg}`: expected PARAM=LO:HI"))?;
    let parameter = match name.trim() {
        "w_pm" => FreeParameter::WPm,
        "leakage_resistance" => FreeParameter::LeakageResistance,
        "harvest_scale" => FreeParameter::HarvestScale,
        other => bail!("--fit: unknown parameter `{other}` (w_pm, leakage_resistance, harvest_scale)"),
    };
    let (lo, hi) = range
        .split_once(':')
        .with_context(|| format!("--fit `{arg}`: expected LO:HI"))?;
    Ok(ParameterRange {
        parameter,
        lower: lo.trim().parse().with_context(|| format!("--fit `{arg}`"))?,
        upper: hi.trim().parse().with_context(|| format!("--fit `{arg}`"))?,
    })
}

#[allow(clippy::too_many_arguments)]
fn cmd_validate(
    source: &Source,
    measured: &Path,
    threshold: f64,
    energy_at: EnergyAt,
    fit: &[String],
    out: Option<&Path>,
    format: Option<Format>,
) -> anyhow::Result<u8> {
    let mut cfg = source.load()?;
    let meas = ingest_path(measured).with_context(|| format!("reading {}", measured.display()))?;
    let free: Vec<ParameterRange> = fit.iter().map(|s| parse_fit(s)).collect::<anyhow::Result<_>>()?;
    let mut fitted = Vec::new();
    if !free.is_empty() {
        let result = fit_parameters(&meas, &cfg, &free, &FitSettings::default())?;
        cfg = result.config;
        fitted = result.parameters;
    }
    let at = match energy_at {
        EnergyAt::Horizon => EnergyDeviationAt::Horizon,
        EnergyAt::Max => EnergyDeviationAt::MaxOverTime,
    };
    let trace = run(&cfg)?;
    let report = compare_series(&trace.voltage_series(), &meas.records, &cfg.circuit, at)?;
    let pass = report.energy_deviation_pct <= threshold;

    let mut w = output(out)?;
    match format {
        None => {
            write!(w, "{}", comparison_table(&report))?;
            write!(w, "{}", fit_table(&fitted))?;
            writeln!(w, "{:<10}{} (threshold {threshold} %)", "verdict", if pass { "pass" } else { "fail" })?;
        }
        Some(Format::Structured) => {
            let fitted: Vec<_> = fitted
                .iter()
                .map(|p| json!({ "parameter": p.parameter, "value": p.value, "resolution": p.resolution }))
                .collect();
            let doc = json!({ "report": report, "fitted": fitted, "threshold_pct": threshold, "pass": pass });
            serde_json::to_writer_pretty(&mut w, &doc)?;
            writeln!(w)?;
        }
        Some(Format::Csv) => {
            let mut c = csv::Writer::from_writer(&mut w);
            c.serialize(report)?;
            c.flush()?;
        }
    }
    w.flush()?;
    Ok(if pass { 0 } else { EXIT_OVER_THRESHOLD })
}

fn cmd_presets(show: Option<&str>, format: Option<Format>) -> anyhow::Result<u8> {
    let mut out = output(None)?;
    if let Some(name) = show {
        let cfg = scenario_preset(name).ok_or_else(|| ehsim::Error::UnknownPreset(name.into()))?;
        serde_json::to_writer_pretty(&mut out, &cfg)?;
        writeln!(out)?;
        out.flush()?;
        return Ok(0);
    }
    let profile = reference_profile();
    let harvest = oracle_harvest_model();
    if format == Some(Format::Structured) {
        let scenarios: Vec<_> = SCENARIO_PRESETS
            .iter()
            .map(|p| json!({ "name": p.name, "description": p.description }))
            .collect();
        let doc = json!({
            "scenarios": scenarios,
            "load_profile": profile,
            "harvest_model": harvest,
            "notes": NOTES,
        });
        serde_json::to_writer_pretty(&mut out, &doc)?;
        writeln!(out)?;
        out.flush()?;
        return Ok(0);
    }
    writeln!(out, "scenarios")?;
    for p in &SCENARIO_PRESETS {
        writeln!(out, "  {:<14}{}", p.name, p.description)?;
    }
    writeln!(out, "\nload profile (measured on the BLE node, {} V)", profile.operational_voltage)?;
    for phase in &profile.phases {
        writeln!(
            out,
            "  {:<16}{:>8.3} mA {:>8.3} s {:>10.6} J",
            phase.kind.as_str(),
            phase.current * 1e3,
            phase.duration,
            phase.energy()
        )?;
    }
    writeln!(out, "  {:<16}{:>8.3} mA", "sleep", profile.sleep_current * 1e3)?;
    writeln!(out, "\nharvest curve (recovered from the published sleep schedules)")?;
    for (point, level) in harvest.points.iter().zip(&LIGHT_LEVELS) {
        writeln!(
            out,
            "  {:>5} lx {:.6e} W  (T_s {} s)  E_eh {} V",
            point.lux, point.power, level.sleep_time, point.e_eh
        )?;
    }
    writeln!(out)?;
    for note in NOTES {
        writeln!(out, "note: {note}")?;
    }
    out.flush()?;
    Ok(0)
}

const NOTES: [&str; 3] = [
    "harvest powers balance each published sleep time exactly; between points the curve is linear, below 300 lx it runs through the origin, above 700 lx it extrapolates",
    "V_on = 3.0 V, V_off = 2.5 V, E_eh = 4.0 V, R_c = 100 kOhm and w_pm = 1 are placeholders; the node's values were never published",
    "C = 0.4 F is the supercapacitor of the measured node",
];

fn dispatch(cli: Cli) -> anyhow::Result<u8> {
    match cli.command {
        Command::Plan {
            source,
            lux,
            p_harv,
            sleep,
            format,
        } => cmd_plan(&source, lux, p_harv, sleep, format),
        Command::Simulate {
            source,
            out,
            format,
        } => cmd_simulate(&source, out.as_deref(), format),
        Command::Sweep {
            source,
            vary,
            perturbation_grid,
            periods,
            out,
            format,
        } => {
            if !perturbation_grid && !source.is_given() {
                bail!("one of --config, --preset or --perturbation-grid is required");
            }
            cmd_sweep(&source, &vary, perturbation_grid, periods, out.as_deref(), format)
        }
        Command::Validate {
            source,
            measured,
            threshold,
            energy_at,
            fit,
            out,
            format,
        } => cmd_validate(&source, &measured, threshold, energy_at, &fit, out.as_deref(), format),
        Command::Presets { show, format } => cmd_presets(show.as_deref(), format),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
