//! Trace serialization: one CSV row per record, or a JSON document that also
//! carries the event list.

use std::io::Write;

use ehsim_core::{Event, EventKind, PhaseKind, SimTrace, TraceRecord};
use serde::Serialize;

use crate::error::Result;

pub const CSV_HEADER: [&str; 8] = [
    "t_s",
    "v_c_V",
    "load_state",
    "pm_on",
    "eh_connected",
    "p_eh_W",
    "p_cl_W",
    "i_c_A",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Format {
    #[default]
    Csv,
    Structured,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Structured => "json",
        }
    }
}

#[derive(Serialize)]
struct Row {
    t_s: f64,
    #[serde(rename = "v_c_V")]
    v_c: f64,
    load_state: PhaseKind,
    pm_on: bool,
    eh_connected: bool,
    #[serde(rename = "p_eh_W")]
    p_eh: f64,
    #[serde(rename = "p_cl_W")]
    p_cl: f64,
    #[serde(rename = "i_c_A")]
    i_c: f64,
}

impl From<&TraceRecord> for Row {
    fn from(r: &TraceRecord) -> Self {
        Row {
            t_s: r.t,
            v_c: r.v_c,
            load_state: r.load_state,
            pm_on: r.mode.pm_on,
            eh_connected: r.mode.eh_connected,
            p_eh: r.p_eh,
            p_cl: r.p_cl,
            i_c: r.i_c,
        }
    }
}

#[derive(Serialize)]
struct EventRow {
    t_s: f64,
    kind: EventKind,
    #[serde(rename = "v_c_V")]
    v_c: f64,
    load_state: PhaseKind,
}

impl From<&Event> for EventRow {
    fn from(e: &Event) -> Self {
        EventRow {
            t_s: e.t,
            kind: e.kind,
            v_c: e.v_c,
            load_state: e.load_state,
        }
    }
}

#[derive(Serialize)]
struct Document {
    records: Vec<Row>,
    events: Vec<EventRow>,
}

pub fn write_trace_csv<W: Write>(trace: &SimTrace, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if trace.records.is_empty() {
        w.write_record(CSV_HEADER)?;
    }
    for r in &trace.records {
        w.serialize(Row::from(r))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trace_structured<W: Write>(trace: &SimTrace, mut out: W) -> Result<()> {
    let doc = Document {
        records: trace.records.iter().map(Row::from).collect(),
        events: trace.events.iter().map(EventRow::from).collect(),
    };
    serde_json::to_writer_pretty(&mut out, &doc)?;
    writeln!(out)?;
    Ok(())
}

pub fn write_trace<W: Write>(trace: &SimTrace, format: Format, out: W) -> Result<()> {
    match format {
        Format::Csv => write_trace_csv(trace, out),
        Format::Structured => write_trace_structured(trace, out),
    }
}
