//! CSV and JSON emission. Numbers are written with Rust's shortest
//! round-trip float formatting, never locale-dependent.

use std::io::Write;
use std::str::FromStr;

use crate::analysis::{ImbalanceReport, SweepReport};
use crate::assigner::{AssignmentResult, GtInstance};
use crate::error::{Error, Result};

pub const IMBALANCE_CSV_HEADER: [&str; 6] = [
    "bin_lo",
    "bin_hi",
    "axis",
    "mean_pos",
    "mean_quality",
    "n_gt",
];

pub const ASSIGNMENT_CSV_HEADER: [&str; 13] = [
    "gt",
    "class_id",
    "cx",
    "cy",
    "w",
    "h",
    "theta",
    "n_cps",
    "n_mps",
    "n_fps",
    "n_pos",
    "semantic_cx",
    "semantic_cy",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(Error::InvalidConfig(format!("unknown format `{other}`"))),
        }
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Sink(e.into())
}

fn write_json<T: serde::Serialize, W: Write>(value: &T, sink: &mut W) -> Result<()> {
    serde_json::to_writer_pretty(&mut *sink, value).map_err(|e| match e.io_error_kind() {
        Some(kind) => Error::Sink(std::io::Error::new(kind, e)),
        None => Error::Json(e),
    })?;
    sink.write_all(b"\n")?;
    sink.flush()?;
    Ok(())
}

pub fn emit_imbalance<W: Write>(
    report: &ImbalanceReport,
    format: ReportFormat,
    sink: &mut W,
) -> Result<()> {
    match format {
        ReportFormat::Json => write_json(report, sink),
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(&mut *sink);
            w.write_record(IMBALANCE_CSV_HEADER).map_err(csv_err)?;
            for r in &report.records {
                w.write_record([
                    r.bin_lo.to_string(),
                    r.bin_hi.to_string(),
                    r.axis.as_str().to_string(),
                    r.mean_pos.to_string(),
                    r.mean_quality.to_string(),
                    r.n_gt.to_string(),
                ])
                .map_err(csv_err)?;
            }
            w.flush()?;
            Ok(())
        }
    }
}

/// JSON: the full result (labels and per-gt stage lists). CSV: one summary row
/// per gt.
pub fn emit_assignment<W: Write>(
    result: &AssignmentResult,
    gts: &[GtInstance],
    format: ReportFormat,
    sink: &mut W,
) -> Result<()> {
    match format {
        ReportFormat::Json => write_json(result, sink),
        ReportFormat::Csv => {
            let counts = result.positive_counts();
            let mut w = csv::Writer::from_writer(&mut *sink);
            w.write_record(ASSIGNMENT_CSV_HEADER).map_err(csv_err)?;
            for (i, (stages, gt)) in result.per_gt.iter().zip(gts).enumerate() {
                let b = gt.bbox;
                w.write_record([
                    i.to_string(),
                    gt.class_id.to_string(),
                    b.cx.to_string(),
                    b.cy.to_string(),
                    b.w.to_string(),
                    b.h.to_string(),
                    b.theta.to_string(),
                    stages.cps.len().to_string(),
                    stages.mps.len().to_string(),
                    stages.fps.len().to_string(),
                    counts[i].to_string(),
                    stages.semantic_center[0].to_string(),
                    stages.semantic_center[1].to_string(),
                ])
                .map_err(csv_err)?;
            }
            w.flush()?;
            Ok(())
        }
    }
}

pub fn emit_sweep<W: Write>(report: &SweepReport, sink: &mut W) -> Result<()> {
    write_json(report, sink)
}
