//! CSV and JSON emitters for comparison reports and theory curves.
//!
//! Report CSV columns, in order:
//! `R,eps_mean,eps_stderr,eps_theory,sharpe_mean,sharpe_stderr,sharpe_theory,z_eps,z_sharpe`.
//! The JSON form carries the same rows plus a metadata block.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{PortfolioError, Result};
use crate::harness::{compare_curves, ComparisonReport, ComparisonRow, ReportMetadata, SimPoint, TheoryPoint, Thresholds};
use crate::moments::AsymptoticMoments;
use crate::quenched::ConstraintSpec;
use crate::replica::{self, Regime};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

impl ReportFormat {
    /// `.json` means JSON; anything else is CSV.
    pub fn from_path(path: &Path) -> ReportFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("json") => ReportFormat::Json,
            _ => ReportFormat::Csv,
        }
    }
}

/// Non-finite floats travel as JSON `null` and come back as NaN.
pub(crate) mod nullable_f64 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(*x)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| PortfolioError::io(path, e))
}

fn csv_err(path: &Path, e: csv::Error) -> PortfolioError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => PortfolioError::io(path, io),
        other => PortfolioError::data(path, format!("{other:?}")),
    }
}

pub fn emit_report(report: &ComparisonReport, path: &Path, format: ReportFormat) -> Result<()> {
    if report.rows.is_empty() {
        return Err(PortfolioError::Config("refusing to write a report with an empty grid".into()));
    }
    let out = create(path)?;
    match format {
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            for row in &report.rows {
                w.serialize(row).map_err(|e| csv_err(path, e))?;
            }
            w.flush().map_err(|e| PortfolioError::io(path, e))
        }
        ReportFormat::Json => {
            let mut out = out;
            serde_json::to_writer_pretty(&mut out, report)
                .map_err(|e| PortfolioError::data(path, e))?;
            use std::io::Write;
            writeln!(out).and_then(|_| out.flush()).map_err(|e| PortfolioError::io(path, e))
        }
    }
}

/// Read report rows back. CSV files carry no metadata, so only the rows are returned.
pub fn read_report_rows(path: &Path) -> Result<Vec<ComparisonRow>> {
    match ReportFormat::from_path(path) {
        ReportFormat::Json => Ok(read_report_json(path)?.rows),
        ReportFormat::Csv => {
            let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
            let rows = r
                .deserialize()
                .collect::<std::result::Result<Vec<ComparisonRow>, _>>()
                .map_err(|e| csv_err(path, e))?;
            if rows.is_empty() {
                return Err(PortfolioError::data(path, "no rows"));
            }
            Ok(rows)
        }
    }
}

pub fn read_report_json(path: &Path) -> Result<ComparisonReport> {
    let text = std::fs::read_to_string(path).map_err(|e| PortfolioError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| PortfolioError::data(path, e))
}

/// One row of the analytic curve file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryRow {
    #[serde(rename = "R")]
    pub r: f64,
    pub rho: f64,
    pub eps: f64,
    pub sharpe: Option<f64>,
    pub rho_star: f64,
    pub regime: Regime,
    pub eps_min: f64,
    pub eps0: f64,
    /// Capital allocation line at `R`; empty when `R1 ≤ R0`.
    pub cal: Option<f64>,
    #[serde(rename = "R_M")]
    pub r_m: Option<f64>,
    pub alpha: f64,
}

/// Closed-form curves over a sweep of `R`.
pub fn theory_rows(
    m: &AsymptoticMoments,
    alpha: f64,
    rho: f64,
    r0: f64,
    sweep: &[f64],
) -> Result<Vec<TheoryRow>> {
    let tangent = replica::tobin_tangent(m, alpha, r0).ok();
    sweep
        .iter()
        .map(|&r| {
            let c = ConstraintSpec::new(rho, r, r0)?;
            let p = replica::predict(m, alpha, &c)?;
            Ok(TheoryRow {
                r,
                rho,
                eps: p.eps,
                sharpe: p.sharpe_ratio,
                rho_star: p.rho_star,
                regime: p.regime,
                eps_min: p.eps_min,
                eps0: p.eps0,
                cal: tangent.map(|t| t.cal(r)),
                r_m: tangent.map(|t| t.r_m),
                alpha,
            })
        })
        .collect()
}

pub fn write_theory_csv(rows: &[TheoryRow], path: &Path) -> Result<()> {
    if rows.is_empty() {
        return Err(PortfolioError::Config("refusing to write an empty sweep".into()));
    }
    let mut w = csv::Writer::from_writer(create(path)?);
    for row in rows {
        w.serialize(row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| PortfolioError::io(path, e))
}

pub fn read_theory_csv(path: &Path) -> Result<Vec<TheoryRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let rows = r
        .deserialize()
        .collect::<std::result::Result<Vec<TheoryRow>, _>>()
        .map_err(|e| csv_err(path, e))?;
    if rows.is_empty() {
        return Err(PortfolioError::data(path, "no rows"));
    }
    Ok(rows)
}

/// Rescore simulated rows against an analytic curve file.
pub fn compare_files(
    theory: &[TheoryRow],
    sim: &[ComparisonRow],
    thresholds: Thresholds,
) -> Result<ComparisonReport> {
    let theory_pts = theory
        .iter()
        .map(|t| {
            let sharpe = t.sharpe.ok_or_else(|| {
                PortfolioError::Config(format!("theory has no Sharpe ratio at R = {}", t.r))
            })?;
            Ok(TheoryPoint {
                r: t.r,
                eps: t.eps,
                sharpe,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let sim_pts: Vec<SimPoint> = sim
        .iter()
        .map(|s| SimPoint {
            r: s.r,
            eps_mean: s.eps_mean,
            eps_err: s.eps_stderr,
            sharpe_mean: s.sharpe_mean,
            sharpe_err: s.sharpe_stderr,
        })
        .collect();
    let metadata = ReportMetadata {
        alpha: theory.first().map(|t| t.alpha),
        ..ReportMetadata::default()
    };
    compare_curves(&sim_pts, &theory_pts, thresholds, metadata)
}
