use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::dims::DimensionReport;
use super::equivalence::EquivalenceResult;
use super::probe::ProbeResult;
use crate::besov::NormReport;
use crate::{Error, Result};

pub const NORM_CSV_HEADER: &str = "kind,sigma,level,term,cumulative,tail_ratio,verdict";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(Error::arg(format!("unknown format '{s}' (csv or json)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "results", rename_all = "lowercase")]
pub enum ReportData {
    Norms(Vec<NormReport>),
    Equivalence(Vec<EquivalenceResult>),
    Probes(Vec<ProbeResult>),
    Dimensions(Vec<DimensionReport>),
}

/// One row per (kind, σ, level). Reports without per-level terms give a
/// single row at their truncation level.
pub fn norm_rows(report: &NormReport) -> Vec<(usize, f64, f64, Option<f64>)> {
    if report.terms.is_empty() {
        return vec![(report.level, report.base, report.base, None)];
    }
    let mut rows = Vec::with_capacity(report.terms.len());
    for (i, t) in report.terms.iter().enumerate() {
        let prev = if i > 0 { Some(report.terms[i - 1].term) } else { None };
        let ratio = prev.map(|p| if p > 0.0 { t.term / p } else { 0.0 });
        rows.push((t.m, t.term, t.cumulative, ratio));
    }
    rows
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub fn render_report(data: &ReportData, format: Format) -> Result<String> {
    if format == Format::Json {
        let mut s = serde_json::to_string_pretty(data)?;
        s.push('\n');
        return Ok(s);
    }
    let mut out = String::new();
    match data {
        ReportData::Norms(reports) => {
            writeln!(out, "{NORM_CSV_HEADER}").unwrap();
            for r in reports {
                for (m, term, cum, ratio) in norm_rows(r) {
                    writeln!(out, "{},{},{},{},{},{},{}", r.kind, r.sigma, m, term, cum, opt(ratio), r.verdict).unwrap();
                }
            }
        }
        ReportData::Equivalence(results) => {
            writeln!(out, "kind_a,kind_b,sigma,level,function,ratio,previous_ratio").unwrap();
            for e in results {
                for (s, sigma) in e.sigmas.iter().enumerate() {
                    for (i, label) in e.labels.iter().enumerate() {
                        writeln!(
                            out,
                            "{},{},{},{},{},{},{}",
                            e.kinds.0, e.kinds.1, sigma, e.level, label, e.ratios[s][i], e.previous[s][i]
                        )
                        .unwrap();
                    }
                }
            }
        }
        ReportData::Probes(results) => {
            writeln!(out, "kind,function,sigma,level,tail_ratio,verdict,threshold").unwrap();
            for p in results {
                for (s, sigma) in p.sigmas.iter().enumerate() {
                    writeln!(
                        out,
                        "{},{},{},{},{},{},{}",
                        p.kind, p.label, sigma, p.level, p.tail_ratios[s], p.verdicts[s], p.threshold
                    )
                    .unwrap();
                }
            }
        }
        ReportData::Dimensions(reports) => {
            writeln!(out, "level,quantity,k,value,expected").unwrap();
            for d in reports {
                for o in &d.orders {
                    writeln!(out, "{},dim,{},{},{}", d.level, o.k, o.dim, o.expected).unwrap();
                    writeln!(out, "{},dim_prime,{},{},{}", d.level, o.k, o.dim_prime, o.expected).unwrap();
                    writeln!(out, "{},chain_residual,{},{},", d.level, o.k, o.residual).unwrap();
                }
                writeln!(out, "{},split_residual,1,{},", d.level, d.split_residual).unwrap();
                if let Some(w) = &d.weyl {
                    writeln!(out, "{},weyl_slope,,{},{}", w.level, w.slope, w.target).unwrap();
                }
            }
        }
    }
    Ok(out)
}

/// Renders and writes to `path`, or returns the text when `path` is None.
pub fn emit_report(data: &ReportData, format: Format, path: Option<&Path>) -> Result<String> {
    let text = render_report(data, format)?;
    if let Some(p) = path {
        if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|source| Error::Io { path: dir.to_path_buf(), source })?;
        }
        std::fs::write(p, &text).map_err(|source| Error::Io { path: p.to_path_buf(), source })?;
    }
    Ok(text)
}
