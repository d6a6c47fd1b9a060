//! Figure-ready output records and the CSV/JSON writers.
//!
//! Column order and names are fixed; floats print with the shortest
//! round-trip decimal representation (always '.' decimal), so re-running the
//! same seeded experiment produces byte-identical files.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// One curve point: `(method, sf, snr) -> rate` with optional interval.
#[derive(Debug, Clone, Serialize)]
pub struct CurveRecord {
    pub method: String,
    pub sf: u32,
    pub snr_db: f64,
    pub sir_db: Option<f64>,
    pub ser: f64,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub trials: Option<u64>,
}

/// One interference-pattern bin.
#[derive(Debug, Clone, Serialize)]
pub struct PatternRecord {
    pub k: usize,
    pub re: f64,
    pub im: f64,
    pub mag: f64,
}

fn opt_f64(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn opt_u64(v: Option<u64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn render_curves(records: &[CurveRecord], format: Format) -> Result<String> {
    match format {
        Format::Json => Ok(serde_json::to_string_pretty(records)? + "\n"),
        Format::Csv => {
            let mut out = String::from("method,sf,snr_db,sir_db,ser,ci_low,ci_high,trials\n");
            for r in records {
                writeln!(
                    out,
                    "{},{},{},{},{},{},{},{}",
                    r.method,
                    r.sf,
                    r.snr_db,
                    opt_f64(r.sir_db),
                    r.ser,
                    opt_f64(r.ci_low),
                    opt_f64(r.ci_high),
                    opt_u64(r.trials),
                )?;
            }
            Ok(out)
        }
    }
}

pub fn render_pattern(records: &[PatternRecord], format: Format) -> Result<String> {
    match format {
        Format::Json => Ok(serde_json::to_string_pretty(records)? + "\n"),
        Format::Csv => {
            let mut out = String::from("k,re,im,mag\n");
            for r in records {
                writeln!(out, "{},{},{},{}", r.k, r.re, r.im, r.mag)?;
            }
            Ok(out)
        }
    }
}

/// Emit the fully rendered payload in one step so a failed run never leaves
/// a partial file behind.
pub fn emit(payload: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => {
            std::fs::write(path, payload).with_context(|| format!("writing {}", path.display()))
        }
        None => {
            print!("{payload}");
            Ok(())
        }
    }
}
