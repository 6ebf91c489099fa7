//! Per-iteration telemetry and its CSV export.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

/// Extra columns recorded by the smoothed ℓp solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpTraceFields {
    pub eps_min: f64,
    pub eps_max: f64,
    pub support_size: usize,
    pub sign_fixed: bool,
}

/// One row of telemetry. `block` is `-1` for iterations that sweep every block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub k: usize,
    #[serde(rename = "F")]
    pub f: f64,
    pub step_rel: f64,
    pub residual: f64,
    pub beta: f64,
    pub block: i64,
    pub retried: bool,
    pub wall_ns: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lp: Option<LpTraceFields>,
}

pub const CSV_HEADER: &str = "k,F,step_rel,residual,beta,block,retried,wall_ns";
pub const LP_CSV_COLUMNS: &str = "eps_min,eps_max,support_size,sign_fixed";

/// Shortest decimal string that parses back to the same `f64`.
pub fn fmt_float(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_owned()
    } else if v.is_infinite() {
        if v > 0.0 {
            "inf".to_owned()
        } else {
            "-inf".to_owned()
        }
    } else {
        format!("{v:?}")
    }
}

fn write_row<W: Write>(out: &mut W, algo: Option<&str>, r: &TraceRecord, with_lp: bool) -> io::Result<()> {
    if let Some(a) = algo {
        write!(out, "{a},")?;
    }
    write!(
        out,
        "{},{},{},{},{},{},{},{}",
        r.k,
        fmt_float(r.f),
        fmt_float(r.step_rel),
        fmt_float(r.residual),
        fmt_float(r.beta),
        r.block,
        r.retried,
        r.wall_ns
    )?;
    if with_lp {
        match &r.lp {
            Some(lp) => write!(
                out,
                ",{},{},{},{}",
                fmt_float(lp.eps_min),
                fmt_float(lp.eps_max),
                lp.support_size,
                lp.sign_fixed
            )?,
            None => write!(out, ",,,,")?,
        }
    }
    writeln!(out)
}

/// Write one trace as CSV. ℓp columns are appended when any record carries them.
pub fn write_csv<W: Write>(out: &mut W, records: &[TraceRecord]) -> io::Result<()> {
    let with_lp = records.iter().any(|r| r.lp.is_some());
    write!(out, "{CSV_HEADER}")?;
    if with_lp {
        write!(out, ",{LP_CSV_COLUMNS}")?;
    }
    writeln!(out)?;
    for r in records {
        write_row(out, None, r, with_lp)?;
    }
    Ok(())
}

/// Write several traces into one CSV with a leading `algo` column.
pub fn write_merged_csv<W: Write>(out: &mut W, traces: &[(&str, &[TraceRecord])]) -> io::Result<()> {
    let with_lp = traces.iter().any(|(_, t)| t.iter().any(|r| r.lp.is_some()));
    write!(out, "algo,{CSV_HEADER}")?;
    if with_lp {
        write!(out, ",{LP_CSV_COLUMNS}")?;
    }
    writeln!(out)?;
    for (algo, records) in traces {
        for r in *records {
            write_row(out, Some(algo), r, with_lp)?;
        }
    }
    Ok(())
}
