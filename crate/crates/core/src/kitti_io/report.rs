//! Deterministic report serialization. Floats are rounded to six significant
//! digits, JSON keys are sorted, and CSV rows follow the report's own order.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::Serialize;
use serde_json::Value;

use crate::lab::{MultiFlipResult, NamedCurve};
use crate::metrics::{BinnedMae, ComplementarityReport};
use crate::pipeline::PlaneReport;

const SIG_DIGITS: usize = 6;
const NA: &str = "NA";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(Self::Json),
            "csv" => Ok(Self::Csv),
            _ => Err(format!("unknown format {s:?}")),
        }
    }
}

/// Rounds to `digits` significant digits. Non-finite values pass through.
pub fn round_sig(x: f64, digits: usize) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", digits.max(1) - 1, x).parse().unwrap_or(x)
}

/// Shortest text for `x` rounded to six significant digits. Very small and
/// very large magnitudes use exponent notation.
pub fn fmt_sig(x: f64) -> String {
    let r = round_sig(x, SIG_DIGITS);
    if r == 0.0 {
        // drop the sign of negative zero
        "0".into()
    } else if r.is_finite() && (r.abs() < 1e-4 || r.abs() >= 1e15) {
        format!("{r:e}")
    } else {
        format!("{r}")
    }
}

fn opt(x: Option<f64>) -> String {
    x.filter(|v| v.is_finite()).map_or_else(|| NA.to_string(), fmt_sig)
}

fn round_value(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().expect("f64 number");
            let r = round_sig(x, SIG_DIGITS);
            *v = serde_json::Number::from_f64(if r == 0.0 { 0.0 } else { r }).map_or(Value::Null, Value::Number);
        }
        Value::Array(a) => a.iter_mut().for_each(round_value),
        Value::Object(o) => o.values_mut().for_each(round_value),
        _ => {}
    }
}

fn to_json<T: Serialize>(x: &T) -> String {
    let mut v = serde_json::to_value(x).expect("report serializes");
    round_value(&mut v);
    let mut s = serde_json::to_string_pretty(&v).expect("value serializes");
    s.push('\n');
    s
}

fn header_lines(out: &mut String, header: &BTreeMap<String, String>) {
    for (k, v) in header {
        let _ = writeln!(out, "# {k}={v}");
    }
}

fn bin_rows(out: &mut String, metric: &str, series: &str, t: &BinnedMae) {
    for r in &t.rows {
        let upper = r.upper.map_or_else(|| "inf".to_string(), fmt_sig);
        let _ = writeln!(out, "{metric},{series},,{},{upper},{},{},", fmt_sig(r.lower), opt(r.mae), r.count);
    }
    if t.unbinned > 0 {
        let _ = writeln!(out, "{metric},{series},,,,{NA},{},unbinned", t.unbinned);
    }
}

/// Serializes a complementarity report.
///
/// CSV columns are `metric,branch,partner,lower,upper,value,count,note`,
/// preceded by `# key=value` configuration lines. Undefined values are `NA`.
pub fn write_report(report: &ComplementarityReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => to_json(report),
        ReportFormat::Csv => {
            let mut out = String::new();
            header_lines(&mut out, &report.header);
            out.push_str("metric,branch,partner,lower,upper,value,count,note\n");
            let _ = writeln!(out, "sample_count,,,,,{},{},", report.sample_count, report.sample_count);
            for m in &report.mae {
                let _ = writeln!(out, "mae,{},,,,{},{},", m.branch, opt(m.mae), m.count);
            }
            if let Some(f) = &report.fused {
                let _ = writeln!(out, "mae,{},,,,{},{},", f.branch, opt(f.mae), f.count);
            }
            for e in &report.esop {
                let _ = writeln!(out, "esop,{},{},,,{},{},{}", e.a, e.b, opt(e.esop), e.count, e.label.as_deref().unwrap_or(""));
            }
            for c in &report.cs {
                let _ =
                    writeln!(out, "cs,{},{},,,{},,{}", c.branch, c.partner, opt(c.cs), c.flag.as_deref().unwrap_or(""));
            }
            for b in &report.binned {
                bin_rows(&mut out, &format!("binned_mae_{}", b.key), &b.series, &b.table);
            }
            for (name, n) in &report.invalid {
                let _ = writeln!(out, "invalid,{name},,,,,{n},");
            }
            out
        }
    }
}

pub fn read_report_json(text: &str) -> Result<ComplementarityReport, serde_json::Error> {
    serde_json::from_str(text)
}

#[derive(Serialize)]
struct CurveDoc<'a> {
    header: &'a BTreeMap<String, String>,
    curves: &'a [NamedCurve],
}

/// Sweep curves as `branch,x,mae,count` CSV (plus `baseline_mae` when the
/// curves are disturbance sweeps) or JSON.
pub fn write_curves(header: &BTreeMap<String, String>, curves: &[NamedCurve], format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => to_json(&CurveDoc { header, curves }),
        ReportFormat::Csv => {
            let mut out = String::new();
            header_lines(&mut out, header);
            let disturb = curves.iter().any(|c| c.baseline_mae.is_some());
            for c in curves.iter().filter(|c| c.baseline_mae.is_some()) {
                let _ = writeln!(out, "# crossover[{}]={}", c.branch, opt(c.crossover));
            }
            out.push_str(if disturb { "branch,x,mae,count,baseline_mae\n" } else { "branch,x,mae,count\n" });
            for c in curves {
                let k = &c.curve;
                for i in 0..k.x.len() {
                    let _ = write!(out, "{},{},{},{}", c.branch, fmt_sig(k.x[i]), fmt_sig(k.mae[i]), k.count[i]);
                    if disturb {
                        let _ = write!(out, ",{}", opt(c.baseline_mae));
                    }
                    out.push('\n');
                }
            }
            out
        }
    }
}

#[derive(Serialize)]
struct MultiFlipDoc<'a> {
    header: &'a BTreeMap<String, String>,
    results: &'a [MultiFlipResult],
}

/// Multi-branch flip results as `k,mae,count,flipped` CSV or JSON.
pub fn write_multi_flip(header: &BTreeMap<String, String>, results: &[MultiFlipResult], format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => to_json(&MultiFlipDoc { header, results }),
        ReportFormat::Csv => {
            let mut out = String::new();
            header_lines(&mut out, header);
            out.push_str("k,mae,count,flipped\n");
            for r in results {
                let _ = writeln!(out, "{},{},{},{}", r.k, fmt_sig(r.mae), r.count, r.flipped.join(";"));
            }
            out
        }
    }
}

/// Plane diagnostics as JSON or as a per-frame CSV followed by the
/// y-error level table.
pub fn write_plane_report(report: &PlaneReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => to_json(report),
        ReportFormat::Csv => {
            let mut out = String::new();
            header_lines(&mut out, &report.header);
            let _ = writeln!(out, "# frames={}", report.frames.len());
            let _ = writeln!(out, "# fallback_count={}", report.fallback_count);
            let _ = writeln!(out, "# y_mae={}", opt(report.y_mae));
            out.push_str("frame,n_points,fallback,a,b,c,k_h,b_h,y_mae,y_count,heatmap_dk,heatmap_db,degraded\n");
            for f in &report.frames {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                    f.frame,
                    f.n_points,
                    f.fallback,
                    fmt_sig(f.plane.a),
                    fmt_sig(f.plane.b),
                    fmt_sig(f.plane.c),
                    opt(f.horizon.map(|h| h.k_h)),
                    opt(f.horizon.map(|h| h.b_h)),
                    opt(f.y_mae),
                    f.y_count,
                    opt(f.heatmap_dk),
                    opt(f.heatmap_db),
                    f.degraded,
                );
            }
            out.push_str("\nlevel_lower,level_upper,frames,mean_y_mae\n");
            for r in &report.y_levels.rows {
                let upper = r.upper.map_or_else(|| "inf".to_string(), fmt_sig);
                let _ = writeln!(out, "{},{upper},{},{}", fmt_sig(r.lower), r.count, opt(r.mae));
            }
            out
        }
    }
}
