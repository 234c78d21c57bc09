//! Result files: CSV traces, a JSON results document and an SVG plot.
//!
//! Numbers are written with Rust's shortest round-trip formatting, so a
//! re-read CSV reproduces the in-memory values exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectra::{linear_to_db, NoiseSpectrumTrace, TraceKind};
use crate::specan::PsdEstimate;

pub const RESULTS_SCHEMA_VERSION: u32 = 1;
pub const CSV_HEADER: &str = "freq_hz,value_linear,value_db,kind,E";
pub const RESIDUAL_HEADER: &str = "freq_hz,simulated,published,expected,residual,kind,E";

/// One plotted series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    /// Trace label, e.g. `"ii"`.
    pub label: String,
    pub kind: TraceKind,
    #[serde(rename = "E")]
    pub excess_noise: Option<f64>,
    pub freqs_hz: Vec<f64>,
    pub values: Vec<f64>,
}

impl TraceRecord {
    pub fn from_analytic(label: impl Into<String>, t: &NoiseSpectrumTrace) -> Self {
        Self {
            label: label.into(),
            kind: t.kind,
            excess_noise: t.excess_noise(),
            freqs_hz: t.grid.values().to_vec(),
            values: t.values.clone(),
        }
    }

    pub fn from_estimate(
        label: impl Into<String>,
        kind: TraceKind,
        excess_noise: Option<f64>,
        est: &PsdEstimate,
    ) -> Self {
        Self {
            label: label.into(),
            kind,
            excess_noise,
            freqs_hz: est.freqs.clone(),
            values: est.psd.clone(),
        }
    }
}

/// Lower-case roman numeral, for trace labels.
pub fn roman(n: usize) -> String {
    const TABLE: [(usize, &str); 9] = [
        (100, "c"),
        (90, "xc"),
        (50, "l"),
        (40, "xl"),
        (10, "x"),
        (9, "ix"),
        (5, "v"),
        (4, "iv"),
        (1, "i"),
    ];
    let mut n = n;
    let mut s = String::new();
    for (v, r) in TABLE {
        while n >= v {
            s.push_str(r);
            n -= v;
        }
    }
    s
}

fn fmt_e(e: Option<f64>) -> String {
    e.map(|v| v.to_string()).unwrap_or_default()
}

pub fn traces_csv(traces: &[TraceRecord]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for t in traces {
        let e = fmt_e(t.excess_noise);
        for (f, v) in t.freqs_hz.iter().zip(&t.values) {
            writeln!(s, "{f},{v},{},{},{e}", linear_to_db(*v), t.kind).expect("string write");
        }
    }
    s
}

/// One CSV row, parsed.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub freq_hz: f64,
    pub value_linear: f64,
    pub value_db: f64,
    pub kind: String,
    pub excess_noise: Option<f64>,
}

pub fn parse_traces_csv(text: &str) -> Result<Vec<CsvRow>> {
    let mut lines = text.lines();
    if lines.next() != Some(CSV_HEADER) {
        return Err(Error::Configuration("unexpected CSV header".into()));
    }
    let num = |s: &str| {
        s.parse::<f64>()
            .map_err(|e| Error::Configuration(format!("bad number {s:?}: {e}")))
    };
    lines
        .filter(|l| !l.is_empty())
        .map(|l| {
            let cols: Vec<&str> = l.split(',').collect();
            if cols.len() != 5 {
                return Err(Error::Configuration(format!("bad CSV row {l:?}")));
            }
            Ok(CsvRow {
                freq_hz: num(cols[0])?,
                value_linear: num(cols[1])?,
                value_db: num(cols[2])?,
                kind: cols[3].to_string(),
                excess_noise: if cols[4].is_empty() {
                    None
                } else {
                    Some(num(cols[4])?)
                },
            })
        })
        .collect()
}

/// Simulated trace next to the published formula and to what the formula
/// predicts after the interferometer transfer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualRecord {
    pub kind: TraceKind,
    #[serde(rename = "E")]
    pub excess_noise: Option<f64>,
    pub freqs_hz: Vec<f64>,
    pub simulated: Vec<f64>,
    pub published: Vec<f64>,
    pub expected: Vec<f64>,
}

pub fn residuals_csv(records: &[ResidualRecord]) -> String {
    let mut s = String::from(RESIDUAL_HEADER);
    s.push('\n');
    for r in records {
        let e = fmt_e(r.excess_noise);
        for i in 0..r.freqs_hz.len() {
            let (sim, exp) = (r.simulated[i], r.expected[i]);
            writeln!(
                s,
                "{},{sim},{},{exp},{},{},{e}",
                r.freqs_hz[i],
                r.published[i],
                sim - exp,
                r.kind
            )
            .expect("string write");
        }
    }
    s
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// Static line plot, log frequency axis, SNL drawn at 1.
pub fn traces_svg(title: &str, traces: &[TraceRecord]) -> String {
    let (w, h) = (720.0, 440.0);
    let (ml, mr, mt, mb) = (70.0, 150.0, 40.0, 50.0);
    let (pw, ph) = (w - ml - mr, h - mt - mb);
    let finite = |v: &&f64| v.is_finite() && **v > 0.0;
    let fs: Vec<f64> = traces.iter().flat_map(|t| &t.freqs_hz).filter(finite).copied().collect();
    let vs: Vec<f64> = traces.iter().flat_map(|t| &t.values).filter(|v| v.is_finite()).copied().collect();
    let fmin = fs.iter().copied().fold(f64::INFINITY, f64::min);
    let fmax = fs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (lx0, lx1) = if fmin < fmax {
        (fmin.log10(), fmax.log10())
    } else {
        (fmin.log10() - 0.5, fmin.log10() + 0.5)
    };
    let vmin = vs.iter().copied().fold(1.0, f64::min);
    let vmax = vs.iter().copied().fold(1.0, f64::max);
    let pad = 0.05 * (vmax - vmin).max(1e-3);
    let (y0, y1) = (vmin - pad, vmax + pad);
    let px = |f: f64| ml + (f.log10() - lx0) / (lx1 - lx0) * pw;
    let py = |v: f64| mt + (y1 - v) / (y1 - y0) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, ml + pw / 2.0, xml_escape(title));
    let _ = writeln!(s, r#"<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
    for d in (lx0.ceil() as i32)..=(lx1.floor() as i32) {
        let x = px(10f64.powi(d));
        let _ = writeln!(s, r##"<line x1="{x:.2}" y1="{mt}" x2="{x:.2}" y2="{}" stroke="#ddd"/>"##, mt + ph);
        let _ = writeln!(s, r#"<text x="{x:.2}" y="{}" text-anchor="middle">1e{d}</text>"#, mt + ph + 16.0);
    }
    for i in 0..=5 {
        let v = y0 + (y1 - y0) * i as f64 / 5.0;
        let y = py(v);
        let _ = writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">{v:.3}</text>"#, ml - 6.0, y + 4.0);
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">frequency (Hz)</text>"#, ml + pw / 2.0, h - 10.0);
    let _ = writeln!(s, r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">noise / SNL</text>"#, mt + ph / 2.0, mt + ph / 2.0);
    let snl = py(1.0);
    let _ = writeln!(s, r#"<line x1="{ml}" y1="{snl:.2}" x2="{}" y2="{snl:.2}" stroke="black" stroke-dasharray="6 4"/>"#, ml + pw);
    for (i, t) in traces.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = t
            .freqs_hz
            .iter()
            .zip(&t.values)
            .filter(|(f, v)| **f > 0.0 && v.is_finite())
            .map(|(f, v)| format!("{:.2},{:.2}", px(*f), py(*v)))
            .collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{}"/>"#, pts.join(" "));
        let ly = mt + 14.0 + 18.0 * i as f64;
        let lx = ml + pw + 12.0;
        let _ = writeln!(s, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, lx + 18.0);
        let name = match t.excess_noise {
            Some(e) => format!("{} {} E={e}", t.label, t.kind),
            None => format!("{} {}", t.label, t.kind),
        };
        let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, lx + 24.0, ly + 4.0, xml_escape(&name));
    }
    s.push_str("</svg>\n");
    s
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Writes `contents` to `dir/name` and returns the relative name.
pub fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
    Ok(PathBuf::from(name))
}
