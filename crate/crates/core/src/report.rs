//! CSV and SVG renderings of experiment reports.
//!
//! Every CSV document starts with `# key=value` comment lines carrying the
//! seed, the crate version and the resolved configuration as JSON, followed
//! by a header row. Floats use Rust's shortest round-trip formatting, so
//! identical reports always render to identical bytes.

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::sim::multivariate::SELECTION_METHODS;
use crate::sim::{MultivariateReport, UnivariateReport};

pub const VERSION: &str = concat!("xsel ", env!("CARGO_PKG_VERSION"));

/// Ordered `key=value` pairs written as CSV comment lines.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Metadata {
    entries: Vec<(String, String)>,
}

impl Metadata {
    /// Seed, version and `config` serialised as compact JSON.
    pub fn for_run<C: Serialize>(seed: u64, config: &C) -> Result<Self> {
        let json = serde_json::to_string(config).map_err(|e| Error::Report(e.to_string()))?;
        Ok(Self::default()
            .with("seed", seed.to_string())
            .with("version", VERSION)
            .with("config", json))
    }

    pub fn with(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        let value: String = value.into();
        self.entries.push((key.into(), value.replace(['\n', '\r'], " ")));
        self
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    fn write_to(&self, out: &mut String) {
        for (k, v) in &self.entries {
            let _ = writeln!(out, "# {k}={v}");
        }
    }
}

/// A CSV document: metadata comments, a header row, then `rows`.
pub fn csv_document(meta: &Metadata, headers: &[&str], rows: &[Vec<String>]) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(headers).map_err(csv_err)?;
    for row in rows {
        if row.len() != headers.len() {
            return Err(Error::Report(format!(
                "row has {} fields, header has {}",
                row.len(),
                headers.len()
            )));
        }
        writer.write_record(row).map_err(csv_err)?;
    }
    let body = writer.into_inner().map_err(|e| Error::Report(e.to_string()))?;
    let mut out = String::new();
    meta.write_to(&mut out);
    out.push_str(&String::from_utf8(body).map_err(|e| Error::Report(e.to_string()))?);
    Ok(out)
}

fn csv_err(e: csv::Error) -> Error {
    Error::Report(e.to_string())
}

fn num(v: f64) -> String {
    format!("{v}")
}

/// `method,x,risk,se`, one row per method and grid point.
pub fn univariate_risk_csv(report: &UnivariateReport, meta: &Metadata) -> Result<String> {
    let mut rows = Vec::new();
    for (m, method) in report.methods.iter().enumerate() {
        for (j, x) in report.config.grid.iter().enumerate() {
            rows.push(vec![
                method.clone(),
                num(*x),
                num(report.risk[m][j]),
                num(report.risk_se[m][j]),
            ]);
        }
    }
    csv_document(meta, &["method", "x", "risk", "se"], &rows)
}

/// `method,x,mean_index,variance`; `x` is empty for methods that select once
/// per training set.
pub fn univariate_selections_csv(report: &UnivariateReport, meta: &Metadata) -> Result<String> {
    let rows: Vec<Vec<String>> = report
        .selections
        .iter()
        .map(|s| {
            vec![
                s.method.clone(),
                s.x.map(num).unwrap_or_default(),
                num(s.mean_index),
                num(s.variance),
            ]
        })
        .collect();
    csv_document(meta, &["method", "x", "mean_index", "variance"], &rows)
}

/// `method,weighted_risk`: grid risk averaged under standard-normal weights.
pub fn univariate_summary_csv(report: &UnivariateReport, meta: &Metadata) -> Result<String> {
    let rows: Vec<Vec<String>> = report
        .methods
        .iter()
        .zip(&report.weighted_risk)
        .map(|(m, r)| vec![m.clone(), num(*r)])
        .collect();
    csv_document(meta, &["method", "weighted_risk"], &rows)
}

/// One row per method, with a risk and SE column per training setting. The
/// `table` column separates selection methods from weighted ones.
pub fn multivariate_risk_csv(report: &MultivariateReport, meta: &Metadata) -> Result<String> {
    let labels: Vec<String> = report.settings.iter().map(|s| s.setting.label()).collect();
    let mut headers = vec!["method".to_string(), "table".to_string()];
    for l in &labels {
        headers.push(l.clone());
        headers.push(format!("{l}_se"));
    }
    let rows: Vec<Vec<String>> = report
        .methods
        .iter()
        .enumerate()
        .map(|(m, method)| {
            let table = if m < SELECTION_METHODS { "selection" } else { "weighting" };
            let mut row = vec![method.clone(), table.to_string()];
            for s in &report.settings {
                row.push(num(s.risk[m]));
                row.push(num(s.risk_se[m]));
            }
            row
        })
        .collect();
    let headers: Vec<&str> = headers.iter().map(String::as_str).collect();
    csv_document(meta, &headers, &rows)
}

/// `setting,method,mean_index` for the selection methods.
pub fn multivariate_selections_csv(report: &MultivariateReport, meta: &Metadata) -> Result<String> {
    let mut rows = Vec::new();
    for s in &report.settings {
        for (m, idx) in s.mean_selected_index.iter().enumerate() {
            rows.push(vec![s.setting.label(), report.methods[m].clone(), num(*idx)]);
        }
    }
    csv_document(meta, &["setting", "method", "mean_index"], &rows)
}

const PALETTE: [&str; 10] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
    "#7f7f7f", "#bcbd22",
];

/// Risk curves on a log-scale vertical axis, one polyline per method.
pub fn risk_svg(report: &UnivariateReport, title: &str) -> String {
    let (width, height) = (760.0, 500.0);
    let (left, right, top, bottom) = (70.0, 150.0, 40.0, 50.0);
    let plot_w = width - left - right;
    let plot_h = height - top - bottom;

    let grid = &report.config.grid;
    let x_lo = grid.iter().copied().fold(f64::INFINITY, f64::min);
    let x_hi = grid.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let x_span = if x_hi > x_lo { x_hi - x_lo } else { 1.0 };

    let positive = report.risk.iter().flatten().copied().filter(|v| *v > 0.0 && v.is_finite());
    let (lo, hi) = positive.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let (dec_lo, dec_hi) = if lo.is_finite() {
        (lo.log10().floor(), hi.log10().ceil().max(lo.log10().floor() + 1.0))
    } else {
        (-3.0, 0.0)
    };
    let floor = 10f64.powf(dec_lo);

    let sx = |x: f64| left + (x - x_lo) / x_span * plot_w;
    let sy = |v: f64| {
        let l = v.max(floor).log10();
        top + (dec_hi - l) / (dec_hi - dec_lo) * plot_h
    };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        left + plot_w / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<rect x="{left}" y="{top}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    );

    let mut d = dec_lo as i32;
    while d <= dec_hi as i32 {
        let y = sy(10f64.powi(d));
        let _ = writeln!(
            s,
            r##"<line x1="{left}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#dddddd"/>"##,
            left + plot_w
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">1e{d}</text>"#,
            left - 6.0,
            y + 4.0
        );
        d += 1;
    }
    let ticks = 8;
    for i in 0..=ticks {
        let xv = x_lo + x_span * i as f64 / ticks as f64;
        let x = sx(xv);
        let _ = writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/>"#,
            top + plot_h,
            top + plot_h + 5.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            top + plot_h + 18.0,
            trim(xv)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">x</text>"#,
        left + plot_w / 2.0,
        height - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">squared risk</text>"#,
        top + plot_h / 2.0,
        top + plot_h / 2.0
    );

    for (m, method) in report.methods.iter().enumerate() {
        let color = PALETTE[m % PALETTE.len()];
        let points: Vec<String> = grid
            .iter()
            .zip(&report.risk[m])
            .map(|(x, v)| format!("{:.2},{:.2}", sx(*x), sy(*v)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            points.join(" ")
        );
        let ly = top + 14.0 + 18.0 * m as f64;
        let lx = left + plot_w + 14.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/>"#,
            lx + 22.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}">{}</text>"#,
            lx + 28.0,
            ly + 4.0,
            escape(method)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn trim(v: f64) -> String {
    let s = format!("{v:.2}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.to_string() }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
