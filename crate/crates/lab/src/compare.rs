//! Comparing two experiments on one metric: box statistics, a rank-sum
//! p-value, a text table and a self-contained SVG.

use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use evorl_core::stats::{self, BoxStats, RankSumTest};
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::experiment::ExperimentSummary;
use crate::train::{read_curve, CurveRow};

pub const QUARTILE_RULE: &str =
    "quartiles by linear interpolation at position (n-1)q of the sorted sample; \
whiskers at the most extreme points within 1.5 IQR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Metric {
    Return,
    Displacement,
    Entropy,
}

impl Metric {
    pub fn as_str(&self) -> &'static str {
        match self {
            Metric::Return => "return",
            Metric::Displacement => "displacement",
            Metric::Entropy => "entropy",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        [Metric::Return, Metric::Displacement, Metric::Entropy]
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| LabError::Invalid(format!("unknown metric `{s}`")))
    }
}

/// Per-agent values of `metric`: mean post-evaluation return or
/// displacement, or positional entropy.
pub fn metric_values(summary: &ExperimentSummary, metric: Metric) -> Result<Vec<f64>> {
    let values: Vec<f64> = summary
        .agents
        .iter()
        .map(|a| match metric {
            Metric::Return => a.mean_return,
            Metric::Displacement => a.mean_displacement,
            Metric::Entropy => a.entropy,
        })
        .collect();
    if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
        return Err(LabError::Invalid(format!(
            "metric `{metric}` is missing for {} on {}",
            summary.algo, summary.env.id
        )));
    }
    Ok(values)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub metric: Metric,
    pub quartile_rule: String,
    pub a_label: String,
    pub b_label: String,
    pub a_values: Vec<f64>,
    pub b_values: Vec<f64>,
    pub a: BoxStats,
    pub b: BoxStats,
    /// Two-sided rank-sum test of `a` against `b`.
    pub test: RankSumTest,
}

pub fn compare_values(
    metric: Metric,
    a_label: &str,
    a: &[f64],
    b_label: &str,
    b: &[f64],
) -> Result<ComparisonReport> {
    let c = stats::compare(a, b)?;
    Ok(ComparisonReport {
        metric,
        quartile_rule: QUARTILE_RULE.to_string(),
        a_label: a_label.to_string(),
        b_label: b_label.to_string(),
        a_values: a.to_vec(),
        b_values: b.to_vec(),
        a: c.a,
        b: c.b,
        test: c.test,
    })
}

pub fn compare_summaries(
    metric: Metric,
    a_label: &str,
    a: &ExperimentSummary,
    b_label: &str,
    b: &ExperimentSummary,
) -> Result<ComparisonReport> {
    compare_values(
        metric,
        a_label,
        &metric_values(a, metric)?,
        b_label,
        &metric_values(b, metric)?,
    )
}

/// Fixed-width table for terminals.
pub fn render_table(report: &ComparisonReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# metric: {}", report.metric);
    let _ = writeln!(out, "# {}", report.quartile_rule);
    let _ = writeln!(
        out,
        "{:<24} {:>4} {:>10} {:>10} {:>10} {:>10} {:>10} {:>10} {:>10}",
        "set", "n", "mean", "w_low", "q1", "median", "q3", "w_high", "iqr"
    );
    for (label, b) in [(&report.a_label, &report.a), (&report.b_label, &report.b)] {
        let _ = writeln!(
            out,
            "{:<24} {:>4} {:>10.4} {:>10.4} {:>10.4} {:>10.4} {:>10.4} {:>10.4} {:>10.4}",
            label,
            b.n,
            b.mean,
            b.whisker_low,
            b.q1,
            b.median,
            b.q3,
            b.whisker_high,
            b.iqr()
        );
    }
    let _ = writeln!(
        out,
        "rank-sum U = {:.1}, two-sided p = {:.4} ({})",
        report.test.u,
        report.test.p_value,
        if report.test.exact {
            "exact"
        } else {
            "normal approximation"
        }
    );
    out
}

/// Mean learning curve over the replications stored under `dir`, averaged
/// row by row up to the shortest curve.
pub fn mean_curve(dir: &Path) -> Result<Vec<(f64, f64)>> {
    let mut curves: Vec<Vec<CurveRow>> = Vec::new();
    for index in 0.. {
        let path = dir.join(format!("rep_{index:02}")).join("curve.csv");
        if !path.exists() {
            break;
        }
        let text = std::fs::read_to_string(&path).map_err(crate::error::io_err(&path))?;
        curves.push(read_curve(&text)?);
    }
    let len = curves.iter().map(Vec::len).min().unwrap_or(0);
    Ok((0..len)
        .map(|i| {
            let xs =
                curves.iter().map(|c| c[i].eval_steps as f64).sum::<f64>() / curves.len() as f64;
            let ys: Vec<f64> = curves
                .iter()
                .map(|c| c[i].center_or_eval_return)
                .filter(|v| v.is_finite())
                .collect();
            let y = if ys.is_empty() {
                f64::NAN
            } else {
                ys.iter().sum::<f64>() / ys.len() as f64
            };
            (xs, y)
        })
        .filter(|(_, y)| y.is_finite())
        .collect())
}

const COLORS: [&str; 2] = ["#1f77b4", "#d62728"];

/// Single-file SVG: box plots of both sets, plus mean learning curves when
/// given.
pub fn render_svg(
    report: &ComparisonReport,
    curves: Option<(&[(f64, f64)], &[(f64, f64)])>,
) -> String {
    let (box_w, curve_w, h) = (320.0, if curves.is_some() { 420.0 } else { 0.0 }, 300.0);
    let width = box_w + curve_w;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{h}" viewBox="0 0 {width} {h}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="{width}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="18" text-anchor="middle">{} (p = {:.4})</text>"#,
        box_w / 2.0,
        escape(report.metric.as_str()),
        report.test.p_value
    );

    let all = report.a_values.iter().chain(&report.b_values).copied();
    let (lo, hi) = padded_range(all);
    let (top, bottom) = (30.0, h - 40.0);
    let y = |v: f64| bottom - (v - lo) / (hi - lo) * (bottom - top);
    axis(&mut s, 50.0, top, bottom, lo, hi, &y);
    for (k, (label, b, values)) in [
        (&report.a_label, &report.a, &report.a_values),
        (&report.b_label, &report.b, &report.b_values),
    ]
    .into_iter()
    .enumerate()
    {
        let cx = 120.0 + 120.0 * k as f64;
        let c = COLORS[k];
        let _ = writeln!(
            s,
            r#"<line x1="{cx}" x2="{cx}" y1="{:.2}" y2="{:.2}" stroke="{c}"/>"#,
            y(b.whisker_low),
            y(b.whisker_high)
        );
        let _ = writeln!(
            s,
            r#"<rect x="{:.2}" y="{:.2}" width="50" height="{:.2}" fill="{c}" fill-opacity="0.25" stroke="{c}"/>"#,
            cx - 25.0,
            y(b.q3),
            (y(b.q1) - y(b.q3)).max(0.5)
        );
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" x2="{:.2}" y1="{:.2}" y2="{:.2}" stroke="{c}" stroke-width="2"/>"#,
            cx - 25.0,
            cx + 25.0,
            y(b.median),
            y(b.median)
        );
        for v in values
            .iter()
            .filter(|&&v| v < b.whisker_low || v > b.whisker_high)
        {
            let _ = writeln!(
                s,
                r#"<circle cx="{cx}" cy="{:.2}" r="2.5" fill="none" stroke="{c}"/>"#,
                y(*v)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{cx}" y="{}" text-anchor="middle">{}</text>"#,
            h - 20.0,
            escape(label)
        );
    }

    if let Some((ca, cb)) = curves {
        let x0 = box_w + 50.0;
        let x1 = width - 20.0;
        let points = ca.iter().chain(cb).copied();
        let (xlo, xhi) = padded_range(points.clone().map(|p| p.0));
        let (ylo, yhi) = padded_range(points.map(|p| p.1));
        let px = |v: f64| x0 + (v - xlo) / (xhi - xlo) * (x1 - x0);
        let py = |v: f64| bottom - (v - ylo) / (yhi - ylo) * (bottom - top);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="18" text-anchor="middle">mean learning curve</text>"#,
            (x0 + x1) / 2.0
        );
        axis(&mut s, x0, top, bottom, ylo, yhi, &py);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">steps (0 to {:.3e})</text>"#,
            (x0 + x1) / 2.0,
            h - 20.0,
            xhi
        );
        for (k, curve) in [ca, cb].into_iter().enumerate() {
            if curve.is_empty() {
                continue;
            }
            let path: Vec<String> = curve
                .iter()
                .map(|&(x, v)| format!("{:.2},{:.2}", px(x), py(v)))
                .collect();
            let _ = writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.5"/>"#,
                path.join(" "),
                COLORS[k]
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

fn axis(s: &mut String, x: f64, top: f64, bottom: f64, lo: f64, hi: f64, y: &dyn Fn(f64) -> f64) {
    let _ = writeln!(
        s,
        r#"<line x1="{x}" x2="{x}" y1="{top}" y2="{bottom}" stroke="black"/>"#
    );
    for i in 0..=4 {
        let v = lo + (hi - lo) * i as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#,
            x - 4.0,
            y(v) + 4.0,
            tick(v)
        );
    }
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-2) {
        format!("{v:.1e}")
    } else {
        format!("{v:.2}")
    }
}

fn padded_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    let pad = if hi > lo {
        0.05 * (hi - lo)
    } else {
        0.5_f64.max(lo.abs() * 0.05)
    };
    (lo - pad, hi + pad)
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}
