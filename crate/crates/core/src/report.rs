//! Report writers: pretty JSON, a CSV summary with one row per check, and a
//! self-contained SVG scatter of the per-sample ratios.

use crate::verify::{Band, Report};
use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};

pub fn to_json(report: &Report) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("reports serialize");
    s.push('\n');
    s
}

fn csv_num(x: Option<f64>) -> String {
    match x {
        None => String::new(),
        Some(v) if v.is_nan() => "nan".into(),
        Some(v) if v.is_infinite() => if v > 0.0 { "inf" } else { "-inf" }.into(),
        Some(v) => format!("{v}"),
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub const CSV_HEADER: &str =
    "case_id,check,n_samples,n_skipped,band_lower,band_upper,rel_slack,worst_ratio,min_ratio,max_ratio,n_violations,verdict";

/// One row per check of every report.
pub fn summary_csv(reports: &[Report]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in reports {
        let verdict = serde_json::to_value(r.verdict).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
        for c in &r.checks {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                r.case_id,
                csv_field(&c.name),
                c.n_samples,
                c.n_skipped,
                csv_num(Some(c.band.lower)),
                csv_num(Some(c.band.upper)),
                c.band.rel_slack,
                csv_num(c.worst_ratio),
                csv_num(c.min_ratio),
                csv_num(c.max_ratio),
                c.n_violations,
                verdict
            );
        }
    }
    out
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Scatter of `(x, ratio)` with the band drawn as horizontal lines. The y
/// axis is logarithmic when all ratios are positive and span more than two
/// decades.
pub fn scatter_svg(title: &str, points: &[[f64; 2]], band: Option<Band>) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const M: f64 = 50.0;
    let pts: Vec<[f64; 2]> = points.iter().copied().filter(|p| p[0].is_finite() && p[1].is_finite()).collect();
    let mut ys: Vec<f64> = pts.iter().map(|p| p[1]).collect();
    if let Some(b) = band {
        ys.extend([b.lower, b.upper].into_iter().filter(|v| v.is_finite()));
    }
    let (mut y0, mut y1) = ys.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &y| (a.min(y), b.max(y)));
    let log_y = y0 > 0.0 && y1 / y0 > 100.0;
    let ty = |y: f64| if log_y { y.log10() } else { y };
    if !y0.is_finite() {
        (y0, y1) = (0.0, 1.0);
    }
    let (mut a, mut b) = (ty(y0), ty(y1));
    if b - a < 1e-12 {
        a -= 0.5;
        b += 0.5;
    }
    let (x0, mut x1) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p[0]), b.max(p[0])));
    let x0 = if x0.is_finite() { x0 } else { 0.0 };
    if !(x1 > x0) {
        x1 = x0 + 1.0;
    }
    let px = |x: f64| M + (x - x0) / (x1 - x0) * (W - 2.0 * M);
    let py = |y: f64| H - M - (ty(y) - a) / (b - a) * (H - 2.0 * M);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{M}" y="24" font-family="sans-serif" font-size="14">{}</text>"#, esc(title));
    let _ = writeln!(
        s,
        r#"<rect x="{M}" y="{M}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - 2.0 * M,
        H - 2.0 * M
    );
    let label = |v: f64| if log_y { format!("{:.3e}", v) } else { format!("{:.4}", v) };
    let _ = writeln!(s, r#"<text x="4" y="{:.1}" font-family="sans-serif" font-size="10">{}</text>"#, py(y0) + 4.0, label(y0));
    let _ = writeln!(s, r#"<text x="4" y="{:.1}" font-family="sans-serif" font-size="10">{}</text>"#, py(y1) + 4.0, label(y1));
    if let Some(bd) = band {
        for v in [bd.lower, bd.upper] {
            if v.is_finite() && (!log_y || v > 0.0) {
                let y = py(v);
                let _ = writeln!(s, r##"<line x1="{M}" x2="{}" y1="{y:.2}" y2="{y:.2}" stroke="#c33" stroke-dasharray="4 3"/>"##, W - M);
            }
        }
    }
    for p in &pts {
        let _ = writeln!(s, r##"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="#236"/>"##, px(p[0]), py(p[1]));
    }
    s.push_str("</svg>\n");
    s
}

/// Writes `<case>.json`, `<case>.csv` and `<case>.svg` into `dir` and
/// records the file names in `report.artifacts`.
pub fn write_report(dir: &Path, report: &mut Report) -> io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let stem = report.case_id.as_str();
    let names = [format!("{stem}.json"), format!("{stem}.csv"), format!("{stem}.svg")];
    report.artifacts = names.to_vec();
    let (title, points, band) = match report.checks.first() {
        Some(c) => (format!("{stem}: {}", c.name), c.points.clone(), Some(c.band)),
        None => (stem.to_string(), Vec::new(), None),
    };
    let paths: Vec<PathBuf> = names.iter().map(|n| dir.join(n)).collect();
    std::fs::write(&paths[0], to_json(report))?;
    std::fs::write(&paths[1], summary_csv(std::slice::from_ref(report)))?;
    std::fs::write(&paths[2], scatter_svg(&title, &points, band))?;
    Ok(paths)
}

/// Writes every report plus `summary.csv`.
pub fn write_all(dir: &Path, reports: &mut [Report]) -> io::Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for r in reports.iter_mut() {
        out.extend(write_report(dir, r)?);
    }
    let p = dir.join("summary.csv");
    std::fs::write(&p, summary_csv(reports))?;
    out.push(p);
    Ok(out)
}
