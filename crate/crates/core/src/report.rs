//! Rendering of study results: metrics and boundary CSVs, markdown tables
//! and SVG overlays of the fitted densities.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::experiment::{CellReport, Curves, MetricsReport, BOUNDARY_POINTS, ESTIMATORS, METRICS};

pub const METRICS_CSV: &str = "metrics.csv";
pub const BOUNDARY_CSV: &str = "boundary.csv";
pub const TABLES_MD: &str = "tables.md";
pub const REPORT_JSON: &str = "report.json";

const FOOTER: &str = "Exact values depend on seeds and discretization details and are not \
meant to reproduce published tables; acceptance is by trend: errors falling with n, the \
Bernstein versus kernel ordering and the boundary behaviour.";

fn check_nonempty(report: &MetricsReport) -> Result<()> {
    if report.cells.is_empty() {
        return Err(Error::Domain("report has no cells".into()));
    }
    if let Some(c) = report.cells.iter().find(|c| c.records.is_empty()) {
        return Err(Error::Domain(format!("cell {} n = {} has no replicates", c.density, c.n_subjects)));
    }
    Ok(())
}

fn csv_string(rows: impl FnOnce(&mut csv::Writer<Vec<u8>>) -> csv::Result<()>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    rows(&mut w).map_err(|e| Error::Domain(format!("csv: {e}")))?;
    let bytes = w.into_inner().map_err(|e| Error::Domain(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// `density,n_subjects,estimator,metric,mean,stderr,replicates`.
pub fn metrics_csv(report: &MetricsReport) -> Result<String> {
    check_nonempty(report)?;
    csv_string(|w| {
        w.write_record(["density", "n_subjects", "estimator", "metric", "mean", "stderr", "replicates"])?;
        for c in &report.cells {
            for est in ESTIMATORS {
                for met in METRICS {
                    let (mean, se) = c.summary(est, met);
                    w.write_record([
                        c.density.clone(),
                        c.n_subjects.to_string(),
                        est.to_string(),
                        met.to_string(),
                        mean.to_string(),
                        se.to_string(),
                        c.records.len().to_string(),
                    ])?;
                }
            }
        }
        Ok(())
    })
}

/// `density,n_subjects,x,f_true,f_bernstein,f_kde` with replicate means.
pub fn boundary_csv(report: &MetricsReport) -> Result<String> {
    check_nonempty(report)?;
    csv_string(|w| {
        w.write_record(["density", "n_subjects", "x", "f_true", "f_bernstein", "f_kde"])?;
        for c in &report.cells {
            let (b, k) = c.boundary_means();
            for (i, &x) in BOUNDARY_POINTS.iter().enumerate() {
                w.write_record([
                    c.density.clone(),
                    c.n_subjects.to_string(),
                    x.to_string(),
                    c.config.density.pdf(x).to_string(),
                    b[i].to_string(),
                    k[i].to_string(),
                ])?;
            }
        }
        Ok(())
    })
}

fn bold_min(a: f64, b: f64) -> (String, String) {
    let fa = format!("{a:.6}");
    let fb = format!("{b:.6}");
    if a < b {
        (format!("**{fa}**"), fb)
    } else if b < a {
        (fa, format!("**{fb}**"))
    } else {
        (fa, fb)
    }
}

/// Error table (one row per cell) and boundary table, in markdown.
pub fn markdown_tables(report: &MetricsReport) -> Result<String> {
    check_nonempty(report)?;
    let mut s = String::new();
    s.push_str("## Average errors\n\n");
    s.push_str("| density | n | ISE Bernstein | ISE kernel | MSE Bernstein | MSE kernel | MAE Bernstein | MAE kernel | replicates |\n");
    s.push_str("|---|---|---|---|---|---|---|---|---|\n");
    for c in &report.cells {
        let _ = write!(s, "| {} | {} ", c.density, c.n_subjects);
        for met in ["ise", "mse", "mae"] {
            let (b, k) = bold_min(c.summary("bernstein", met).0, c.summary("kde", met).0);
            let _ = write!(s, "| {b} | {k} ");
        }
        let _ = writeln!(s, "| {} |", c.records.len());
    }
    s.push_str("\n## Boundary values (replicate means)\n\n");
    s.push_str("| density | n | estimator | x = 0 | x = 0.01 | x = 0.99 | x = 1 |\n");
    s.push_str("|---|---|---|---|---|---|---|\n");
    for c in &report.cells {
        let (b, k) = c.boundary_means();
        let truth = BOUNDARY_POINTS.map(|x| c.config.density.pdf(x));
        for (label, v) in [("true", truth), ("Bernstein", b), ("kernel", k)] {
            let _ = writeln!(
                s,
                "| {} | {} | {label} | {:.6} | {:.6} | {:.6} | {:.6} |",
                c.density, c.n_subjects, v[0], v[1], v[2], v[3]
            );
        }
    }
    let _ = write!(s, "\n{FOOTER}\n");
    Ok(s)
}

fn polyline(xs: &[f64], ys: &[f64], sx: impl Fn(f64) -> f64, sy: impl Fn(f64) -> f64) -> String {
    let mut s = String::new();
    for (x, y) in xs.iter().zip(ys) {
        let _ = write!(s, "{:.2},{:.2} ", sx(*x), sy(*y));
    }
    s.trim_end().to_string()
}

/// Overlay of the true density and both estimates from the first replicate.
pub fn svg_plot(cell: &CellReport) -> Result<String> {
    let curves = cell
        .curves
        .as_ref()
        .ok_or_else(|| Error::Domain(format!("cell {} n = {} has no curves", cell.density, cell.n_subjects)))?;
    Ok(svg_curves(curves, &format!("{}, n = {}", cell.density, cell.n_subjects)))
}

/// Overlay plot of `curves`; an empty `truth` is left out.
pub fn svg_curves(curves: &Curves, title: &str) -> String {
    let (w, h, pad) = (640.0, 400.0, 48.0);
    let top = curves
        .truth
        .iter()
        .chain(&curves.bernstein)
        .chain(&curves.kde)
        .fold(0.0f64, |a, &b| a.max(b))
        .max(1e-9)
        * 1.05;
    let sx = |x: f64| pad + x * (w - 2.0 * pad);
    let sy = |y: f64| h - pad - y / top * (h - 2.0 * pad);
    let mut s = String::new();
    let _ = writeln!(s, r##"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"##);
    let _ = writeln!(s, r##"<rect width="100%" height="100%" fill="white"/>"##);
    let _ = writeln!(
        s,
        r##"<path d="M{:.2},{:.2} L{:.2},{:.2} L{:.2},{:.2}" fill="none" stroke="#444"/>"##,
        sx(0.0),
        sy(top),
        sx(0.0),
        sy(0.0),
        sx(1.0),
        sy(0.0)
    );
    for tick in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let _ = writeln!(
            s,
            r##"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="middle">{tick}</text>"##,
            sx(tick),
            h - pad + 16.0
        );
    }
    let _ = writeln!(
        s,
        r##"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end">{:.2}</text>"##,
        pad - 4.0,
        sy(top) + 4.0,
        top
    );
    for (ys, colour) in [(&curves.truth, "black"), (&curves.bernstein, "#d62728"), (&curves.kde, "#2ca02c")] {
        if ys.is_empty() {
            continue;
        }
        let _ = writeln!(
            s,
            r##"<polyline fill="none" stroke="{colour}" stroke-width="1.6" points="{}"/>"##,
            polyline(&curves.x, ys, sx, sy)
        );
    }
    for (i, (colour, label)) in [("black", "true density"), ("#d62728", "Bernstein"), ("#2ca02c", "kernel")]
        .iter()
        .enumerate()
    {
        let y = pad + 14.0 * i as f64;
        let _ = writeln!(
            s,
            r##"<line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{colour}" stroke-width="2"/><text x="{:.2}" y="{:.2}" font-size="11">{label}</text>"##,
            w - pad - 130.0,
            w - pad - 110.0,
            w - pad - 104.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        s,
        r##"<text x="{:.2}" y="20" font-size="13" text-anchor="middle">{title}</text>"##,
        w / 2.0
    );
    s.push_str("</svg>\n");
    s
}

fn svg_name(cell: &CellReport) -> String {
    let safe: String = cell
        .density
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '-' })
        .collect();
    format!("{safe}_n{}.svg", cell.n_subjects)
}

/// Output formats of [`emit_report`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Markdown,
    SvgPlots,
    Json,
}

/// Renders every requested format in memory first, then writes the files
/// into `dir`, so a rendering error leaves no partial output.
pub fn emit_report(report: &MetricsReport, formats: &[Format], dir: &Path) -> Result<Vec<PathBuf>> {
    check_nonempty(report)?;
    let mut files: Vec<(PathBuf, String)> = Vec::new();
    for f in formats {
        match f {
            Format::Csv => {
                files.push((dir.join(METRICS_CSV), metrics_csv(report)?));
                files.push((dir.join(BOUNDARY_CSV), boundary_csv(report)?));
            }
            Format::Markdown => files.push((dir.join(TABLES_MD), markdown_tables(report)?)),
            Format::SvgPlots => {
                for c in &report.cells {
                    files.push((dir.join(svg_name(c)), svg_plot(c)?));
                }
            }
            Format::Json => {
                let text = serde_json::to_string_pretty(report).map_err(|e| Error::Domain(e.to_string()))?;
                files.push((dir.join(REPORT_JSON), text));
            }
        }
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (path, text) in &files {
        std::fs::write(path, text).map_err(|e| Error::io(path, e))?;
    }
    Ok(files.into_iter().map(|(p, _)| p).collect())
}

/// Reads a report written with [`Format::Json`].
pub fn load_report(path: &Path) -> Result<MetricsReport> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e))
}
