use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{HarnessError, ResultTable};
use crate::metrics::aggregate;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExportFormat {
    Csv,
    Json,
}

/// `approach,week,seed,auc` with a header line. AUCs use the shortest
/// representation that parses back to the same `f64`.
pub fn results_csv(table: &ResultTable) -> String {
    let mut out = String::from("approach,week,seed,auc\n");
    for r in &table.rows {
        writeln!(out, "{},{},{},{}", r.approach, r.week, r.seed, r.auc).expect("string write");
    }
    out
}

fn write(path: &Path, body: impl AsRef<[u8]>) -> Result<(), HarnessError> {
    fs::write(path, body).map_err(|source| HarnessError::Io {
        path: path.to_owned(),
        source,
    })
}

pub fn export_results(table: &ResultTable, path: impl AsRef<Path>, format: ExportFormat) -> Result<(), HarnessError> {
    let path = path.as_ref();
    match format {
        ExportFormat::Csv => write(path, results_csv(table)),
        ExportFormat::Json => {
            let mut body = serde_json::to_string_pretty(table).map_err(|source| HarnessError::Json {
                path: path.to_owned(),
                source,
            })?;
            body.push('\n');
            write(path, body)
        }
    }
}

pub fn import_results_json(path: impl AsRef<Path>) -> Result<ResultTable, HarnessError> {
    let path = path.as_ref();
    let body = fs::read(path).map_err(|source| HarnessError::Io {
        path: path.to_owned(),
        source,
    })?;
    serde_json::from_slice(&body).map_err(|source| HarnessError::Json {
        path: path.to_owned(),
        source,
    })
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];
const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 60.0;

/// Line chart of per-week seed-mean AUC, one polyline per approach.
pub fn chart_svg(table: &ResultTable) -> String {
    let summary = aggregate(&table.rows);
    let points = summary.iter().flat_map(|s| s.weekly_means.iter());
    let (mut wmin, mut wmax) = (usize::MAX, 0usize);
    let (mut ymin, mut ymax) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(w, m) in points {
        wmin = wmin.min(w);
        wmax = wmax.max(w);
        ymin = ymin.min(m);
        ymax = ymax.max(m);
    }
    if wmin > wmax {
        (wmin, wmax, ymin, ymax) = (0, 1, 0.0, 1.0);
    }
    let ylo = ((ymin * 20.0).floor() / 20.0).clamp(0.0, 0.95);
    let yhi = ((ymax * 20.0).ceil() / 20.0).clamp(ylo + 0.05, 1.0);
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let span = (wmax - wmin).max(1) as f64;
    let x = |w: usize| LEFT + (w - wmin) as f64 / span * plot_w;
    let y = |v: f64| TOP + (yhi - v) / (yhi - ylo) * plot_h;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<line class="axis" x1="{LEFT}" y1="{b}" x2="{r}" y2="{b}" stroke="black"/>"#,
        b = TOP + plot_h,
        r = LEFT + plot_w
    );
    let _ = writeln!(
        s,
        r#"<line class="axis" x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{b}" stroke="black"/>"#,
        b = TOP + plot_h
    );
    let steps = ((yhi - ylo) / 0.05).round() as usize;
    for k in 0..=steps {
        let v = ylo + k as f64 * 0.05;
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{v:.2}</text>"#,
            LEFT - 6.0,
            y(v) + 4.0
        );
    }
    let every = (wmax - wmin) / 13 + 1;
    for w in (wmin..=wmax).step_by(every) {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{w}</text>"#,
            x(w),
            TOP + plot_h + 18.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text class="axis-label" x="{:.2}" y="{:.2}" text-anchor="middle">Training week</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 15.0
    );
    let _ = writeln!(
        s,
        r#"<text class="axis-label" x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">AUC on following week</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0
    );
    for (i, a) in summary.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = a
            .weekly_means
            .iter()
            .map(|&(w, m)| format!("{:.2},{:.2}", x(w), y(m)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline class="series" data-approach="{}" fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            a.approach,
            pts.join(" ")
        );
        let ly = TOP + 10.0 + i as f64 * 20.0;
        let lx = LEFT + plot_w + 15.0;
        let _ = writeln!(
            s,
            r#"<g class="legend"><line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{:.2}">{}</text></g>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            a.approach
        );
    }
    s.push_str("</svg>\n");
    s
}

pub fn render_chart(table: &ResultTable, path: impl AsRef<Path>) -> Result<(), HarnessError> {
    write(path.as_ref(), chart_svg(table))
}
