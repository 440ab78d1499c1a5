//! CSV export and a minimal built-in SVG plotter (polylines, axes, legend).

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::config::XAxis;
use crate::harness::{episode_boundaries, AggregateResult};

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("writing {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Schema: one row per round per configuration. Floats use Rust's shortest
/// round-trip formatting, so re-parsing reproduces the values exactly.
pub const CSV_HEADER: &str =
    "config_id,round,mean_cum_regret,stderr,lambda2,spectral_gap,n_agents,topology";

pub fn csv_string(results: &[AggregateResult]) -> String {
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    for agg in results {
        for (idx, (m, e)) in agg.mean.iter().zip(agg.stderr.iter()).enumerate() {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                agg.config_id,
                idx + 1,
                m,
                e,
                agg.lambda2,
                agg.spectral_gap,
                agg.n_agents,
                agg.topology_label
            );
        }
    }
    out
}

pub fn export_csv(results: &[AggregateResult], path: &Path) -> Result<(), ExportError> {
    std::fs::write(path, csv_string(results)).map_err(|source| ExportError::Io {
        path: path.to_path_buf(),
        source,
    })
}

const WIDTH: f64 = 880.0;
const HEIGHT: f64 = 560.0;
const MARGIN_LEFT: f64 = 84.0;
const MARGIN_RIGHT: f64 = 220.0;
const MARGIN_TOP: f64 = 36.0;
const MARGIN_BOTTOM: f64 = 64.0;
/// At most this many vertices per polyline; long trajectories are strided.
const MAX_POINTS: usize = 1024;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

/// One data polyline per configuration, in input order, over labelled axes.
pub fn svg_string(results: &[AggregateResult], x_axis: XAxis) -> String {
    // (x, y) series per config.
    let series: Vec<(String, Vec<(f64, f64)>)> = results
        .iter()
        .map(|agg| {
            let points: Vec<(f64, f64)> = match x_axis {
                XAxis::Rounds => stride(agg.mean.len())
                    .map(|t| ((t + 1) as f64, agg.mean[t]))
                    .collect(),
                XAxis::Episodes => episode_boundaries(agg.n_agents, agg.lambda2, agg.horizon)
                    .iter()
                    .enumerate()
                    .map(|(s, &t)| ((s + 1) as f64, agg.mean[t - 1]))
                    .collect(),
            };
            let label = format!(
                "{} (N={}, gap={:.3})",
                agg.topology_label, agg.n_agents, agg.spectral_gap
            );
            (label, points)
        })
        .collect();

    let x_max = series
        .iter()
        .flat_map(|(_, pts)| pts.iter().map(|p| p.0))
        .fold(1.0_f64, f64::max);
    let y_max = series
        .iter()
        .flat_map(|(_, pts)| pts.iter().map(|p| p.1))
        .fold(f64::NEG_INFINITY, f64::max)
        .max(1e-9)
        * 1.05;

    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let sx = |x: f64| MARGIN_LEFT + x / x_max * plot_w;
    let sy = |y: f64| MARGIN_TOP + plot_h - (y.max(0.0) / y_max) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" \
         font-family=\"sans-serif\" font-size=\"13\">"
    );
    let _ = writeln!(
        svg,
        "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>"
    );

    // Axes.
    let x0 = MARGIN_LEFT;
    let y0 = MARGIN_TOP + plot_h;
    let _ = writeln!(
        svg,
        "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{}\" y2=\"{y0}\" stroke=\"black\"/>",
        MARGIN_LEFT + plot_w
    );
    let _ = writeln!(
        svg,
        "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x0}\" y2=\"{MARGIN_TOP}\" stroke=\"black\"/>"
    );
    for k in 0..=5 {
        let fx = k as f64 / 5.0;
        let xv = fx * x_max;
        let px = sx(xv);
        let _ = writeln!(
            svg,
            "<line x1=\"{px}\" y1=\"{y0}\" x2=\"{px}\" y2=\"{}\" stroke=\"black\"/>",
            y0 + 5.0
        );
        let _ = writeln!(
            svg,
            "<text x=\"{px}\" y=\"{}\" text-anchor=\"middle\">{}</text>",
            y0 + 22.0,
            format_tick(xv)
        );
        let yv = fx * y_max;
        let py = sy(yv);
        let _ = writeln!(
            svg,
            "<line x1=\"{}\" y1=\"{py}\" x2=\"{x0}\" y2=\"{py}\" stroke=\"black\"/>",
            x0 - 5.0
        );
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>",
            x0 - 9.0,
            py + 4.0,
            format_tick(yv)
        );
    }
    let x_label = match x_axis {
        XAxis::Rounds => "round",
        XAxis::Episodes => "episode",
    };
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{x_label}</text>",
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 18.0
    );
    let _ = writeln!(
        svg,
        "<text x=\"22\" y=\"{}\" text-anchor=\"middle\" \
         transform=\"rotate(-90 22 {})\">mean cumulative regret</text>",
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0
    );

    // Data and legend.
    for (idx, (label, points)) in series.iter().enumerate() {
        let color = PALETTE[idx % PALETTE.len()];
        let mut coords = String::new();
        for (x, y) in points {
            let _ = write!(coords, "{:.2},{:.2} ", sx(*x), sy(*y));
        }
        let _ = writeln!(
            svg,
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.6\" \
             points=\"{}\"/>",
            coords.trim_end()
        );
        let ly = MARGIN_TOP + 14.0 + idx as f64 * 20.0;
        let lx = MARGIN_LEFT + plot_w + 16.0;
        let _ = writeln!(
            svg,
            "<rect x=\"{lx}\" y=\"{}\" width=\"14\" height=\"4\" fill=\"{color}\"/>",
            ly - 4.0
        );
        let _ = writeln!(svg, "<text x=\"{}\" y=\"{ly}\">{label}</text>", lx + 20.0);
    }
    svg.push_str("</svg>\n");
    svg
}

fn stride(len: usize) -> impl Iterator<Item = usize> {
    let step = len.div_ceil(MAX_POINTS).max(1);
    (0..len).filter(move |t| t % step == 0 || *t + 1 == len)
}

fn format_tick(v: f64) -> String {
    if v == 0.0 {
        "0".to_string()
    } else if v.abs() >= 10_000.0 || v.abs() < 0.01 {
        format!("{v:.1e}")
    } else if v.abs() >= 10.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

pub fn export_plot(
    results: &[AggregateResult],
    path: &Path,
    x_axis: XAxis,
) -> Result<(), ExportError> {
    std::fs::write(path, svg_string(results, x_axis)).map_err(|source| ExportError::Io {
        path: path.to_path_buf(),
        source,
    })
}
