//! Self-contained SVG line plot of averaged L1 distance against time.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::experiments::ExperimentResult;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 72.0;
const RIGHT: f64 = 24.0;
const TOP: f64 = 24.0;
const BOTTOM: f64 = 56.0;
const TICKS: usize = 5;
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

/// Renders the `l1` series of every generator as one `<polyline>` each.
pub fn render_convergence_svg(res: &ExperimentResult, log_y: bool) -> Result<String> {
    let series: Vec<_> = res.mean_series.iter().filter(|s| s.observer == "l1").collect();
    if series.is_empty() {
        return Err(Error::Config("plot needs an l1 observer".into()));
    }
    let (t0, t1) = match (res.times.first(), res.times.last()) {
        (Some(&a), Some(&b)) if b > a => (a, b),
        (Some(&a), _) => (a, a + 1.0),
        _ => (0.0, 1.0),
    };

    let transform = |v: f64| if log_y { v.log10() } else { v };
    let finite: Vec<f64> = series
        .iter()
        .flat_map(|s| s.values.iter().copied())
        .filter(|&v| if log_y { v > 0.0 } else { v.is_finite() })
        .map(transform)
        .filter(|v| v.is_finite())
        .collect();
    let (mut lo, mut hi) = if log_y {
        let lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if finite.is_empty() {
            (-1.0, 0.0)
        } else {
            (lo.floor(), hi.ceil())
        }
    } else {
        (0.0, finite.iter().copied().fold(0.0, f64::max))
    };
    if !(hi > lo) {
        hi = lo + 1.0;
    }
    if !log_y {
        lo = 0.0;
        hi *= 1.05;
    }

    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let x_of = |t: f64| LEFT + (t - t0) / (t1 - t0) * plot_w;
    let y_of = |v: f64| {
        let y = if log_y && !(v > 0.0) { lo } else { transform(v).clamp(lo, hi) };
        TOP + plot_h - (y - lo) / (hi - lo) * plot_h
    };

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let (x_axis_y, y_axis_x) = (TOP + plot_h, LEFT);
    let _ = writeln!(
        svg,
        r#"<line x1="{LEFT}" y1="{x_axis_y}" x2="{}" y2="{x_axis_y}" stroke="black"/>"#,
        LEFT + plot_w
    );
    let _ = writeln!(
        svg,
        r#"<line x1="{y_axis_x}" y1="{TOP}" x2="{y_axis_x}" y2="{x_axis_y}" stroke="black"/>"#
    );
    for k in 0..=TICKS {
        let frac = k as f64 / TICKS as f64;
        let t = t0 + frac * (t1 - t0);
        let x = x_of(t);
        let _ = writeln!(
            svg,
            r#"<line x1="{x:.2}" y1="{x_axis_y}" x2="{x:.2}" y2="{}" stroke="black"/>"#,
            x_axis_y + 5.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"#,
            x_axis_y + 18.0,
            tick_label(t)
        );
        let yv = lo + frac * (hi - lo);
        let y = TOP + plot_h - frac * plot_h;
        let label = if log_y { format!("1e{}", yv.round()) } else { tick_label(yv) };
        let _ = writeln!(
            svg,
            r#"<line x1="{}" y1="{y:.2}" x2="{y_axis_x}" y2="{y:.2}" stroke="black"/>"#,
            y_axis_x - 5.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{:.2}" text-anchor="end">{label}</text>"#,
            y_axis_x - 8.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{}" text-anchor="middle">time</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 14.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">L1 distance</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0
    );

    for (idx, s) in series.iter().enumerate() {
        let color = COLORS[idx % COLORS.len()];
        let mut points = String::new();
        for (&t, &v) in res.times.iter().zip(&s.values) {
            let _ = write!(points, "{:.2},{:.2} ", x_of(t), y_of(v));
        }
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            points.trim_end()
        );
        let ly = TOP + 14.0 + 16.0 * idx as f64;
        let lx = LEFT + plot_w - 110.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="1.5"/>"#,
            lx + 20.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}">{}</text>"#,
            lx + 26.0,
            ly + 4.0,
            s.generator
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn tick_label(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

pub fn write_convergence_plot(res: &ExperimentResult, path: &Path, log_y: bool) -> Result<()> {
    let svg = render_convergence_svg(res, log_y)?;
    std::fs::write(path, svg).map_err(|e| Error::io(path, e))
}
