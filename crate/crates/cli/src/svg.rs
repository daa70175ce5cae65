//! Minimal SVG emitter: line plots, raster dots and heat maps.

use std::fmt::Write;

const W: f64 = 800.0;
const H: f64 = 400.0;
const PAD: f64 = 40.0;
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

fn bounds<'a>(pts: impl Iterator<Item = &'a (f64, f64)>) -> (f64, f64, f64, f64) {
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts.filter(|p| p.0.is_finite() && p.1.is_finite()) {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        return (0.0, 1.0, 0.0, 1.0);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    (x0, x1, y0, y1)
}

fn header(title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{PAD}" y="20" font-family="sans-serif" font-size="14">{}</text>"#,
        escape(title)
    );
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn axis_labels(s: &mut String, x0: f64, x1: f64, y0: f64, y1: f64) {
    let _ = writeln!(
        s,
        r#"<rect x="{PAD}" y="{PAD}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - 2.0 * PAD,
        H - 2.0 * PAD
    );
    let text = |s: &mut String, x: f64, y: f64, v: f64| {
        let _ = writeln!(
            s,
            r#"<text x="{x:.1}" y="{y:.1}" font-family="sans-serif" font-size="10">{v:.3}</text>"#
        );
    };
    text(s, PAD, H - PAD + 14.0, x0);
    text(s, W - PAD - 30.0, H - PAD + 14.0, x1);
    text(s, 2.0, H - PAD, y0);
    text(s, 2.0, PAD + 4.0, y1);
}

/// One polyline per named series, sharing axes.
pub fn line_plot(title: &str, series: &[(&str, Vec<(f64, f64)>)]) -> String {
    let (x0, x1, y0, y1) = bounds(series.iter().flat_map(|s| s.1.iter()));
    let sx = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD);
    let mut s = header(title);
    axis_labels(&mut s, x0, x1, y0, y1);
    for (k, (name, pts)) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let mut path = String::new();
        for &(x, y) in pts.iter().filter(|p| p.0.is_finite() && p.1.is_finite()) {
            let _ = write!(path, "{:.2},{:.2} ", sx(x), sy(y));
        }
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1" points="{}"/>"#,
            path.trim_end()
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="11" fill="{color}">{}</text>"#,
            W - PAD - 120.0,
            PAD + 14.0 * (k + 1) as f64,
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Spike raster: one dot per `(time, neuron)`; `inhibitory` neurons are red.
pub fn raster_plot(title: &str, dots: &[(f64, usize, bool)], t_max: f64, n_neurons: usize) -> String {
    let mut s = header(title);
    axis_labels(&mut s, 0.0, t_max, 0.0, n_neurons as f64);
    let sx = |x: f64| PAD + x / t_max.max(1e-9) * (W - 2.0 * PAD);
    let sy = |y: usize| H - PAD - y as f64 / n_neurons.max(1) as f64 * (H - 2.0 * PAD);
    for &(t, n, inh) in dots {
        let color = if inh { COLORS[1] } else { COLORS[0] };
        let _ = writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="0.8" fill="{color}"/>"#,
            sx(t),
            sy(n)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Heat map of `values[row][col]` on a log scale; non-finite cells are grey.
pub fn heat_map(title: &str, values: &[Vec<f64>], x_range: (f64, f64), y_range: (f64, f64)) -> String {
    let mut s = header(title);
    axis_labels(&mut s, x_range.0, x_range.1, y_range.0, y_range.1);
    let rows = values.len().max(1);
    let cols = values.first().map_or(1, |r| r.len().max(1));
    let logs: Vec<f64> = values
        .iter()
        .flatten()
        .filter(|v| v.is_finite() && **v > 0.0)
        .map(|v| v.ln())
        .collect();
    let lo = logs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let cw = (W - 2.0 * PAD) / cols as f64;
    let ch = (H - 2.0 * PAD) / rows as f64;
    for (r, row) in values.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            let fill = if v.is_finite() && v > 0.0 && hi > lo {
                let t = (v.ln() - lo) / (hi - lo);
                format!("rgb({},{},{})", (255.0 * t) as u8, 40, (255.0 * (1.0 - t)) as u8)
            } else if v.is_finite() {
                "rgb(0,40,255)".to_string()
            } else {
                "#999".to_string()
            };
            let _ = writeln!(
                s,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{fill}"/>"#,
                PAD + c as f64 * cw,
                H - PAD - (r + 1) as f64 * ch,
                cw + 0.1,
                ch + 0.1
            );
        }
    }
    s.push_str("</svg>\n");
    s
}
