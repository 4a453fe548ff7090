//! Self-contained SVG chart of mean macro-F1 against ensemble size.

use std::fmt::Write as _;

use serde::Serialize;

use crate::bootstrap::SummaryRow;

#[derive(Clone, Debug, Serialize)]
pub struct Series {
    pub name: String,
    pub rows: Vec<SummaryRow>,
}

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 55.0;
const COLORS: &[&str] = &["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// A "nice" tick step giving about `target` ticks over `span`.
fn tick_step(span: f64, target: f64) -> f64 {
    let raw = span / target;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let nice = if norm < 1.5 {
        1.0
    } else if norm < 3.0 {
        2.0
    } else if norm < 7.0 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

/// Renders one line per series and a ±1 std band around series `band`.
/// The input data is embedded as JSON in the `<metadata>` element.
pub fn render_svg(series: &[Series], band: Option<usize>, title: &str) -> String {
    let points = series.iter().flat_map(|s| &s.rows);
    let (mut x_min, mut x_max) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y_min, mut y_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for r in points {
        x_min = x_min.min(r.size as f64);
        x_max = x_max.max(r.size as f64);
        y_min = y_min.min(r.mean_macro_f1);
        y_max = y_max.max(r.mean_macro_f1);
    }
    if let Some(b) = band.and_then(|b| series.get(b)) {
        for r in &b.rows {
            y_min = y_min.min(r.mean_macro_f1 - r.std_macro_f1);
            y_max = y_max.max(r.mean_macro_f1 + r.std_macro_f1);
        }
    }
    if !x_min.is_finite() {
        (x_min, x_max, y_min, y_max) = (0.0, 1.0, 0.0, 1.0);
    }
    if x_max == x_min {
        x_max = x_min + 1.0;
    }
    if y_max - y_min < 1e-6 {
        y_min -= 0.005;
        y_max += 0.005;
    }
    let pad = (y_max - y_min) * 0.05;
    let (y_min, y_max) = (y_min - pad, y_max + pad);

    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x_min) / (x_max - x_min) * plot_w;
    let sy = |y: f64| TOP + (y_max - y) / (y_max - y_min) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let data = serde_json::to_string(series).unwrap_or_default();
    let _ = writeln!(svg, "<metadata>{}</metadata>", escape(&data));
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="18" text-anchor="middle" font-size="14">{}</text>"#,
        LEFT + plot_w / 2.0,
        escape(title)
    );

    // axes and ticks
    let _ = writeln!(
        svg,
        r#"<g stroke="black" fill="none"><line x1="{LEFT}" y1="{:.1}" x2="{:.1}" y2="{:.1}"/><line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{:.1}"/></g>"#,
        TOP + plot_h,
        LEFT + plot_w,
        TOP + plot_h,
        TOP + plot_h
    );
    let xs = tick_step(x_max - x_min, 8.0);
    let mut x = (x_min / xs).ceil() * xs;
    while x <= x_max + 1e-9 {
        let px = sx(x);
        let _ = writeln!(
            svg,
            r##"<line x1="{px:.1}" y1="{:.1}" x2="{px:.1}" y2="{:.1}" stroke="black"/><text x="{px:.1}" y="{:.1}" text-anchor="middle">{}</text>"##,
            TOP + plot_h,
            TOP + plot_h + 5.0,
            TOP + plot_h + 19.0,
            x
        );
        x += xs;
    }
    let ys = tick_step(y_max - y_min, 6.0);
    let decimals = (-ys.log10().floor()).max(0.0) as usize;
    let mut y = (y_min / ys).ceil() * ys;
    while y <= y_max + 1e-12 {
        let py = sy(y);
        let _ = writeln!(
            svg,
            r##"<line x1="{:.1}" y1="{py:.1}" x2="{LEFT}" y2="{py:.1}" stroke="black"/><line x1="{LEFT}" y1="{py:.1}" x2="{:.1}" y2="{py:.1}" stroke="#dddddd"/><text x="{:.1}" y="{:.1}" text-anchor="end">{:.*}</text>"##,
            LEFT - 5.0,
            LEFT + plot_w,
            LEFT - 8.0,
            py + 4.0,
            decimals,
            y
        );
        y += ys;
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">ensemble size</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 12.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">mean macro-F1</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0
    );

    if let Some(b) = band.and_then(|b| series.get(b).map(|s| (b, s))) {
        let (idx, s) = b;
        let upper = s.rows.iter().map(|r| (sx(r.size as f64), sy(r.mean_macro_f1 + r.std_macro_f1)));
        let lower = s.rows.iter().rev().map(|r| (sx(r.size as f64), sy(r.mean_macro_f1 - r.std_macro_f1)));
        let pts: Vec<String> = upper.chain(lower).map(|(x, y)| format!("{x:.1},{y:.1}")).collect();
        let _ = writeln!(
            svg,
            r#"<polygon class="std-band" points="{}" fill="{}" fill-opacity="0.2" stroke="none"/>"#,
            pts.join(" "),
            COLORS[idx % COLORS.len()]
        );
    }

    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<String> = s
            .rows
            .iter()
            .map(|r| format!("{:.1},{:.1}", sx(r.size as f64), sy(r.mean_macro_f1)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline class="mean-line" data-series="{}" points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            escape(&s.name),
            pts.join(" ")
        );
        let ly = TOP + 10.0 + i as f64 * 20.0;
        let lx = LEFT + plot_w + 15.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            escape(&s.name)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(means: &[f64]) -> Vec<SummaryRow> {
        means
            .iter()
            .enumerate()
            .map(|(i, &m)| SummaryRow {
                size: i + 1,
                mean_macro_f1: m,
                std_macro_f1: 0.01 / (i + 1) as f64,
                n_samples: 1000,
            })
            .collect()
    }

    #[test]
    fn one_line_per_series_and_one_band() {
        let series = vec![
            Series { name: "GBERT/GELECTRA".into(), rows: rows(&[0.70, 0.72, 0.74, 0.75]) },
            Series { name: "GELECTRA".into(), rows: rows(&[0.69, 0.72, 0.74, 0.76]) },
        ];
        let svg = render_svg(&series, Some(0), "ensemble size");
        assert_eq!(svg.matches("class=\"mean-line\"").count(), 2);
        assert_eq!(svg.matches("class=\"std-band\"").count(), 1);
        assert!(svg.contains("<metadata>"));
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert_eq!(svg, render_svg(&series, Some(0), "ensemble size"));
    }

    #[test]
    fn degenerate_inputs_still_render() {
        let svg = render_svg(&[], None, "empty");
        assert!(svg.ends_with("</svg>\n"));
        let flat = vec![Series { name: "x".into(), rows: rows(&[0.5]) }];
        assert!(render_svg(&flat, Some(0), "one point").contains("mean-line"));
    }

    #[test]
    fn nice_ticks() {
        assert_eq!(tick_step(10.0, 5.0), 2.0);
        assert_eq!(tick_step(200.0, 8.0), 20.0);
        assert!((tick_step(0.05, 6.0) - 0.01).abs() < 1e-12);
    }
}
