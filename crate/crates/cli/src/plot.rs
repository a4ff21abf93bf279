//! Minimal SVG line and scatter plots. Output depends only on the data, so
//! identical inputs give identical files.

use std::fmt::Write;

const WIDTH: f64 = 900.0;
const HEIGHT: f64 = 420.0;
const MARGIN_LEFT: f64 = 80.0;
const MARGIN_RIGHT: f64 = 170.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 55.0;
const TICKS: usize = 5;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Style {
    Line,
    Points,
}

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub style: Style,
}

impl Series {
    pub fn line(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Series {
            label: label.into(),
            points,
            style: Style::Line,
        }
    }

    pub fn points(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Series {
            label: label.into(),
            points,
            style: Style::Points,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Data range padded so flat series still get a visible band.
fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
            (a.min(v), b.max(v))
        });
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 * (1.0 + lo.abs()) {
        let pad = 0.5 * (1.0 + lo.abs()) * 0.1;
        return (lo - pad, hi + pad);
    }
    (lo, hi)
}

fn tick_label(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

impl Plot {
    pub fn new(
        title: impl Into<String>,
        x_label: impl Into<String>,
        y_label: impl Into<String>,
    ) -> Self {
        Plot {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            series: Vec::new(),
        }
    }

    pub fn with(mut self, s: Series) -> Self {
        self.series.push(s);
        self
    }

    pub fn to_svg(&self) -> String {
        let all = || self.series.iter().flat_map(|s| s.points.iter());
        let (x0, x1) = range(all().map(|p| p.0));
        let (y0, y1) = range(all().map(|p| p.1));
        let pw = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
        let ph = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
        let sx = |x: f64| MARGIN_LEFT + (x - x0) / (x1 - x0) * pw;
        let sy = |y: f64| MARGIN_TOP + (1.0 - (y - y0) / (y1 - y0)) * ph;

        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            out,
            r#"<text x="{}" y="22" font-size="15" text-anchor="middle">{}</text>"#,
            MARGIN_LEFT + pw / 2.0,
            escape(&self.title)
        );
        let _ = writeln!(
            out,
            r##"<rect x="{MARGIN_LEFT}" y="{MARGIN_TOP}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>"##
        );
        for k in 0..=TICKS {
            let f = k as f64 / TICKS as f64;
            let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
            let (px, py) = (sx(xv), sy(yv));
            let _ = writeln!(
                out,
                r##"<line x1="{px:.2}" y1="{MARGIN_TOP}" x2="{px:.2}" y2="{:.2}" stroke="#ddd"/>"##,
                MARGIN_TOP + ph
            );
            let _ = writeln!(
                out,
                r#"<text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
                MARGIN_TOP + ph + 18.0,
                tick_label(xv)
            );
            let _ = writeln!(
                out,
                r##"<line x1="{MARGIN_LEFT}" y1="{py:.2}" x2="{:.2}" y2="{py:.2}" stroke="#ddd"/>"##,
                MARGIN_LEFT + pw
            );
            let _ = writeln!(
                out,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
                MARGIN_LEFT - 6.0,
                py + 4.0,
                tick_label(yv)
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            MARGIN_LEFT + pw / 2.0,
            HEIGHT - 12.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            out,
            r#"<text transform="translate(18 {:.2}) rotate(-90)" text-anchor="middle">{}</text>"#,
            MARGIN_TOP + ph / 2.0,
            escape(&self.y_label)
        );
        for (k, s) in self.series.iter().enumerate() {
            let colour = PALETTE[k % PALETTE.len()];
            let pts: Vec<(f64, f64)> = s
                .points
                .iter()
                .filter(|p| p.0.is_finite() && p.1.is_finite())
                .map(|&(x, y)| (sx(x), sy(y)))
                .collect();
            match s.style {
                Style::Line => {
                    let mut d = String::new();
                    for (i, (x, y)) in pts.iter().enumerate() {
                        let _ = write!(d, "{}{x:.2},{y:.2}", if i == 0 { "M" } else { " L" });
                    }
                    let _ = writeln!(
                        out,
                        r#"<path d="{d}" fill="none" stroke="{colour}" stroke-width="1.5"/>"#
                    );
                }
                Style::Points => {
                    for (x, y) in &pts {
                        let _ = writeln!(
                            out,
                            r#"<circle cx="{x:.2}" cy="{y:.2}" r="2" fill="{colour}" fill-opacity="0.6"/>"#
                        );
                    }
                }
            }
            let ly = MARGIN_TOP + 14.0 + 18.0 * k as f64;
            let lx = MARGIN_LEFT + pw + 12.0;
            let _ = writeln!(
                out,
                r#"<rect x="{lx}" y="{:.2}" width="14" height="4" fill="{colour}"/>"#,
                ly - 6.0
            );
            let _ = writeln!(
                out,
                r#"<text x="{}" y="{ly:.2}">{}</text>"#,
                lx + 20.0,
                escape(&s.label)
            );
        }
        out.push_str("</svg>\n");
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svg_is_well_formed_and_deterministic() {
        let p = Plot::new("speed <v>", "s, m", "v, m/s")
            .with(Series::line("a", vec![(0.0, 1.0), (1.0, 2.0), (2.0, 1.5)]))
            .with(Series::points("b", vec![(0.5, 1.2)]));
        let svg = p.to_svg();
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("speed &lt;v&gt;"));
        assert_eq!(svg.matches("<path").count(), 1);
        assert_eq!(svg.matches("<circle").count(), 1);
        assert_eq!(svg, p.to_svg());
    }

    #[test]
    fn flat_and_empty_series_do_not_divide_by_zero() {
        let flat = Plot::new("t", "x", "y").with(Series::line("c", vec![(0.0, 3.0), (1.0, 3.0)]));
        assert!(!flat.to_svg().contains("NaN"));
        let empty = Plot::new("t", "x", "y");
        assert!(!empty.to_svg().contains("NaN"));
    }

    #[test]
    fn tick_labels_are_trimmed() {
        assert_eq!(tick_label(2.5), "2.5");
        assert_eq!(tick_label(10.0), "10");
        assert_eq!(tick_label(-0.0001), "0");
    }
}
