//! Minimal SVG charting: line series, scatter marks, axes with ticks.
//! Keeps report output dependency-free.

use std::fmt::Write as _;

pub struct Series {
    pub label: String,
    pub color: &'static str,
    pub points: Vec<(f64, f64)>,
    pub style: SeriesStyle,
}

#[derive(PartialEq, Eq, Clone, Copy)]
pub enum SeriesStyle {
    Line,
    Dots,
    HollowDots,
}

pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    pub log_y: bool,
}

const W: f64 = 760.0;
const H: f64 = 520.0;
const ML: f64 = 70.0;
const MR: f64 = 20.0;
const MT: f64 = 40.0;
const MB: f64 = 55.0;

fn nice_ticks(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if !(hi > lo) {
        return vec![lo];
    }
    let span = hi - lo;
    let raw = span / n as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let step = if norm < 1.5 {
        1.0
    } else if norm < 3.0 {
        2.0
    } else if norm < 7.0 {
        5.0
    } else {
        10.0
    } * mag;
    let start = (lo / step).ceil() * step;
    let mut ticks = Vec::new();
    let mut t = start;
    while t <= hi + 1e-9 * span {
        ticks.push(t);
        t += step;
    }
    ticks
}

impl Chart {
    pub fn render(&self) -> String {
        let mut pts: Vec<(f64, f64)> = Vec::new();
        for s in &self.series {
            for &(x, y) in &s.points {
                let y = if self.log_y { y.max(1e-300).log10() } else { y };
                if x.is_finite() && y.is_finite() {
                    pts.push((x, y));
                }
            }
        }
        let (mut x0, mut x1) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY);
        for &(x, y) in &pts {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        if !x0.is_finite() {
            x0 = 0.0;
            x1 = 1.0;
            y0 = 0.0;
            y1 = 1.0;
        }
        if x1 - x0 < 1e-12 {
            x1 = x0 + 1.0;
        }
        if y1 - y0 < 1e-12 {
            y1 = y0 + 1.0;
        }
        let pad = 0.04 * (y1 - y0);
        y0 -= pad;
        y1 += pad;

        let sx = |x: f64| ML + (x - x0) / (x1 - x0) * (W - ML - MR);
        let sy = |y: f64| {
            let y = if self.log_y { y.max(1e-300).log10() } else { y };
            H - MB - (y - y0) / (y1 - y0) * (H - MT - MB)
        };

        let mut out = String::new();
        let _ = write!(
            out,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n\
             <rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n"
        );
        let _ = write!(
            out,
            "<text x=\"{}\" y=\"24\" font-size=\"16\" text-anchor=\"middle\" font-family=\"sans-serif\">{}</text>\n",
            W / 2.0,
            xml_escape(&self.title)
        );

        // axes
        let _ = write!(
            out,
            "<line x1=\"{ML}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n\
             <line x1=\"{ML}\" y1=\"{MT}\" x2=\"{ML}\" y2=\"{}\" stroke=\"black\"/>\n",
            H - MB,
            W - MR,
            H - MB,
            H - MB
        );
        for t in nice_ticks(x0, x1, 8) {
            let x = sx(t);
            let _ = write!(
                out,
                "<line x1=\"{x:.1}\" y1=\"{}\" x2=\"{x:.1}\" y2=\"{}\" stroke=\"black\"/>\n\
                 <text x=\"{x:.1}\" y=\"{}\" font-size=\"11\" text-anchor=\"middle\" font-family=\"sans-serif\">{}</text>\n",
                H - MB,
                H - MB + 5.0,
                H - MB + 18.0,
                format_tick(t)
            );
        }
        for t in nice_ticks(y0, y1, 7) {
            let y = sy(if self.log_y { 10f64.powf(t) } else { t });
            let label = if self.log_y {
                format!("1e{}", t.round() as i64)
            } else {
                format_tick(t)
            };
            let _ = write!(
                out,
                "<line x1=\"{}\" y1=\"{y:.1}\" x2=\"{ML}\" y2=\"{y:.1}\" stroke=\"black\"/>\n\
                 <text x=\"{}\" y=\"{:.1}\" font-size=\"11\" text-anchor=\"end\" font-family=\"sans-serif\">{label}</text>\n",
                ML - 5.0,
                ML - 8.0,
                y + 4.0
            );
        }
        let _ = write!(
            out,
            "<text x=\"{}\" y=\"{}\" font-size=\"13\" text-anchor=\"middle\" font-family=\"sans-serif\">{}</text>\n",
            (ML + W - MR) / 2.0,
            H - 12.0,
            xml_escape(&self.x_label)
        );
        let _ = write!(
            out,
            "<text x=\"16\" y=\"{}\" font-size=\"13\" text-anchor=\"middle\" font-family=\"sans-serif\" transform=\"rotate(-90 16 {})\">{}</text>\n",
            (MT + H - MB) / 2.0,
            (MT + H - MB) / 2.0,
            xml_escape(&self.y_label)
        );

        for s in &self.series {
            match s.style {
                SeriesStyle::Line => {
                    let path: String = s
                        .points
                        .iter()
                        .filter(|(x, y)| x.is_finite() && y.is_finite())
                        .enumerate()
                        .map(|(i, &(x, y))| {
                            format!(
                                "{}{:.2},{:.2}",
                                if i == 0 { "M" } else { "L" },
                                sx(x),
                                sy(y)
                            )
                        })
                        .collect();
                    let _ = write!(
                        out,
                        "<path d=\"{path}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.6\"/>\n",
                        s.color
                    );
                }
                SeriesStyle::Dots | SeriesStyle::HollowDots => {
                    let fill = if s.style == SeriesStyle::Dots {
                        s.color
                    } else {
                        "none"
                    };
                    for &(x, y) in &s.points {
                        if x.is_finite() && y.is_finite() {
                            let _ = write!(
                                out,
                                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.4\" fill=\"{fill}\" stroke=\"{}\" stroke-width=\"0.9\"/>\n",
                                sx(x),
                                sy(y),
                                s.color
                            );
                        }
                    }
                }
            }
        }

        // legend
        let mut ly = MT + 8.0;
        for s in &self.series {
            let _ = write!(
                out,
                "<rect x=\"{}\" y=\"{:.1}\" width=\"14\" height=\"3\" fill=\"{}\"/>\n\
                 <text x=\"{}\" y=\"{:.1}\" font-size=\"12\" font-family=\"sans-serif\">{}</text>\n",
                ML + 12.0,
                ly - 2.0,
                s.color,
                ML + 32.0,
                ly + 3.0,
                xml_escape(&s.label)
            );
            ly += 18.0;
        }
        out.push_str("</svg>\n");
        out
    }
}

fn format_tick(t: f64) -> String {
    if t == 0.0 {
        return "0".into();
    }
    let a = t.abs();
    if (1e-3..1e5).contains(&a) {
        let s = format!("{t:.4}");
        let s = s.trim_end_matches('0').trim_end_matches('.');
        s.to_string()
    } else {
        format!("{t:.1e}")
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Particle scatter of a deformed mesh region (crack-path pictures).
pub struct MeshPlot {
    pub title: String,
    /// (x, y) particle positions.
    pub particles: Vec<(f64, f64)>,
    /// Centroids of dead triangles.
    pub dead: Vec<(f64, f64)>,
    /// Crop window (xmin, ymin, xmax, ymax).
    pub window: (f64, f64, f64, f64),
}

impl MeshPlot {
    pub fn render(&self) -> String {
        let (x0, y0, x1, y1) = self.window;
        let scale = (W - ML - MR) / (x1 - x0).max(1e-9);
        let scale_y = (H - MT - MB) / (y1 - y0).max(1e-9);
        let s = scale.min(scale_y);
        let sx = |x: f64| ML + (x - x0) * s;
        let sy = |y: f64| H - MB - (y - y0) * s;
        let mut out = String::new();
        let _ = write!(
            out,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n\
             <rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n\
             <text x=\"{}\" y=\"24\" font-size=\"16\" text-anchor=\"middle\" font-family=\"sans-serif\">{}</text>\n",
            W / 2.0,
            xml_escape(&self.title)
        );
        for &(x, y) in &self.particles {
            if x < x0 || x > x1 || y < y0 || y > y1 {
                continue;
            }
            let _ = write!(
                out,
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"1.2\" fill=\"#3465a4\"/>\n",
                sx(x),
                sy(y)
            );
        }
        for &(x, y) in &self.dead {
            if x < x0 || x > x1 || y < y0 || y > y1 {
                continue;
            }
            let _ = write!(
                out,
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.0\" fill=\"#cc0000\"/>\n",
                sx(x),
                sy(y)
            );
        }
        out.push_str("</svg>\n");
        out
    }
}
