//! Self-contained SVG plots: line series, scatter and histograms. No
//! plotting dependency; the figures the experiments emit are simple 2-D
//! charts with axes and ticks.

use crate::error::Result;
use std::path::Path;

const WIDTH: f64 = 480.0;
const HEIGHT: f64 = 360.0;
const MARGIN_L: f64 = 56.0;
const MARGIN_R: f64 = 16.0;
const MARGIN_T: f64 = 32.0;
const MARGIN_B: f64 = 44.0;

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#7f7f7f"];

#[derive(Debug, Clone)]
enum Element {
    Line {
        points: Vec<(f64, f64)>,
        color: usize,
        dashed: bool,
    },
    Scatter {
        points: Vec<(f64, f64)>,
        color: usize,
        radius: f64,
    },
    Bars {
        // (x_lo, x_hi, height)
        bars: Vec<(f64, f64, f64)>,
        color: usize,
    },
    VLine {
        x: f64,
    },
}

/// A single-panel chart assembled element by element and rendered to SVG.
#[derive(Debug, Clone)]
pub struct Plot {
    title: String,
    x_label: String,
    y_label: String,
    elements: Vec<Element>,
    legend: Vec<(String, usize, bool)>,
}

impl Plot {
    pub fn new(title: &str, x_label: &str, y_label: &str) -> Self {
        Plot {
            title: title.to_string(),
            x_label: x_label.to_string(),
            y_label: y_label.to_string(),
            elements: Vec::new(),
            legend: Vec::new(),
        }
    }

    pub fn line(&mut self, label: &str, points: Vec<(f64, f64)>, color: usize, dashed: bool) {
        self.elements.push(Element::Line {
            points,
            color,
            dashed,
        });
        if !label.is_empty() {
            self.legend.push((label.to_string(), color, dashed));
        }
    }

    pub fn scatter(&mut self, label: &str, points: Vec<(f64, f64)>, color: usize, radius: f64) {
        self.elements.push(Element::Scatter {
            points,
            color,
            radius,
        });
        if !label.is_empty() {
            self.legend.push((label.to_string(), color, false));
        }
    }

    pub fn histogram(&mut self, values: &[f64], bins: usize, color: usize) {
        if values.is_empty() || bins == 0 {
            return;
        }
        let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let span = (hi - lo).max(1e-12);
        let w = span / bins as f64;
        let mut counts = vec![0usize; bins];
        for &v in values {
            let b = (((v - lo) / w) as usize).min(bins - 1);
            counts[b] += 1;
        }
        let bars = counts
            .iter()
            .enumerate()
            .map(|(i, &c)| (lo + i as f64 * w, lo + (i + 1) as f64 * w, c as f64))
            .collect();
        self.elements.push(Element::Bars { bars, color });
    }

    pub fn vline(&mut self, x: f64) {
        self.elements.push(Element::VLine { x });
    }

    fn data_range(&self) -> ((f64, f64), (f64, f64)) {
        let mut xr = (f64::INFINITY, f64::NEG_INFINITY);
        let mut yr = (f64::INFINITY, f64::NEG_INFINITY);
        fn feed(xr: &mut (f64, f64), yr: &mut (f64, f64), x: f64, y: f64) {
            xr.0 = xr.0.min(x);
            xr.1 = xr.1.max(x);
            yr.0 = yr.0.min(y);
            yr.1 = yr.1.max(y);
        }
        for e in &self.elements {
            match e {
                Element::Line { points, .. } | Element::Scatter { points, .. } => {
                    for &(x, y) in points {
                        feed(&mut xr, &mut yr, x, y);
                    }
                }
                Element::Bars { bars, .. } => {
                    for &(lo, hi, h) in bars {
                        feed(&mut xr, &mut yr, lo, 0.0);
                        feed(&mut xr, &mut yr, hi, h);
                    }
                }
                Element::VLine { x } => {
                    xr.0 = xr.0.min(*x);
                    xr.1 = xr.1.max(*x);
                }
            }
        }
        if !xr.0.is_finite() || !xr.1.is_finite() {
            xr = (0.0, 1.0);
        }
        if !yr.0.is_finite() || !yr.1.is_finite() {
            yr = (0.0, 1.0);
        }
        if xr.1 - xr.0 < 1e-12 {
            xr = (xr.0 - 0.5, xr.1 + 0.5);
        }
        if yr.1 - yr.0 < 1e-12 {
            yr = (yr.0 - 0.5, yr.1 + 0.5);
        }
        (xr, yr)
    }

    /// Renders the chart; output depends only on the data, so identical
    /// inputs give byte-identical files.
    pub fn render(&self) -> String {
        let ((x0, x1), (y0, y1)) = self.data_range();
        let px = |x: f64| MARGIN_L + (x - x0) / (x1 - x0) * (WIDTH - MARGIN_L - MARGIN_R);
        let py = |y: f64| HEIGHT - MARGIN_B - (y - y0) / (y1 - y0) * (HEIGHT - MARGIN_T - MARGIN_B);

        let mut s = String::new();
        s.push_str(&format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
        ));
        s.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
        s.push_str(&format!(
            "<text x=\"{:.1}\" y=\"18\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">{}</text>\n",
            WIDTH / 2.0,
            xml_escape(&self.title)
        ));

        // axes
        s.push_str(&format!(
            "<line x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"black\"/>\n",
            MARGIN_L,
            HEIGHT - MARGIN_B,
            WIDTH - MARGIN_R,
            HEIGHT - MARGIN_B
        ));
        s.push_str(&format!(
            "<line x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"black\"/>\n",
            MARGIN_L, MARGIN_T, MARGIN_L, HEIGHT - MARGIN_B
        ));

        // ticks
        for i in 0..=4 {
            let fx = x0 + (x1 - x0) * i as f64 / 4.0;
            let fy = y0 + (y1 - y0) * i as f64 / 4.0;
            let tx = px(fx);
            let ty = py(fy);
            s.push_str(&format!(
                "<line x1=\"{tx:.1}\" y1=\"{:.1}\" x2=\"{tx:.1}\" y2=\"{:.1}\" stroke=\"black\"/>\n",
                HEIGHT - MARGIN_B,
                HEIGHT - MARGIN_B + 4.0
            ));
            s.push_str(&format!(
                "<text x=\"{tx:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">{}</text>\n",
                HEIGHT - MARGIN_B + 16.0,
                tick_label(fx)
            ));
            s.push_str(&format!(
                "<line x1=\"{:.1}\" y1=\"{ty:.1}\" x2=\"{:.1}\" y2=\"{ty:.1}\" stroke=\"black\"/>\n",
                MARGIN_L - 4.0,
                MARGIN_L
            ));
            s.push_str(&format!(
                "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">{}</text>\n",
                MARGIN_L - 7.0,
                ty + 3.5,
                tick_label(fy)
            ));
        }
        s.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">{}</text>\n",
            (MARGIN_L + WIDTH - MARGIN_R) / 2.0,
            HEIGHT - 8.0,
            xml_escape(&self.x_label)
        ));
        s.push_str(&format!(
            "<text x=\"14\" y=\"{:.1}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\" transform=\"rotate(-90 14 {:.1})\">{}</text>\n",
            (MARGIN_T + HEIGHT - MARGIN_B) / 2.0,
            (MARGIN_T + HEIGHT - MARGIN_B) / 2.0,
            xml_escape(&self.y_label)
        ));

        for e in &self.elements {
            match e {
                Element::Line {
                    points,
                    color,
                    dashed,
                } => {
                    if points.is_empty() {
                        continue;
                    }
                    let pts: Vec<String> = points
                        .iter()
                        .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
                        .collect();
                    let dash = if *dashed { " stroke-dasharray=\"6 4\"" } else { "" };
                    s.push_str(&format!(
                        "<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\"{dash}/>\n",
                        pts.join(" "),
                        PALETTE[color % PALETTE.len()]
                    ));
                }
                Element::Scatter {
                    points,
                    color,
                    radius,
                } => {
                    for &(x, y) in points {
                        s.push_str(&format!(
                            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"{radius:.2}\" fill=\"{}\" fill-opacity=\"0.65\"/>\n",
                            px(x),
                            py(y),
                            PALETTE[color % PALETTE.len()]
                        ));
                    }
                }
                Element::Bars { bars, color } => {
                    for &(lo, hi, h) in bars {
                        let x = px(lo);
                        let w = (px(hi) - px(lo)).max(0.5);
                        let y = py(h);
                        let hb = (py(0.0) - y).max(0.0);
                        s.push_str(&format!(
                            "<rect x=\"{x:.2}\" y=\"{y:.2}\" width=\"{w:.2}\" height=\"{hb:.2}\" fill=\"{}\" fill-opacity=\"0.7\" stroke=\"white\" stroke-width=\"0.5\"/>\n",
                            PALETTE[color % PALETTE.len()]
                        ));
                    }
                }
                Element::VLine { x } => {
                    s.push_str(&format!(
                        "<line x1=\"{0:.2}\" y1=\"{1:.1}\" x2=\"{0:.2}\" y2=\"{2:.1}\" stroke=\"#999999\" stroke-dasharray=\"3 3\"/>\n",
                        px(*x),
                        MARGIN_T,
                        HEIGHT - MARGIN_B
                    ));
                }
            }
        }

        // legend
        for (i, (label, color, dashed)) in self.legend.iter().enumerate() {
            let y = MARGIN_T + 6.0 + 14.0 * i as f64;
            let x = WIDTH - MARGIN_R - 130.0;
            let dash = if *dashed { " stroke-dasharray=\"6 4\"" } else { "" };
            s.push_str(&format!(
                "<line x1=\"{x:.1}\" y1=\"{y:.1}\" x2=\"{:.1}\" y2=\"{y:.1}\" stroke=\"{}\" stroke-width=\"2\"{dash}/>\n",
                x + 18.0,
                PALETTE[color % PALETTE.len()]
            ));
            s.push_str(&format!(
                "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"10\">{}</text>\n",
                x + 23.0,
                y + 3.5,
                xml_escape(label)
            ));
        }

        s.push_str("</svg>\n");
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let svg = self.render();
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent).map_err(|e| crate::Error::io(path, e))?;
            }
        }
        std::fs::write(path, svg).map_err(|e| crate::Error::io(path, e))
    }
}

fn tick_label(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    let a = v.abs();
    if a >= 0.01 && a < 10_000.0 {
        let s = format!("{v:.3}");
        let s = s.trim_end_matches('0').trim_end_matches('.');
        s.to_string()
    } else {
        format!("{v:.1e}")
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
