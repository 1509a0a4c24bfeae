//! Standalone SVG rendering of heat maps, SNR sweeps and correlation scatters.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::evaluation::{Correlation, HeatMap, SnrSweepResult};
use crate::sim::PARAM_NAMES;

const SERIES_COLORS: [&str; 6] = ["#1b6ca8", "#d1495b", "#2a9d55", "#8d5fd3", "#e08e0b", "#444444"];
const FONT: &str = "font-family=\"sans-serif\"";

pub fn write_text(path: impl AsRef<Path>, text: &str) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Diverging blue-white-red colour for `t` in `[-1, 1]`.
pub fn diverging_color(t: f64) -> String {
    let t = if t.is_finite() { t.clamp(-1.0, 1.0) } else { 0.0 };
    let (end, w) = if t < 0.0 { ((33.0, 102.0, 172.0), -t) } else { ((178.0, 24.0, 43.0), t) };
    let mix = |e: f64| (255.0 + (e - 255.0) * w).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(end.0), mix(end.1), mix(end.2))
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if a >= 100.0 {
        format!("{v:.0}")
    } else if a >= 1.0 {
        format!("{v:.2}").trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{v:.3}").trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

/// Roughly five round tick values covering `[lo, hi]`.
fn nice_ticks(lo: f64, hi: f64) -> Vec<f64> {
    if !(hi > lo) {
        return vec![lo];
    }
    let raw = (hi - lo) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 2.5, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let mut ticks = Vec::new();
    let mut v = (lo / step).ceil() * step;
    while v <= hi + step * 1e-9 {
        ticks.push(if v.abs() < step * 1e-9 { 0.0 } else { v });
        v += step;
    }
    ticks
}

fn header(svg: &mut String, width: f64, height: f64, title: &str) {
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\">"
    );
    let _ = writeln!(svg, "<rect width=\"{width}\" height=\"{height}\" fill=\"white\"/>");
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"22\" text-anchor=\"middle\" font-size=\"15\" {FONT}>{}</text>",
        width / 2.0,
        escape(title)
    );
}

/// Heat map of error differences; rows are FF (increasing upward), columns T1 water.
pub fn heatmap_svg(map: &HeatMap, title: &str) -> String {
    let (rows, cols) = (map.ff_values.len(), map.t1_h2o_values.len());
    let cell = 44.0;
    let (left, top) = (80.0, 40.0);
    let plot_w = cell * cols as f64;
    let plot_h = cell * rows as f64;
    let width = left + plot_w + 130.0;
    let height = top + plot_h + 70.0;
    let limit = map
        .cells
        .iter()
        .flatten()
        .filter(|v| v.is_finite())
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let scale = if limit > 0.0 { limit } else { 1.0 };

    let mut svg = String::new();
    header(&mut svg, width, height, title);
    for (i, row) in map.cells.iter().enumerate() {
        let y = top + plot_h - cell * (i + 1) as f64;
        for (j, &v) in row.iter().enumerate() {
            let x = left + cell * j as f64;
            let fill = if v.is_finite() { diverging_color(v / scale) } else { "#dddddd".into() };
            let _ = writeln!(
                svg,
                "<rect x=\"{x}\" y=\"{y}\" width=\"{cell}\" height=\"{cell}\" fill=\"{fill}\" stroke=\"#888\" stroke-width=\"0.5\"><title>FF {} T1 {}: {v:.4}</title></rect>",
                fmt_tick(map.ff_values[i]),
                fmt_tick(map.t1_h2o_values[j])
            );
        }
    }
    for (i, ff) in map.ff_values.iter().enumerate() {
        let y = top + plot_h - cell * (i as f64 + 0.5);
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\" font-size=\"11\" {FONT}>{}</text>",
            left - 6.0,
            y + 4.0,
            fmt_tick(*ff)
        );
    }
    for (j, t1) in map.t1_h2o_values.iter().enumerate() {
        let x = left + cell * (j as f64 + 0.5);
        let _ = writeln!(
            svg,
            "<text x=\"{x}\" y=\"{}\" text-anchor=\"middle\" font-size=\"11\" {FONT}>{}</text>",
            top + plot_h + 16.0,
            fmt_tick(*t1)
        );
    }
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"13\" {FONT}>T1 water (ms)</text>",
        left + plot_w / 2.0,
        top + plot_h + 40.0
    );
    let _ = writeln!(
        svg,
        "<text x=\"20\" y=\"{}\" text-anchor=\"middle\" font-size=\"13\" {FONT} transform=\"rotate(-90 20 {})\">fat fraction</text>",
        top + plot_h / 2.0,
        top + plot_h / 2.0
    );

    // colour bar
    let bar_x = left + plot_w + 30.0;
    let steps = 40;
    let step_h = plot_h / steps as f64;
    for k in 0..steps {
        let t = 1.0 - 2.0 * (k as f64 + 0.5) / steps as f64;
        let _ = writeln!(
            svg,
            "<rect x=\"{bar_x}\" y=\"{}\" width=\"18\" height=\"{}\" fill=\"{}\"/>",
            top + step_h * k as f64,
            step_h + 0.5,
            diverging_color(t)
        );
    }
    let _ = writeln!(
        svg,
        "<rect x=\"{bar_x}\" y=\"{top}\" width=\"18\" height=\"{plot_h}\" fill=\"none\" stroke=\"#444\"/>"
    );
    for (frac, v) in [(0.0, scale), (0.5, 0.0), (1.0, -scale)] {
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-size=\"11\" {FONT}>{}</text>",
            bar_x + 24.0,
            top + plot_h * frac + 4.0,
            fmt_tick(v)
        );
    }
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"{}\" font-size=\"11\" {FONT}>{} diff (pp)</text>",
        bar_x - 10.0,
        top + plot_h + 40.0,
        map.param.name()
    );
    svg.push_str("</svg>\n");
    svg
}

struct Axes {
    left: f64,
    top: f64,
    w: f64,
    h: f64,
    x: (f64, f64),
    y: (f64, f64),
}

impl Axes {
    fn px(&self, v: f64) -> f64 {
        self.left + (v - self.x.0) / (self.x.1 - self.x.0) * self.w
    }

    fn py(&self, v: f64) -> f64 {
        self.top + self.h - (v - self.y.0) / (self.y.1 - self.y.0) * self.h
    }

    fn draw(&self, svg: &mut String, x_label: &str, y_label: &str) {
        for t in nice_ticks(self.x.0, self.x.1) {
            let x = self.px(t);
            let _ = writeln!(
                svg,
                "<line x1=\"{x}\" y1=\"{}\" x2=\"{x}\" y2=\"{}\" stroke=\"#e4e4e4\"/>",
                self.top,
                self.top + self.h
            );
            let _ = writeln!(
                svg,
                "<text x=\"{x}\" y=\"{}\" text-anchor=\"middle\" font-size=\"11\" {FONT}>{}</text>",
                self.top + self.h + 16.0,
                fmt_tick(t)
            );
        }
        for t in nice_ticks(self.y.0, self.y.1) {
            let y = self.py(t);
            let _ = writeln!(
                svg,
                "<line x1=\"{}\" y1=\"{y}\" x2=\"{}\" y2=\"{y}\" stroke=\"#e4e4e4\"/>",
                self.left,
                self.left + self.w
            );
            let _ = writeln!(
                svg,
                "<text x=\"{}\" y=\"{}\" text-anchor=\"end\" font-size=\"11\" {FONT}>{}</text>",
                self.left - 6.0,
                y + 4.0,
                fmt_tick(t)
            );
        }
        let _ = writeln!(
            svg,
            "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#444\"/>",
            self.left, self.top, self.w, self.h
        );
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"13\" {FONT}>{}</text>",
            self.left + self.w / 2.0,
            self.top + self.h + 38.0,
            escape(x_label)
        );
        let cy = self.top + self.h / 2.0;
        let _ = writeln!(
            svg,
            "<text x=\"18\" y=\"{cy}\" text-anchor=\"middle\" font-size=\"13\" {FONT} transform=\"rotate(-90 18 {cy})\">{}</text>",
            escape(y_label)
        );
    }
}

fn padded_range(lo: f64, hi: f64) -> (f64, f64) {
    if !(lo.is_finite() && hi.is_finite()) {
        return (0.0, 1.0);
    }
    if hi > lo {
        let pad = (hi - lo) * 0.05;
        (lo - pad, hi + pad)
    } else {
        (lo - 0.5, lo + 0.5)
    }
}

/// MRE-versus-SNR curves for one parameter, one series per model, with ±sd error bars.
pub fn sweep_svg(results: &[SnrSweepResult], param: usize, title: &str) -> String {
    let points = results.iter().flat_map(|r| r.levels.iter());
    let (mut xlo, mut xhi, mut ylo, mut yhi) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64, f64::NEG_INFINITY);
    for l in points {
        if l.snr_db.is_finite() {
            xlo = xlo.min(l.snr_db);
            xhi = xhi.max(l.snr_db);
        }
        let top = l.mre_mean[param] + l.mre_sd[param];
        if top.is_finite() {
            yhi = yhi.max(top);
            ylo = ylo.min(l.mre_mean[param] - l.mre_sd[param]);
        }
    }
    let axes = Axes {
        left: 70.0,
        top: 40.0,
        w: 480.0,
        h: 300.0,
        x: padded_range(xlo, xhi),
        y: padded_range(ylo, yhi),
    };
    let mut svg = String::new();
    header(&mut svg, 720.0, 400.0, title);
    axes.draw(&mut svg, "SNR (dB)", &format!("MRE {} (%)", PARAM_NAMES[param]));
    for (k, result) in results.iter().enumerate() {
        let color = SERIES_COLORS[k % SERIES_COLORS.len()];
        let finite: Vec<_> = result.levels.iter().filter(|l| l.snr_db.is_finite()).collect();
        let path: Vec<String> = finite
            .iter()
            .map(|l| format!("{:.2},{:.2}", axes.px(l.snr_db), axes.py(l.mre_mean[param])))
            .collect();
        let _ = writeln!(
            svg,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"2\"/>",
            path.join(" ")
        );
        for l in finite {
            let (x, m, sd) = (axes.px(l.snr_db), l.mre_mean[param], l.mre_sd[param]);
            let (y0, y1) = (axes.py(m - sd), axes.py(m + sd));
            let _ = writeln!(
                svg,
                "<path d=\"M{x},{y0} V{y1} M{},{y0} H{} M{},{y1} H{}\" stroke=\"{color}\" fill=\"none\"/>",
                x - 4.0,
                x + 4.0,
                x - 4.0,
                x + 4.0
            );
            let _ = writeln!(svg, "<circle cx=\"{x}\" cy=\"{}\" r=\"3\" fill=\"{color}\"/>", axes.py(m));
        }
        let ly = 60.0 + 20.0 * k as f64;
        let _ = writeln!(
            svg,
            "<line x1=\"570\" y1=\"{ly}\" x2=\"592\" y2=\"{ly}\" stroke=\"{color}\" stroke-width=\"2\"/>"
        );
        let _ = writeln!(
            svg,
            "<text x=\"598\" y=\"{}\" font-size=\"12\" {FONT}>{}</text>",
            ly + 4.0,
            escape(&result.model)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Per-entry backward MRE against the forward inner product.
pub fn correlation_svg(corr: &Correlation, title: &str) -> String {
    let (mut xlo, mut xhi) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut ylo, mut yhi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (&x, &y) in corr.inner_product.iter().zip(&corr.mre) {
        xlo = xlo.min(x);
        xhi = xhi.max(x);
        ylo = ylo.min(y);
        yhi = yhi.max(y);
    }
    let axes = Axes {
        left: 70.0,
        top: 40.0,
        w: 480.0,
        h: 300.0,
        x: padded_range(xlo, xhi),
        y: padded_range(ylo, yhi),
    };
    let mut svg = String::new();
    header(&mut svg, 600.0, 400.0, &format!("{title} (rho = {:.3})", corr.rho));
    axes.draw(&mut svg, "inner product", "MRE (%)");
    for (&x, &y) in corr.inner_product.iter().zip(&corr.mre) {
        let _ = writeln!(
            svg,
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"1.5\" fill=\"{}\" fill-opacity=\"0.4\"/>",
            axes.px(x),
            axes.py(y),
            SERIES_COLORS[0]
        );
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::{HeatParam, SnrLevelResult};

    #[test]
    fn diverging_scale_endpoints() {
        assert_eq!(diverging_color(0.0), "#ffffff");
        assert_eq!(diverging_color(1.0), "#b2182b");
        assert_eq!(diverging_color(-1.0), "#2166ac");
        assert_eq!(diverging_color(5.0), diverging_color(1.0));
        assert_eq!(diverging_color(f64::NAN), "#ffffff");
    }

    #[test]
    fn ticks_are_round() {
        assert_eq!(nice_ticks(0.0, 10.0), vec![0.0, 2.0, 4.0, 6.0, 8.0, 10.0]);
        assert_eq!(nice_ticks(10.0, 50.0), vec![10.0, 20.0, 30.0, 40.0, 50.0]);
        assert_eq!(nice_ticks(3.0, 3.0), vec![3.0]);
    }

    #[test]
    fn heatmap_has_one_rect_per_cell() {
        let map = HeatMap {
            param: HeatParam::T1H2o,
            ff_values: vec![0.1, 0.5],
            t1_h2o_values: vec![600.0, 900.0, 1200.0],
            cells: vec![vec![1.0, -2.0, 0.0], vec![f64::NAN, 0.5, 2.0]],
            counts: vec![vec![1, 1, 1], vec![0, 1, 1]],
        };
        let svg = heatmap_svg(&map, "a < b");
        assert_eq!(svg.matches("<title>").count(), 6);
        assert!(svg.contains("a &lt; b"));
        assert!(svg.contains("#dddddd"));
        assert!(svg.contains(&diverging_color(1.0)));
        assert!(svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn zero_heatmap_renders_white() {
        let map = HeatMap {
            param: HeatParam::T1Fat,
            ff_values: vec![0.1],
            t1_h2o_values: vec![600.0],
            cells: vec![vec![0.0]],
            counts: vec![vec![3]],
        };
        assert!(heatmap_svg(&map, "same").contains("fill=\"#ffffff\""));
    }

    #[test]
    fn sweep_draws_error_bars() {
        let level = |snr: f64, m: f64| SnrLevelResult {
            snr_db: snr,
            noise_sd: 0.01,
            mre_mean: [m; 5],
            mre_sd: [1.0; 5],
        };
        let results = vec![
            SnrSweepResult {
                model: "inn".into(),
                repetitions: 2,
                levels: vec![level(15.0, 9.0), level(45.0, 2.0)],
            },
            SnrSweepResult {
                model: "fcn".into(),
                repetitions: 2,
                levels: vec![level(15.0, 8.0), level(45.0, 3.0)],
            },
        ];
        let svg = sweep_svg(&results, 1, "T1");
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert_eq!(svg.matches("<path d=").count(), 4);
        assert!(svg.contains(">inn<") && svg.contains(">fcn<"));
    }
}
