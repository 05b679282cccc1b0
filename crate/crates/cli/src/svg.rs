//! Forest-plot SVG emission.
//!
//! One row per estimate (point + interval whisker), one diamond per pooled
//! fit, and a vertical reference line at the null (0 on additive display, 1
//! on ratio display). Output is plain generated SVG with fixed-precision
//! coordinates: identical reports produce byte-identical files.

use std::path::Path;

use sdma_core::dist::std_normal_quantile;

use crate::report::Report;
use crate::CliError;

const WIDTH: f64 = 760.0;
const ROW_HEIGHT: f64 = 22.0;
const MARGIN_LEFT: f64 = 150.0;
const MARGIN_RIGHT: f64 = 160.0;
const MARGIN_TOP: f64 = 46.0;
const MARGIN_BOTTOM: f64 = 46.0;

struct Axis {
    min: f64,
    max: f64,
}

impl Axis {
    fn x(&self, value: f64) -> f64 {
        let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
        MARGIN_LEFT + (value - self.min) / (self.max - self.min) * plot_w
    }

    fn ticks(&self) -> Vec<f64> {
        let span = self.max - self.min;
        let raw_step = span / 5.0;
        let magnitude = 10f64.powf(raw_step.abs().log10().floor());
        let step = [1.0, 2.0, 2.5, 5.0, 10.0]
            .iter()
            .map(|m| m * magnitude)
            .find(|&s| s >= raw_step)
            .unwrap_or(magnitude);
        let mut ticks = Vec::new();
        let mut t = (self.min / step).ceil() * step;
        while t <= self.max + 1e-12 * span {
            // Snap near-zero ticks to exactly zero for stable labels.
            ticks.push(if t.abs() < step * 1e-9 { 0.0 } else { t });
            t += step;
        }
        ticks
    }
}

/// Write the forest plot for a report.
pub fn emit_forest_svg(report: &Report, path: &Path) -> Result<(), CliError> {
    let svg = render_forest_svg(report);
    std::fs::write(path, svg).map_err(CliError::io(path.display().to_string()))
}

pub fn render_forest_svg(report: &Report) -> String {
    let z = std_normal_quantile(0.5 + 0.5 * report.config.level);
    let ratio = report.ratio_display;
    let back = |x: f64| if ratio { x.exp() } else { x };

    // Pooled rows on the internal additive scale.
    let mut pooled: Vec<(String, f64, f64, f64)> = Vec::new();
    if let Some(pair) = &report.classical {
        for (name, fit) in [("classical adjusted", &pair.adjusted), ("classical standard", &pair.standard)] {
            pooled.push((name.to_string(), fit.mu_hat, fit.ci_mu.0, fit.ci_mu.1));
        }
    }
    if let Some(pair) = &report.bayesian {
        for (name, fit) in [("bayesian adjusted", &pair.adjusted.fit), ("bayesian standard", &pair.standard.fit)] {
            pooled.push((name.to_string(), fit.mu_median, fit.mu_cri.0, fit.mu_cri.1));
        }
    }

    let mut lo = 0.0f64;
    let mut hi = 0.0f64;
    for rec in &report.estimates {
        lo = lo.min(rec.y - z * rec.se);
        hi = hi.max(rec.y + z * rec.se);
    }
    for &(_, _, l, u) in &pooled {
        lo = lo.min(l);
        hi = hi.max(u);
    }
    let pad = 0.06 * (hi - lo).max(1e-9);
    let axis = Axis {
        min: lo - pad,
        max: hi + pad,
    };

    let n_rows = report.estimates.len() + pooled.len();
    let height = MARGIN_TOP + (n_rows as f64 + 1.5) * ROW_HEIGHT + MARGIN_BOTTOM;
    let plot_bottom = height - MARGIN_BOTTOM;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{height:.0}\" \
         viewBox=\"0 0 {WIDTH} {height:.0}\" font-family=\"monospace\" font-size=\"12\">\n"
    ));
    svg.push_str(&format!(
        "  <text x=\"{MARGIN_LEFT}\" y=\"22\" font-size=\"14\">Single-dataset meta-analysis \
         ({} estimates)</text>\n",
        report.estimates.len()
    ));

    // Null reference line: 0 additive, displayed as 1 on ratio scale.
    let x_null = axis.x(0.0);
    svg.push_str(&format!(
        "  <line x1=\"{x_null:.2}\" y1=\"{MARGIN_TOP:.2}\" x2=\"{x_null:.2}\" y2=\"{plot_bottom:.2}\" \
         stroke=\"#999999\" stroke-dasharray=\"4 3\"/>\n"
    ));

    // Axis ticks with display-scale labels (log-spaced ratios on a linear
    // log axis when the display scale is a ratio).
    for tick in axis.ticks() {
        let x = axis.x(tick);
        svg.push_str(&format!(
            "  <line x1=\"{x:.2}\" y1=\"{plot_bottom:.2}\" x2=\"{x:.2}\" y2=\"{:.2}\" stroke=\"#333333\"/>\n",
            plot_bottom + 5.0
        ));
        svg.push_str(&format!(
            "  <text x=\"{x:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{:.2}</text>\n",
            plot_bottom + 18.0,
            back(tick)
        ));
    }
    svg.push_str(&format!(
        "  <line x1=\"{MARGIN_LEFT:.2}\" y1=\"{plot_bottom:.2}\" x2=\"{:.2}\" y2=\"{plot_bottom:.2}\" stroke=\"#333333\"/>\n",
        WIDTH - MARGIN_RIGHT
    ));

    let mut row_y = MARGIN_TOP + ROW_HEIGHT;
    for rec in &report.estimates {
        let (l, u) = (rec.y - z * rec.se, rec.y + z * rec.se);
        let (x1, x2, xc) = (axis.x(l), axis.x(u), axis.x(rec.y));
        svg.push_str(&format!(
            "  <text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{}</text>\n",
            MARGIN_LEFT - 8.0,
            row_y + 4.0,
            xml_escape(&rec.label)
        ));
        svg.push_str(&format!(
            "  <line class=\"whisker\" x1=\"{x1:.2}\" y1=\"{row_y:.2}\" x2=\"{x2:.2}\" y2=\"{row_y:.2}\" stroke=\"#1f4e79\"/>\n"
        ));
        svg.push_str(&format!(
            "  <rect x=\"{:.2}\" y=\"{:.2}\" width=\"6\" height=\"6\" fill=\"#1f4e79\"/>\n",
            xc - 3.0,
            row_y - 3.0
        ));
        svg.push_str(&format!(
            "  <text x=\"{:.2}\" y=\"{:.2}\">{:.2} [{:.2}, {:.2}]</text>\n",
            WIDTH - MARGIN_RIGHT + 10.0,
            row_y + 4.0,
            back(rec.y),
            back(l),
            back(u)
        ));
        row_y += ROW_HEIGHT;
    }

    row_y += 0.5 * ROW_HEIGHT;
    for (name, mu, l, u) in &pooled {
        let (x1, x2, xc) = (axis.x(*l), axis.x(*u), axis.x(*mu));
        let half = 6.0;
        svg.push_str(&format!(
            "  <text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{name}</text>\n",
            MARGIN_LEFT - 8.0,
            row_y + 4.0
        ));
        svg.push_str(&format!(
            "  <polygon points=\"{x1:.2},{row_y:.2} {xc:.2},{:.2} {x2:.2},{row_y:.2} {xc:.2},{:.2}\" \
             fill=\"#b04a02\"/>\n",
            row_y - half,
            row_y + half
        ));
        svg.push_str(&format!(
            "  <text x=\"{:.2}\" y=\"{:.2}\">{:.2} [{:.2}, {:.2}]</text>\n",
            WIDTH - MARGIN_RIGHT + 10.0,
            row_y + 4.0,
            back(*mu),
            back(*l),
            back(*u)
        ));
        row_y += ROW_HEIGHT;
    }

    svg.push_str("</svg>\n");
    svg
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}
