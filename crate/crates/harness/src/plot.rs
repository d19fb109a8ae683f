//! SVG rendering of mean cumulative regret curves with 95% bands.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{HarnessError, Result};
use crate::report::Summary;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 160.0;
const TOP: f64 = 20.0;
const BOTTOM: f64 = 50.0;
const PALETTE: [&str; 8] = ["#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02", "#a6761d", "#666666"];

/// Round-number tick positions covering `[0, hi]`.
fn ticks(hi: f64) -> Vec<f64> {
    if hi <= 0.0 {
        return vec![0.0];
    }
    let raw = hi / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
    (0..).map(|k| k as f64 * step).take_while(|v| *v <= hi * (1.0 + 1e-9)).collect()
}

pub fn render_svg(summary: &Summary) -> Result<String> {
    if summary.series.iter().all(|s| s.rows.is_empty()) {
        return Err(HarnessError::data("nothing to plot"));
    }
    let t_max = summary.series.iter().flat_map(|s| s.rows.iter().map(|r| r.t)).max().unwrap_or(1).max(1) as f64;
    let y_max = summary.series.iter().flat_map(|s| s.rows.iter().map(|r| r.mean + r.half_width)).fold(0.0f64, f64::max);
    let y_top = if y_max > 0.0 { y_max * 1.05 } else { 1.0 };
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let px = |t: f64| LEFT + plot_w * t / t_max;
    let py = |v: f64| TOP + plot_h * (1.0 - v.max(0.0) / y_top);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<g class="axes" stroke="black"><line x1="{LEFT}" y1="{y0:.2}" x2="{x1:.2}" y2="{y0:.2}"/><line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{y0:.2}"/></g>"#,
        y0 = TOP + plot_h,
        x1 = LEFT + plot_w
    );
    for t in ticks(t_max) {
        let _ =
            writeln!(svg, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, px(t), TOP + plot_h + 18.0, t);
    }
    for v in ticks(y_top) {
        let _ =
            writeln!(svg, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, LEFT - 6.0, py(v) + 4.0, trim(v));
    }
    let _ = writeln!(
        svg,
        r#"<text class="xlabel" x="{:.2}" y="{:.2}" text-anchor="middle">round t</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 10.0
    );
    let _ = writeln!(
        svg,
        r#"<text class="ylabel" x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">cumulative regret</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0
    );
    for (k, s) in summary.series.iter().enumerate() {
        let colour = PALETTE[k % PALETTE.len()];
        let upper: Vec<String> =
            s.rows.iter().map(|r| format!("{:.2},{:.2}", px(r.t as f64), py(r.mean + r.half_width))).collect();
        let lower: Vec<String> =
            s.rows.iter().rev().map(|r| format!("{:.2},{:.2}", px(r.t as f64), py(r.mean - r.half_width))).collect();
        let mean: Vec<String> = s.rows.iter().map(|r| format!("{:.2},{:.2}", px(r.t as f64), py(r.mean))).collect();
        let _ = writeln!(svg, r#"<g class="policy" data-policy="{}">"#, escape(&s.policy));
        let _ = writeln!(
            svg,
            r#"<polygon class="band" fill="{colour}" fill-opacity="0.2" stroke="none" points="{} {}"/>"#,
            upper.join(" "),
            lower.join(" ")
        );
        let _ = writeln!(
            svg,
            r#"<polyline class="mean" fill="none" stroke="{colour}" stroke-width="2" points="{}"/>"#,
            mean.join(" ")
        );
        let ly = TOP + 14.0 + 18.0 * k as f64;
        let lx = LEFT + plot_w + 12.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{colour}" stroke-width="2"/><text x="{:.2}" y="{:.2}">{}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            escape(&s.policy)
        );
        svg.push_str("</g>\n");
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn trim(v: f64) -> String {
    let s = format!("{v:.6}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

pub fn emit_plot(summary: &Summary, path: &Path) -> Result<()> {
    let svg = render_svg(summary)?;
    std::fs::write(path, svg).map_err(|e| HarnessError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tick_steps_are_round() {
        assert_eq!(ticks(400.0), vec![0.0, 100.0, 200.0, 300.0, 400.0]);
        assert_eq!(ticks(7.0), vec![0.0, 2.0, 4.0, 6.0]);
    }
}
