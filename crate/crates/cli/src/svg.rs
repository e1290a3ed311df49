//! Hand-emitted SVG charts: multi-series line plots and square heatmaps.
//! Pure string construction with fixed-precision formatting, so identical
//! inputs always produce identical bytes.

use lindiff_core::{Error, Result};

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf", "#7f7f7f",
];

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 440.0;
const MARGIN_LEFT: f64 = 78.0;
const MARGIN_RIGHT: f64 = 24.0;
const MARGIN_TOP: f64 = 46.0;
const MARGIN_BOTTOM: f64 = 58.0;

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

fn fmt(v: f64) -> String {
    format!("{v:.2}")
}

fn tick_label(v: f64) -> String {
    if v == 0.0 {
        "0".to_string()
    } else if v.abs() >= 0.01 && v.abs() < 10000.0 {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{v:.2e}")
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// A multi-series line chart. Errors when there is nothing to draw.
pub fn line_chart(
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[Series],
) -> Result<String> {
    if series.is_empty() || series.iter().all(|s| s.points.is_empty()) {
        return Err(Error::Argument {
            op: "line_chart",
            detail: "empty table".to_string(),
        });
    }
    let mut x_min = f64::INFINITY;
    let mut x_max = f64::NEG_INFINITY;
    let mut y_min = f64::INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    for s in series {
        for &(x, y) in &s.points {
            x_min = x_min.min(x);
            x_max = x_max.max(x);
            y_min = y_min.min(y);
            y_max = y_max.max(y);
        }
    }
    if x_max == x_min {
        x_max = x_min + 1.0;
    }
    if y_max == y_min {
        y_max = y_min + 1.0;
    }
    // pad the y range a little so lines stay off the frame
    let pad = 0.05 * (y_max - y_min);
    y_min -= pad;
    y_max += pad;

    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let px = |x: f64| MARGIN_LEFT + (x - x_min) / (x_max - x_min) * plot_w;
    let py = |y: f64| MARGIN_TOP + (1.0 - (y - y_min) / (y_max - y_min)) * plot_h;

    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    out.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    out.push_str(&format!(
        "<text x=\"{}\" y=\"24\" font-family=\"sans-serif\" font-size=\"15\" text-anchor=\"middle\">{}</text>\n",
        fmt(WIDTH / 2.0),
        escape(title)
    ));

    // frame
    out.push_str(&format!(
        "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#333333\" stroke-width=\"1\"/>\n",
        fmt(MARGIN_LEFT),
        fmt(MARGIN_TOP),
        fmt(plot_w),
        fmt(plot_h)
    ));

    // ticks and grid
    for i in 0..=4 {
        let fx = i as f64 / 4.0;
        let xv = x_min + fx * (x_max - x_min);
        let gx = px(xv);
        out.push_str(&format!(
            "<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"#cccccc\" stroke-width=\"0.5\"/>\n",
            fmt(gx),
            fmt(MARGIN_TOP),
            fmt(MARGIN_TOP + plot_h)
        ));
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">{}</text>\n",
            fmt(gx),
            fmt(MARGIN_TOP + plot_h + 18.0),
            tick_label(xv)
        ));
        let yv = y_min + fx * (y_max - y_min);
        let gy = py(yv);
        out.push_str(&format!(
            "<line x1=\"{1}\" y1=\"{0}\" x2=\"{2}\" y2=\"{0}\" stroke=\"#cccccc\" stroke-width=\"0.5\"/>\n",
            fmt(gy),
            fmt(MARGIN_LEFT),
            fmt(MARGIN_LEFT + plot_w)
        ));
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">{}</text>\n",
            fmt(MARGIN_LEFT - 6.0),
            fmt(gy + 4.0),
            tick_label(yv)
        ));
    }

    // axis labels
    out.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">{}</text>\n",
        fmt(MARGIN_LEFT + plot_w / 2.0),
        fmt(HEIGHT - 14.0),
        escape(x_label)
    ));
    out.push_str(&format!(
        "<text x=\"18\" y=\"{}\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 18 {})\">{}</text>\n",
        fmt(MARGIN_TOP + plot_h / 2.0),
        fmt(MARGIN_TOP + plot_h / 2.0),
        escape(y_label)
    ));

    // series
    for (k, s) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        if s.points.is_empty() {
            continue;
        }
        let path: Vec<String> = s
            .points
            .iter()
            .map(|&(x, y)| format!("{},{}", fmt(px(x)), fmt(py(y))))
            .collect();
        out.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n",
            path.join(" ")
        ));
        for &(x, y) in &s.points {
            out.push_str(&format!(
                "<circle cx=\"{}\" cy=\"{}\" r=\"2.5\" fill=\"{color}\"/>\n",
                fmt(px(x)),
                fmt(py(y))
            ));
        }
        // legend entry
        let ly = MARGIN_TOP + 14.0 + 16.0 * k as f64;
        let lx = MARGIN_LEFT + plot_w - 130.0;
        out.push_str(&format!(
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{color}\" stroke-width=\"2\"/>\n",
            fmt(lx),
            fmt(ly - 4.0),
            fmt(lx + 18.0),
            fmt(ly - 4.0)
        ));
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\">{}</text>\n",
            fmt(lx + 24.0),
            fmt(ly),
            escape(&s.label)
        ));
    }

    out.push_str("</svg>\n");
    Ok(out)
}

/// A square heatmap of `|values|`, color scale fixed to [0, 1].
pub fn heatmap(title: &str, values: &[Vec<f64>]) -> Result<String> {
    let n = values.len();
    if n == 0 || values.iter().any(|row| row.len() != n) {
        return Err(Error::Argument {
            op: "heatmap",
            detail: "empty or non-square table".to_string(),
        });
    }
    let plot = 320.0f64;
    let left = 70.0f64;
    let top = 46.0f64;
    let cell = plot / n as f64;
    let width = left + plot + 90.0;
    let height = top + plot + 50.0;

    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\">\n"
    ));
    out.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    out.push_str(&format!(
        "<text x=\"{}\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\" text-anchor=\"middle\">{}</text>\n",
        fmt(left + plot / 2.0),
        escape(title)
    ));

    for (i, row) in values.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            let a = v.abs().clamp(0.0, 1.0);
            // white at 0 up to a saturated blue at 1, linear in |value|
            let r = (255.0 + (31.0 - 255.0) * a).round() as u8;
            let g = (255.0 + (119.0 - 255.0) * a).round() as u8;
            let b = (255.0 + (180.0 - 255.0) * a).round() as u8;
            out.push_str(&format!(
                "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"#{r:02x}{g:02x}{b:02x}\"/>\n",
                fmt(left + j as f64 * cell),
                fmt(top + i as f64 * cell),
                fmt(cell),
                fmt(cell)
            ));
        }
    }
    out.push_str(&format!(
        "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#333333\" stroke-width=\"1\"/>\n",
        fmt(left),
        fmt(top),
        fmt(plot),
        fmt(plot)
    ));

    // index labels for small tables
    if n <= 16 {
        for i in 0..n {
            let center = left + (i as f64 + 0.5) * cell;
            out.push_str(&format!(
                "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">{}</text>\n",
                fmt(center),
                fmt(top + plot + 16.0),
                i
            ));
            out.push_str(&format!(
                "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">{}</text>\n",
                fmt(left - 8.0),
                fmt(top + (i as f64 + 0.5) * cell + 4.0),
                i
            ));
        }
    }

    // color bar
    let bar_x = left + plot + 24.0;
    let steps = 32;
    let step_h = plot / steps as f64;
    for s in 0..steps {
        let a = 1.0 - (s as f64 + 0.5) / steps as f64;
        let r = (255.0 + (31.0 - 255.0) * a).round() as u8;
        let g = (255.0 + (119.0 - 255.0) * a).round() as u8;
        let b = (255.0 + (180.0 - 255.0) * a).round() as u8;
        out.push_str(&format!(
            "<rect x=\"{}\" y=\"{}\" width=\"14\" height=\"{}\" fill=\"#{r:02x}{g:02x}{b:02x}\"/>\n",
            fmt(bar_x),
            fmt(top + s as f64 * step_h),
            fmt(step_h + 0.5)
        ));
    }
    out.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"10\">1</text>\n",
        fmt(bar_x + 18.0),
        fmt(top + 8.0)
    ));
    out.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"10\">0</text>\n",
        fmt(bar_x + 18.0),
        fmt(top + plot)
    ));

    out.push_str("</svg>\n");
    Ok(out)
}
