//! Minimal standalone SVG: polylines with axis ticks, and cell grids. The
//! plotted numbers are embedded verbatim as CSV in a `<metadata>` block.

use std::fmt::Write as _;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 56.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#7f7f7f"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn metadata(out: &mut String, data_csv: &str) {
    let _ = writeln!(out, "<metadata id=\"data\"><![CDATA[\n{}]]></metadata>", data_csv.replace("]]>", "]] >"));
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

/// One polyline per series over the shared `xs`.
pub fn line_plot(title: &str, x_label: &str, xs: &[f64], series: &[(String, Vec<f64>)], data_csv: &str) -> String {
    let (x0, x1) = range(xs.iter().copied());
    let (y0, y1) = range(series.iter().flat_map(|(_, ys)| ys.iter().copied()));
    let px = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let py = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" font-family=\"sans-serif\" font-size=\"11\">"
    );
    let _ = writeln!(out, "<title>{}</title>", escape(title));
    metadata(&mut out, data_csv);
    let _ = writeln!(out, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>");
    let _ = writeln!(out, "<text x=\"{}\" y=\"20\" text-anchor=\"middle\" font-size=\"13\">{}</text>", WIDTH / 2.0, escape(title));
    let (left, right, top, bottom) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(out, "<path d=\"M{left} {top} V{bottom} H{right}\" stroke=\"black\" fill=\"none\"/>");
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        let (tx, ty) = (px(xv), py(yv));
        let _ = writeln!(out, "<line x1=\"{tx:.2}\" y1=\"{bottom}\" x2=\"{tx:.2}\" y2=\"{}\" stroke=\"black\"/>", bottom + 4.0);
        let _ = writeln!(out, "<text x=\"{tx:.2}\" y=\"{}\" text-anchor=\"middle\">{xv:.3}</text>", bottom + 16.0);
        let _ = writeln!(out, "<line x1=\"{}\" y1=\"{ty:.2}\" x2=\"{left}\" y2=\"{ty:.2}\" stroke=\"black\"/>", left - 4.0);
        let _ = writeln!(out, "<text x=\"{}\" y=\"{:.2}\" text-anchor=\"end\">{yv:.3}</text>", left - 6.0, ty + 4.0);
    }
    let _ = writeln!(out, "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>", WIDTH / 2.0, HEIGHT - 16.0, escape(x_label));
    for (k, (name, ys)) in series.iter().enumerate() {
        let colour = PALETTE[k % PALETTE.len()];
        let points: Vec<String> = xs
            .iter()
            .zip(ys)
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|(&x, &y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        let _ = writeln!(out, "<polyline points=\"{}\" stroke=\"{colour}\" fill=\"none\" stroke-width=\"1.5\"/>", points.join(" "));
        let ly = top + 14.0 * k as f64;
        let _ = writeln!(out, "<line x1=\"{}\" y1=\"{ly}\" x2=\"{}\" y2=\"{ly}\" stroke=\"{colour}\" stroke-width=\"2\"/>", right - 90.0, right - 70.0);
        let _ = writeln!(out, "<text x=\"{}\" y=\"{}\">{}</text>", right - 66.0, ly + 4.0, escape(name));
    }
    out.push_str("</svg>\n");
    out
}

/// Grid of `rows x cols` cells shaded from white (0) to dark blue (max).
pub fn heat_grid(title: &str, cells: &[Vec<f64>], data_csv: &str) -> String {
    let rows = cells.len();
    let cols = cells.first().map_or(0, Vec::len);
    let size = 14.0;
    let (w, h) = (cols as f64 * size + 2.0 * 20.0, rows as f64 * size + 50.0);
    let max = cells.iter().flatten().copied().fold(0.0, f64::max);
    let mut out = String::new();
    let _ = writeln!(out, "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" font-family=\"sans-serif\" font-size=\"12\">");
    let _ = writeln!(out, "<title>{}</title>", escape(title));
    metadata(&mut out, data_csv);
    let _ = writeln!(out, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>");
    let _ = writeln!(out, "<text x=\"{}\" y=\"20\" text-anchor=\"middle\">{}</text>", w / 2.0, escape(title));
    for (r, row) in cells.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            let f = if max > 0.0 { (v / max).clamp(0.0, 1.0) } else { 0.0 };
            let shade = |dark: f64| (255.0 - f * (255.0 - dark)).round() as u8;
            let (red, green, blue) = (shade(8.0), shade(48.0), shade(107.0));
            let _ = writeln!(
                out,
                "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"{size}\" height=\"{size}\" fill=\"rgb({red},{green},{blue})\"/>",
                20.0 + c as f64 * size,
                30.0 + r as f64 * size
            );
        }
    }
    out.push_str("</svg>\n");
    out
}
