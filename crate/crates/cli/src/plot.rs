//! Static SVG figures: adjacency heatmaps and simple line charts.

use std::fmt::Write;

use agcn_core::Matrix;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// White (0) to dark blue (1); values outside the unit interval are clamped.
fn shade(v: f64) -> String {
    let t = if v.is_finite() { v.clamp(0.0, 1.0) } else { 0.0 };
    let mix = |hi: f64, lo: f64| (hi + (lo - hi) * t).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(255.0, 8.0), mix(255.0, 48.0), mix(255.0, 107.0))
}

/// Groups labels by connected component of a 0/1 same-block matrix, in
/// order of first appearance. Returns the label order and the group sizes.
pub fn block_order(same_block: &Matrix) -> (Vec<usize>, Vec<usize>) {
    let c = same_block.rows();
    let mut seen = vec![false; c];
    let (mut order, mut sizes) = (Vec::new(), Vec::new());
    for start in 0..c {
        if seen[start] {
            continue;
        }
        let before = order.len();
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(i) = stack.pop() {
            order.push(i);
            for j in 0..c {
                if !seen[j] && same_block[(i, j)] != 0.0 {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        order[before..].sort_unstable();
        sizes.push(order.len() - before);
    }
    (order, sizes)
}

/// Heatmap of `m` with rows and columns shown in `order`; `groups` draws
/// separators after each group of that many labels.
pub fn heatmap_svg(title: &str, labels: &[String], m: &Matrix, order: &[usize], groups: &[usize], cell: usize) -> String {
    let c = order.len();
    let margin = 12 + 7 * labels.iter().map(|l| l.chars().count()).max().unwrap_or(1);
    let top = margin + 24;
    let side = c * cell;
    let (w, h) = (margin + side + 70, top + side + 10);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<text x="{margin}" y="16" font-size="14">{}</text>"#, escape(title));
    for (r, &i) in order.iter().enumerate() {
        let y = top + r * cell;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
            margin - 4,
            y + cell / 2 + 4,
            escape(&labels[i])
        );
        let x = margin + r * cell + cell / 2;
        let _ = writeln!(
            s,
            r#"<text x="{x}" y="{}" transform="rotate(-90 {x} {})">{}</text>"#,
            top - 4,
            top - 4,
            escape(&labels[i])
        );
        for (k, &j) in order.iter().enumerate() {
            let v = m[(i, j)];
            let _ = writeln!(
                s,
                r#"<rect x="{}" y="{y}" width="{cell}" height="{cell}" fill="{}"><title>{} / {}: {v:.4}</title></rect>"#,
                margin + k * cell,
                shade(v),
                escape(&labels[i]),
                escape(&labels[j])
            );
        }
    }
    let mut edge = 0;
    for &g in groups.iter().take(groups.len().saturating_sub(1)) {
        edge += g * cell;
        let _ = writeln!(
            s,
            r##"<line x1="{}" y1="{top}" x2="{}" y2="{}" stroke="#d62728"/><line x1="{margin}" y1="{}" x2="{}" y2="{}" stroke="#d62728"/>"##,
            margin + edge,
            margin + edge,
            top + side,
            top + edge,
            margin + side,
            top + edge
        );
    }
    // Colour bar.
    let bx = margin + side + 16;
    for k in 0..=10 {
        let v = 1.0 - k as f64 / 10.0;
        let y = top + k * side / 11;
        let _ = writeln!(s, r#"<rect x="{bx}" y="{y}" width="14" height="{}" fill="{}"/>"#, side / 11 + 1, shade(v));
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}">1</text>"#, bx + 18, top + 10);
    let _ = writeln!(s, r#"<text x="{}" y="{}">0</text>"#, bx + 18, top + side);
    s.push_str("</svg>\n");
    s
}

pub struct Series {
    pub name: String,
    /// Non-finite `y` values are skipped.
    pub points: Vec<(f64, f64)>,
}

const PALETTE: [&str; 5] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd"];

pub fn line_chart_svg(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let (w, h, left, right, top, bottom) = (640.0, 400.0, 64.0, 150.0, 36.0, 48.0);
    let finite: Vec<(f64, f64)> = series
        .iter()
        .flat_map(|s| s.points.iter().copied())
        .filter(|(x, y)| x.is_finite() && y.is_finite())
        .collect();
    let span = |it: &mut dyn Iterator<Item = f64>| {
        let (lo, hi) = it.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        if !lo.is_finite() {
            (0.0, 1.0)
        } else if hi - lo < 1e-12 {
            (lo - 0.5, hi + 0.5)
        } else {
            (lo, hi)
        }
    };
    let (x0, x1) = span(&mut finite.iter().map(|p| p.0));
    let (y0, y1) = span(&mut finite.iter().map(|p| p.1));
    let (pw, ph) = (w - left - right, h - top - bottom);
    let px = |x: f64| left + (x - x0) / (x1 - x0) * pw;
    let py = |y: f64| top + ph - (y - y0) / (y1 - y0) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<text x="{left}" y="20" font-size="14">{}</text>"#, escape(title));
    let _ = writeln!(
        s,
        r##"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>"##
    );
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            px(xv),
            top + ph + 16.0,
            tick(xv)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            left - 6.0,
            py(yv) + 4.0,
            tick(yv)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        left + pw / 2.0,
        h - 10.0,
        escape(x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{:.1}" transform="rotate(-90 14 {:.1})" text-anchor="middle">{}</text>"#,
        top + ph / 2.0,
        top + ph / 2.0,
        escape(y_label)
    );
    for (k, ser) in series.iter().enumerate() {
        let colour = PALETTE[k % PALETTE.len()];
        let pts: Vec<String> = ser
            .points
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        if pts.len() > 1 {
            let _ = writeln!(
                s,
                r#"<polyline fill="none" stroke="{colour}" stroke-width="2" points="{}"/>"#,
                pts.join(" ")
            );
        }
        for p in &pts {
            let (cx, cy) = p.split_once(',').unwrap();
            let _ = writeln!(s, r#"<circle cx="{cx}" cy="{cy}" r="3" fill="{colour}"/>"#);
        }
        let ly = top + 14.0 + 18.0 * k as f64;
        let _ = writeln!(
            s,
            r#"<rect x="{:.1}" y="{:.1}" width="12" height="3" fill="{colour}"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            left + pw + 12.0,
            ly - 4.0,
            left + pw + 30.0,
            ly,
            escape(&ser.name)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-2) {
        format!("{v:.1e}")
    } else {
        format!("{v:.3}")
    }
}
