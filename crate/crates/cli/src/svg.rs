//! Minimal deterministic SVG rendering for the report bundle.

use std::fmt::Write as _;

pub struct SvgCanvas {
    width: f64,
    height: f64,
    body: String,
}

fn fmt(v: f64) -> String {
    format!("{:.2}", v)
}

impl SvgCanvas {
    pub fn new(width: f64, height: f64) -> SvgCanvas {
        SvgCanvas {
            width,
            height,
            body: String::new(),
        }
    }

    pub fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, fill: &str, stroke: &str) {
        let _ = writeln!(
            self.body,
            r#"<rect x="{}" y="{}" width="{}" height="{}" fill="{}" stroke="{}"/>"#,
            fmt(x),
            fmt(y),
            fmt(w.max(0.0)),
            fmt(h.max(0.0)),
            fill,
            stroke
        );
    }

    pub fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, stroke: &str, width: f64) {
        let _ = writeln!(
            self.body,
            r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="{}" stroke-width="{}"/>"#,
            fmt(x1),
            fmt(y1),
            fmt(x2),
            fmt(y2),
            stroke,
            fmt(width)
        );
    }

    pub fn dashed_line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, stroke: &str) {
        let _ = writeln!(
            self.body,
            r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="{}" stroke-width="1" stroke-dasharray="4 3"/>"#,
            fmt(x1),
            fmt(y1),
            fmt(x2),
            fmt(y2),
            stroke
        );
    }

    pub fn circle(&mut self, x: f64, y: f64, r: f64, fill: &str) {
        let _ = writeln!(
            self.body,
            r#"<circle cx="{}" cy="{}" r="{}" fill="{}"/>"#,
            fmt(x),
            fmt(y),
            fmt(r),
            fill
        );
    }

    pub fn text(&mut self, x: f64, y: f64, size: f64, anchor: &str, content: &str) {
        let escaped = content
            .replace('&', "&amp;")
            .replace('<', "&lt;")
            .replace('>', "&gt;");
        let _ = writeln!(
            self.body,
            r#"<text x="{}" y="{}" font-size="{}" font-family="sans-serif" text-anchor="{}">{}</text>"#,
            fmt(x),
            fmt(y),
            fmt(size),
            anchor,
            escaped
        );
    }

    pub fn text_rotated(&mut self, x: f64, y: f64, size: f64, content: &str) {
        let escaped = content
            .replace('&', "&amp;")
            .replace('<', "&lt;")
            .replace('>', "&gt;");
        let _ = writeln!(
            self.body,
            r#"<text x="{}" y="{}" font-size="{}" font-family="sans-serif" text-anchor="end" transform="rotate(-45 {} {})">{}</text>"#,
            fmt(x),
            fmt(y),
            fmt(size),
            fmt(x),
            fmt(y),
            escaped
        );
    }

    pub fn finish(self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{}</svg>\n",
            fmt(self.width),
            fmt(self.height),
            fmt(self.width),
            fmt(self.height),
            self.body
        )
    }
}

/// Five-number summary used by the boxplots.
pub struct BoxStats {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

pub fn box_stats(values: &[f64]) -> BoxStats {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let q = |p: f64| -> f64 {
        if v.is_empty() {
            return f64::NAN;
        }
        let pos = p * (v.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        if lo == hi {
            v[lo]
        } else {
            v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
        }
    };
    BoxStats {
        min: q(0.0),
        q1: q(0.25),
        median: q(0.5),
        q3: q(0.75),
        max: q(1.0),
    }
}

/// Renders grouped boxplots (one box per label).
pub fn render_boxplot(title: &str, labels: &[String], groups: &[Vec<f64>]) -> String {
    let width = 640.0;
    let height = 420.0;
    let margin_left = 70.0;
    let margin_bottom = 60.0;
    let margin_top = 40.0;
    let plot_w = width - margin_left - 30.0;
    let plot_h = height - margin_top - margin_bottom;
    let mut canvas = SvgCanvas::new(width, height);
    canvas.text(width / 2.0, 22.0, 16.0, "middle", title);

    let all: Vec<f64> = groups
        .iter()
        .flatten()
        .copied()
        .filter(|v| v.is_finite())
        .collect();
    let (lo, hi) = if all.is_empty() {
        (0.0, 1.0)
    } else {
        let lo = all.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = all.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let pad = ((hi - lo) * 0.1).max(1e-6);
        (lo - pad, hi + pad)
    };
    let y_of = |v: f64| margin_top + plot_h * (1.0 - (v - lo) / (hi - lo));

    // Axis with 5 ticks.
    canvas.line(
        margin_left,
        margin_top,
        margin_left,
        margin_top + plot_h,
        "black",
        1.0,
    );
    canvas.line(
        margin_left,
        margin_top + plot_h,
        margin_left + plot_w,
        margin_top + plot_h,
        "black",
        1.0,
    );
    for t in 0..=4 {
        let v = lo + (hi - lo) * t as f64 / 4.0;
        let y = y_of(v);
        canvas.line(margin_left - 4.0, y, margin_left, y, "black", 1.0);
        canvas.text(margin_left - 8.0, y + 4.0, 11.0, "end", &format!("{v:.3}"));
    }

    let slot = plot_w / labels.len() as f64;
    for (i, (label, values)) in labels.iter().zip(groups).enumerate() {
        let cx = margin_left + slot * (i as f64 + 0.5);
        let bw = slot * 0.5;
        let s = box_stats(values);
        if s.median.is_finite() {
            canvas.line(cx, y_of(s.min), cx, y_of(s.q1), "black", 1.0);
            canvas.line(cx, y_of(s.q3), cx, y_of(s.max), "black", 1.0);
            canvas.line(
                cx - bw / 4.0,
                y_of(s.min),
                cx + bw / 4.0,
                y_of(s.min),
                "black",
                1.0,
            );
            canvas.line(
                cx - bw / 4.0,
                y_of(s.max),
                cx + bw / 4.0,
                y_of(s.max),
                "black",
                1.0,
            );
            canvas.rect(
                cx - bw / 2.0,
                y_of(s.q3),
                bw,
                (y_of(s.q1) - y_of(s.q3)).max(0.5),
                "#9ecae1",
                "black",
            );
            canvas.line(
                cx - bw / 2.0,
                y_of(s.median),
                cx + bw / 2.0,
                y_of(s.median),
                "black",
                2.0,
            );
        }
        canvas.text(cx, margin_top + plot_h + 18.0, 12.0, "middle", label);
    }
    canvas.finish()
}

/// Lower-triangle heatmap of pairwise values in [0, 1].
pub fn render_lower_triangle_heatmap(
    title: &str,
    labels: &[String],
    values: &dyn Fn(usize, usize) -> Option<f64>,
) -> String {
    let n = labels.len();
    let cell = 64.0;
    let margin = 90.0;
    let width = margin + cell * n as f64 + 30.0;
    let height = margin + cell * n as f64 + 40.0;
    let mut canvas = SvgCanvas::new(width, height);
    canvas.text(width / 2.0, 24.0, 16.0, "middle", title);
    for row in 1..n {
        for col in 0..row {
            let Some(p) = values(row, col) else { continue };
            // Significant pairs (small p) render warm, the rest cool.
            let clamped = p.clamp(0.0, 1.0);
            let red = (235.0 - 160.0 * clamped) as u8;
            let blue = (90.0 + 150.0 * clamped) as u8;
            let color = format!("rgb({red},120,{blue})");
            let x = margin + col as f64 * cell;
            let y = margin + row as f64 * cell - cell;
            canvas.rect(x, y, cell - 2.0, cell - 2.0, &color, "white");
            canvas.text(
                x + cell / 2.0 - 1.0,
                y + cell / 2.0 + 4.0,
                11.0,
                "middle",
                &format!("{p:.3}"),
            );
        }
    }
    for (i, label) in labels.iter().enumerate() {
        if i >= 1 {
            canvas.text(
                margin - 8.0,
                margin + i as f64 * cell - cell / 2.0 + 4.0,
                12.0,
                "end",
                label,
            );
        }
        if i < n - 1 {
            canvas.text(
                margin + i as f64 * cell + cell / 2.0,
                margin + (n - 1) as f64 * cell + 16.0,
                12.0,
                "middle",
                label,
            );
        }
    }
    canvas.finish()
}

/// Calibration curves: observed fraction vs mean predicted per bin, one
/// polyline per method, with the diagonal reference.
pub fn render_calibration_curves(title: &str, series: &[(String, Vec<(f64, f64)>)]) -> String {
    let width = 460.0;
    let height = 460.0;
    let margin = 60.0;
    let plot = width - 2.0 * margin;
    let mut canvas = SvgCanvas::new(width, height);
    canvas.text(width / 2.0, 24.0, 15.0, "middle", title);
    let x_of = |v: f64| margin + plot * v;
    let y_of = |v: f64| height - margin - plot * v;
    canvas.line(
        margin,
        height - margin,
        margin + plot,
        height - margin,
        "black",
        1.0,
    );
    canvas.line(margin, margin, margin, height - margin, "black", 1.0);
    canvas.dashed_line(x_of(0.0), y_of(0.0), x_of(1.0), y_of(1.0), "gray");
    for t in 0..=4 {
        let v = t as f64 / 4.0;
        canvas.text(
            x_of(v),
            height - margin + 16.0,
            10.0,
            "middle",
            &format!("{v:.2}"),
        );
        canvas.text(margin - 8.0, y_of(v) + 4.0, 10.0, "end", &format!("{v:.2}"));
    }
    let palette = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"];
    for (si, (name, points)) in series.iter().enumerate() {
        let color = palette[si % palette.len()];
        for pair in points.windows(2) {
            canvas.line(
                x_of(pair[0].0),
                y_of(pair[0].1),
                x_of(pair[1].0),
                y_of(pair[1].1),
                color,
                1.5,
            );
        }
        for &(px, py) in points {
            canvas.circle(x_of(px), y_of(py), 3.0, color);
        }
        canvas.text(
            margin + 8.0,
            margin + 14.0 * (si as f64 + 1.0),
            11.0,
            "start",
            name,
        );
        canvas.circle(
            margin + 2.0,
            margin + 14.0 * (si as f64 + 1.0) - 4.0,
            3.0,
            color,
        );
    }
    canvas.text(
        width / 2.0,
        height - 16.0,
        11.0,
        "middle",
        "mean predicted probability",
    );
    canvas.finish()
}

/// Horizontal bar chart with standard-deviation whiskers.
pub fn render_bar_chart(
    title: &str,
    labels: &[String],
    values: &[f64],
    whiskers: &[f64],
) -> String {
    let bar_h = 22.0;
    let margin_left = 260.0;
    let width = 640.0;
    let height = 70.0 + bar_h * labels.len() as f64;
    let plot_w = width - margin_left - 60.0;
    let vmax = values
        .iter()
        .zip(whiskers)
        .map(|(v, w)| v + w)
        .fold(1e-12f64, f64::max);
    let mut canvas = SvgCanvas::new(width, height);
    canvas.text(width / 2.0, 24.0, 15.0, "middle", title);
    for (i, ((label, &v), &w)) in labels.iter().zip(values).zip(whiskers).enumerate() {
        let y = 46.0 + bar_h * i as f64;
        let bw = plot_w * v / vmax;
        canvas.rect(margin_left, y, bw, bar_h - 6.0, "#3182bd", "none");
        let wy = y + (bar_h - 6.0) / 2.0;
        canvas.line(
            margin_left + bw,
            wy,
            margin_left + plot_w * (v + w) / vmax,
            wy,
            "black",
            1.0,
        );
        canvas.text(margin_left - 6.0, y + bar_h - 10.0, 11.0, "end", label);
        canvas.text(
            margin_left + bw + 4.0,
            y + bar_h - 10.0,
            10.0,
            "start",
            &format!("{v:.4}"),
        );
    }
    canvas.finish()
}

/// Beeswarm-style scatter: one row per feature, x = attribution, color by
/// the raw feature value's within-feature rank.
pub fn render_beeswarm(
    title: &str,
    features: &[String],
    points: &[(usize, f64, f64)], // (feature index, phi, raw value)
) -> String {
    let row_h = 26.0;
    let margin_left = 260.0;
    let width = 680.0;
    let height = 70.0 + row_h * features.len() as f64;
    let plot_w = width - margin_left - 40.0;
    let phi_max = points
        .iter()
        .map(|(_, phi, _)| phi.abs())
        .fold(1e-12f64, f64::max);
    // Per-feature raw-value ranges for the color scale.
    let mut ranges: Vec<(f64, f64)> = vec![(f64::INFINITY, f64::NEG_INFINITY); features.len()];
    for &(fi, _, raw) in points {
        ranges[fi].0 = ranges[fi].0.min(raw);
        ranges[fi].1 = ranges[fi].1.max(raw);
    }
    let mut canvas = SvgCanvas::new(width, height);
    canvas.text(width / 2.0, 24.0, 15.0, "middle", title);
    let x_of = |phi: f64| margin_left + plot_w / 2.0 + (phi / phi_max) * plot_w / 2.0;
    canvas.dashed_line(x_of(0.0), 40.0, x_of(0.0), height - 20.0, "gray");
    for (i, feat) in features.iter().enumerate() {
        let y = 52.0 + row_h * i as f64;
        canvas.text(margin_left - 6.0, y + 4.0, 11.0, "end", feat);
        for &(fi, phi, raw) in points.iter().filter(|(fi, _, _)| *fi == i) {
            let (lo, hi) = ranges[fi];
            let t = if hi > lo { (raw - lo) / (hi - lo) } else { 0.5 };
            let red = (60.0 + 180.0 * t) as u8;
            let blue = (240.0 - 180.0 * t) as u8;
            // Deterministic vertical jitter from the raw value bits.
            let jitter = ((raw.to_bits() ^ phi.to_bits()) % 9) as f64 - 4.0;
            canvas.circle(x_of(phi), y + jitter, 2.2, &format!("rgb({red},80,{blue})"));
        }
    }
    canvas.text(
        width / 2.0,
        height - 6.0,
        11.0,
        "middle",
        "attribution (probability units)",
    );
    canvas.finish()
}
