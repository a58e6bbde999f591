//! Minimal deterministic SVG writer.
//!
//! All numbers are written with fixed precision through `format!`, which is
//! locale-independent; negative zero is normalized so identical geometry
//! always yields identical bytes.

use std::fmt::Write as _;

/// Axis domain and tick positions at round numbers.
#[derive(Clone, Debug, PartialEq)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub ticks: Vec<f64>,
    pub decimals: usize,
    /// Set when the data extent collapsed to a point and was padded.
    pub degenerate: bool,
}

impl Axis {
    /// Covers `[min, max]` with about five "nice" steps (1, 2 or 5 × 10^k).
    /// A zero-width extent is padded by ±0.5.
    pub fn covering(min: f64, max: f64) -> Self {
        let (mut lo, mut hi, mut degenerate) = (min, max, false);
        if !(lo.is_finite() && hi.is_finite()) {
            lo = 0.0;
            hi = 1.0;
            degenerate = true;
        } else if hi - lo <= 0.0 {
            lo -= 0.5;
            hi += 0.5;
            degenerate = true;
        }
        let step = nice_step((hi - lo) / 5.0);
        let first = (lo / step).floor();
        let last = (hi / step).ceil();
        let ticks: Vec<f64> = (0..=(last - first) as i64).map(|k| (first + k as f64) * step).collect();
        let decimals = if step >= 1.0 { 0 } else { (-step.log10().floor()) as usize };
        Self { lo: first * step, hi: last * step, ticks, decimals, degenerate }
    }

    /// Linear map of `v` from the axis domain onto `[a, b]`.
    pub fn scale(&self, v: f64, a: f64, b: f64) -> f64 {
        a + (v - self.lo) / (self.hi - self.lo) * (b - a)
    }

    pub fn label(&self, v: f64) -> String {
        fmt_fixed(v, self.decimals)
    }
}

fn nice_step(rough: f64) -> f64 {
    let mag = 10f64.powf(rough.log10().floor());
    let residual = rough / mag;
    let nice = if residual <= 1.0 {
        1.0
    } else if residual <= 2.0 {
        2.0
    } else if residual <= 5.0 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

/// Fixed-precision formatting with negative zero folded to zero.
pub fn fmt_fixed(v: f64, decimals: usize) -> String {
    let s = format!("{v:.decimals$}");
    if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
        s[1..].to_string()
    } else {
        s
    }
}

/// Pixel coordinate.
pub fn px(v: f64) -> String {
    fmt_fixed(v, 2)
}

/// 17-significant-digit scientific form, matching the JSON twins.
pub fn exact(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

/// Accumulates SVG elements into a string.
pub struct SvgWriter {
    buf: String,
    pub font: String,
}

impl SvgWriter {
    pub fn new(width: f64, height: f64, figure: &str, font: &str, attrs: &[(&str, String)]) -> Self {
        let mut buf = String::new();
        buf.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
        let _ = write!(
            buf,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\" data-figure=\"{figure}\"",
            w = px(width),
            h = px(height),
        );
        for (k, v) in attrs {
            let _ = write!(buf, " {k}=\"{}\"", escape(v));
        }
        buf.push_str(">\n");
        let _ =
            writeln!(buf, "<rect x=\"0\" y=\"0\" width=\"{}\" height=\"{}\" fill=\"#ffffff\"/>", px(width), px(height));
        Self { buf, font: font.to_string() }
    }

    pub fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, fill: &str, extra: &str) {
        let _ = writeln!(
            self.buf,
            "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{fill}\"{extra}/>",
            px(x),
            px(y),
            px(w.max(0.0)),
            px(h.max(0.0))
        );
    }

    #[allow(clippy::too_many_arguments)]
    pub fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, stroke: &str, width: f64, dash: bool) {
        let dash = if dash { " stroke-dasharray=\"4 3\"" } else { "" };
        let _ = writeln!(
            self.buf,
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{stroke}\" stroke-width=\"{}\"{dash}/>",
            px(x1),
            px(y1),
            px(x2),
            px(y2),
            px(width)
        );
    }

    pub fn circle(&mut self, cx: f64, cy: f64, r: f64, fill: &str) {
        let _ = writeln!(self.buf, "<circle cx=\"{}\" cy=\"{}\" r=\"{}\" fill=\"{fill}\"/>", px(cx), px(cy), px(r));
    }

    pub fn polyline(&mut self, points: &[(f64, f64)], stroke: &str, width: f64) {
        let pts: Vec<String> = points.iter().map(|(x, y)| format!("{},{}", px(*x), px(*y))).collect();
        let _ = writeln!(
            self.buf,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{stroke}\" stroke-width=\"{}\"/>",
            pts.join(" "),
            px(width)
        );
    }

    pub fn polygon(&mut self, points: &[(f64, f64)], fill: &str) {
        let pts: Vec<String> = points.iter().map(|(x, y)| format!("{},{}", px(*x), px(*y))).collect();
        let _ = writeln!(self.buf, "<polygon points=\"{}\" fill=\"{fill}\"/>", pts.join(" "));
    }

    /// `anchor` is `start`, `middle` or `end`.
    pub fn text(&mut self, x: f64, y: f64, size: f64, anchor: &str, content: &str, extra: &str) {
        let _ = writeln!(
            self.buf,
            "<text x=\"{}\" y=\"{}\" font-family=\"{}\" font-size=\"{}\" text-anchor=\"{anchor}\"{extra}>{}</text>",
            px(x),
            px(y),
            escape(&self.font),
            px(size),
            escape(content)
        );
    }

    pub fn raw(&mut self, s: &str) {
        self.buf.push_str(s);
    }

    /// Horizontal axis with ticks and labels below `y`.
    pub fn x_axis(&mut self, axis: &Axis, left: f64, right: f64, y: f64, title: &str) {
        self.line(left, y, right, y, "#333333", 1.0, false);
        for &t in &axis.ticks {
            let x = axis.scale(t, left, right);
            self.line(x, y, x, y + 5.0, "#333333", 1.0, false);
            self.text(x, y + 18.0, 11.0, "middle", &axis.label(t), "");
        }
        self.text((left + right) / 2.0, y + 36.0, 12.0, "middle", title, "");
    }

    /// Vertical axis with ticks and labels left of `x`.
    pub fn y_axis(&mut self, axis: &Axis, top: f64, bottom: f64, x: f64, title: &str) {
        self.line(x, top, x, bottom, "#333333", 1.0, false);
        for &t in &axis.ticks {
            let y = axis.scale(t, bottom, top);
            self.line(x - 5.0, y, x, y, "#333333", 1.0, false);
            self.text(x - 8.0, y + 4.0, 11.0, "end", &axis.label(t), "");
        }
        let cy = (top + bottom) / 2.0;
        let _ = writeln!(
            self.buf,
            "<text x=\"{}\" y=\"{}\" font-family=\"{}\" font-size=\"12.00\" text-anchor=\"middle\" transform=\"rotate(-90 {} {})\">{}</text>",
            px(x - 48.0),
            px(cy),
            escape(&self.font),
            px(x - 48.0),
            px(cy),
            escape(title)
        );
    }

    pub fn finish(mut self) -> String {
        self.buf.push_str("</svg>\n");
        self.buf
    }
}
