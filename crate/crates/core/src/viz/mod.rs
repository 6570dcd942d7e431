//! Standalone SVG figures: confidence-ribbon line plots, per-step boxplots
//! and MDS trajectory frames.

mod boxplot;
mod frames;
mod lines;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::soup::Algorithm;

pub use boxplot::{render_boxplots, whisker_bounds, BoxGroup};
pub use frames::{frame_roles, render_mds_frames, FrameRole, MdsScene};
pub use lines::{render_ci_lines, CiPanel};

#[derive(Debug, Error, PartialEq)]
pub enum VizError {
    #[error("nothing to plot: {0}")]
    Empty(String),
    #[error("no embedded point for {0}")]
    MissingPoint(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlotKind {
    CiLines,
    Boxplot,
    MdsFrame,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefLine {
    pub value: f64,
    pub dashed: bool,
}

/// Layout and labelling shared by every figure. Pixel sizes are per panel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlotSpec {
    pub kind: PlotKind,
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub reference_lines: Vec<RefLine>,
    /// Fixed y domain; fitted to the data when absent.
    pub y_range: Option<(f64, f64)>,
    pub panel_width: f64,
    pub panel_height: f64,
    pub margin_left: f64,
    pub margin_right: f64,
    pub margin_top: f64,
    pub margin_bottom: f64,
    /// Written into the document as an XML comment.
    pub comment: Option<String>,
}

impl PlotSpec {
    pub fn new(kind: PlotKind, title: &str, x_label: &str, y_label: &str) -> Self {
        Self {
            kind,
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            reference_lines: Vec::new(),
            y_range: None,
            panel_width: 420.0,
            panel_height: 300.0,
            margin_left: 60.0,
            margin_right: 20.0,
            margin_top: 40.0,
            margin_bottom: 50.0,
            comment: None,
        }
    }

    /// Boxplot of selection quantiles with the chance line at 0.5.
    pub fn quantile_boxplot(title: &str, x_label: &str) -> Self {
        let mut s = Self::new(PlotKind::Boxplot, title, x_label, "quantile");
        s.reference_lines.push(RefLine { value: 0.5, dashed: true });
        s.y_range = Some((0.0, 1.0));
        s
    }

    pub fn with_comment(mut self, comment: Option<String>) -> Self {
        self.comment = comment;
        self
    }

    /// Plot area of panel `i` (left, top, right, bottom).
    pub fn plot_box(&self, i: usize) -> Rect {
        let x0 = i as f64 * self.panel_width;
        Rect {
            left: x0 + self.margin_left,
            top: self.margin_top,
            right: x0 + self.panel_width - self.margin_right,
            bottom: self.panel_height - self.margin_bottom,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect {
    pub left: f64,
    pub top: f64,
    pub right: f64,
    pub bottom: f64,
}

/// Affine map from a data interval onto a pixel interval.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Axis {
    pub d0: f64,
    pub d1: f64,
    pub p0: f64,
    pub p1: f64,
}

impl Axis {
    /// Data intervals narrower than rounding noise are widened around their
    /// midpoint so the map stays invertible.
    pub fn new(d0: f64, d1: f64, p0: f64, p1: f64) -> Self {
        let (d0, d1) = if d1 - d0 > 1e-9 * d0.abs().max(d1.abs()) {
            (d0, d1)
        } else {
            let mid = (d0 + d1) / 2.0;
            let pad = (mid.abs() * 0.05).max(0.01);
            (mid - pad, mid + pad)
        };
        Self { d0, d1, p0, p1 }
    }

    pub fn map(&self, v: f64) -> f64 {
        self.p0 + (v - self.d0) * (self.p1 - self.p0) / (self.d1 - self.d0)
    }

    pub fn invert(&self, p: f64) -> f64 {
        self.d0 + (p - self.p0) * (self.d1 - self.d0) / (self.p1 - self.p0)
    }
}

/// Pixel coordinates are written with two decimals.
pub fn px(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

/// Step of 1, 2 or 5 times a power of ten giving about `target` ticks.
pub fn ticks(lo: f64, hi: f64, target: usize) -> Vec<f64> {
    if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
        return vec![lo];
    }
    let raw = (hi - lo) / target.max(1) as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn tick_label(v: f64) -> String {
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

pub fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

pub fn algorithm_color(a: Algorithm) -> &'static str {
    match a {
        Algorithm::Greedy => "#1f77b4",
        Algorithm::Greedier => "#d62728",
        Algorithm::RankedDiversity => "#2ca02c",
        Algorithm::RankedEuclidean => "#9467bd",
    }
}

/// Cycling qualitative colours for integer classes.
pub fn class_color(k: usize) -> &'static str {
    const C: [&str; 10] =
        ["#440154", "#482878", "#3e4989", "#31688e", "#26828e", "#1f9e89", "#35b779", "#6ece58", "#b5de2b", "#fde725"];
    C[k % C.len()]
}

/// Light-to-dark blue ramp for `v` in [0, 1].
pub fn ramp_color(v: f64) -> String {
    let v = if v.is_finite() { v.clamp(0.0, 1.0) } else { 0.0 };
    let lerp = |a: f64, b: f64| (a + (b - a) * v).round() as u8;
    format!("#{:02x}{:02x}{:02x}", lerp(240.0, 33.0), lerp(244.0, 102.0), lerp(250.0, 172.0))
}

/// Minimal SVG document builder.
pub(crate) struct Svg {
    body: String,
    width: f64,
    height: f64,
}

impl Svg {
    pub(crate) fn new(width: f64, height: f64, spec: &PlotSpec) -> Self {
        let mut body = String::new();
        if let Some(c) = &spec.comment {
            // "--" is not allowed inside XML comments
            let _ = writeln!(body, "<!-- {} -->", c.replace("--", "- -"));
        }
        let _ = writeln!(body, r#"<rect class="background" x="0" y="0" width="{}" height="{}" fill="white"/>"#, px(width), px(height));
        if !spec.title.is_empty() {
            let _ = writeln!(
                body,
                r#"<text class="title" x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
                px(width / 2.0),
                escape(&spec.title)
            );
        }
        Self { body, width, height }
    }

    pub(crate) fn push(&mut self, element: &str) {
        self.body.push_str(element);
        self.body.push('\n');
    }

    pub(crate) fn text(&mut self, class: &str, x: f64, y: f64, anchor: &str, text: &str) {
        self.push(&format!(
            r#"<text class="{class}" x="{}" y="{}" text-anchor="{anchor}" font-size="11">{}</text>"#,
            px(x),
            px(y),
            escape(text)
        ));
    }

    pub(crate) fn line(&mut self, class: &str, a: (f64, f64), b: (f64, f64), stroke: &str, extra: &str) {
        self.push(&format!(
            r#"<line class="{class}" x1="{}" y1="{}" x2="{}" y2="{}" stroke="{stroke}"{extra}/>"#,
            px(a.0),
            px(a.1),
            px(b.0),
            px(b.1)
        ));
    }

    /// Frame, ticks and axis labels of one panel.
    pub(crate) fn axes(&mut self, r: Rect, x: &Axis, y: &Axis, x_ticks: &[f64], spec: &PlotSpec, panel_title: &str) {
        self.push(&format!(
            r##"<rect class="frame" x="{}" y="{}" width="{}" height="{}" fill="none" stroke="#444"/>"##,
            px(r.left),
            px(r.top),
            px(r.right - r.left),
            px(r.bottom - r.top)
        ));
        for &t in x_ticks {
            let p = x.map(t);
            self.line("tick", (p, r.bottom), (p, r.bottom + 4.0), "#444", "");
            self.text("tick-label", p, r.bottom + 16.0, "middle", &tick_label(t));
        }
        for t in ticks(y.d0, y.d1, 5) {
            let p = y.map(t);
            self.line("tick", (r.left - 4.0, p), (r.left, p), "#444", "");
            self.text("tick-label", r.left - 6.0, p + 4.0, "end", &tick_label(t));
        }
        let cx = (r.left + r.right) / 2.0;
        self.text("axis-label", cx, r.bottom + 34.0, "middle", &spec.x_label);
        let cy = (r.top + r.bottom) / 2.0;
        self.push(&format!(
            r#"<text class="axis-label" x="{}" y="{}" text-anchor="middle" font-size="11" transform="rotate(-90 {} {})">{}</text>"#,
            px(r.left - 42.0),
            px(cy),
            px(r.left - 42.0),
            px(cy),
            escape(&spec.y_label)
        ));
        if !panel_title.is_empty() {
            self.text("panel-title", cx, r.top - 6.0, "middle", panel_title);
        }
    }

    pub(crate) fn reference_lines(&mut self, r: Rect, y: &Axis, spec: &PlotSpec) {
        for rl in &spec.reference_lines {
            let p = y.map(rl.value);
            let dash = if rl.dashed { r#" stroke-dasharray="6 4""# } else { "" };
            let extra = format!(r#" data-value="{}" stroke-width="1.5"{dash}"#, rl.value);
            self.line("reference", (r.left, p), (r.right, p), "#d62728", &extra);
        }
    }

    pub(crate) fn finish(self) -> String {
        format!(
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n{}</svg>\n",
            self.body,
            w = px(self.width),
            h = px(self.height)
        )
    }
}
