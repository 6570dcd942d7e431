use log::warn;

use super::{algorithm_color, escape, px, Axis, PlotSpec, Svg, VizError};
use crate::analysis::{BoxStats, DistanceBin};
use crate::soup::Algorithm;

/// Per-step bins of one algorithm.
pub struct BoxGroup {
    pub algorithm: Algorithm,
    pub bins: Vec<DistanceBin>,
}

/// Tukey whisker ends: the most extreme finite values within 1.5·IQR of the
/// quartiles.
pub fn whisker_bounds(values: &[f64], s: &BoxStats) -> (f64, f64) {
    let iqr = s.q3 - s.q1;
    let (lo_fence, hi_fence) = (s.q1 - 1.5 * iqr, s.q3 + 1.5 * iqr);
    let inside = values.iter().copied().filter(|v| v.is_finite() && *v >= lo_fence && *v <= hi_fence);
    inside.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

/// Boxes per step, grouped side by side by algorithm. Bins without finite
/// values are skipped with a warning; their infinite count is still printed.
pub fn render_boxplots(groups: &[BoxGroup], spec: &PlotSpec) -> Result<String, VizError> {
    let bins: Vec<(usize, &DistanceBin)> =
        groups.iter().enumerate().flat_map(|(g, grp)| grp.bins.iter().map(move |b| (g, b))).collect();
    if bins.iter().all(|(_, b)| b.stats.is_none() && b.infinite == 0) {
        return Err(VizError::Empty(format!("{}: no bins", spec.title)));
    }
    let t_min = bins.iter().map(|(_, b)| b.t).min().unwrap();
    let t_max = bins.iter().map(|(_, b)| b.t).max().unwrap();
    let finite = || bins.iter().flat_map(|(_, b)| b.values.iter().copied().filter(|v| v.is_finite()));
    let (y0, y1) = spec.y_range.unwrap_or_else(|| {
        let refs = spec.reference_lines.iter().map(|r| r.value);
        let lo = finite().chain(refs.clone()).fold(f64::INFINITY, f64::min);
        let hi = finite().chain(refs).fold(f64::NEG_INFINITY, f64::max);
        if lo.is_finite() {
            (lo, hi)
        } else {
            (0.0, 1.0)
        }
    });

    let mut svg = Svg::new(spec.panel_width, spec.panel_height, spec);
    let r = spec.plot_box(0);
    let slots = (t_max - t_min + 1) as f64;
    let x = Axis::new(t_min as f64 - 0.5, t_max as f64 + 0.5, r.left, r.right);
    let y = Axis::new(y0, y1, r.bottom, r.top);
    let slot_px = (r.right - r.left) / slots;
    let box_px = slot_px * 0.8 / groups.len().max(1) as f64;
    let every = ((slots / 12.0).ceil() as usize).max(1);
    let x_ticks: Vec<f64> = (t_min..=t_max).step_by(every).map(|t| t as f64).collect();
    svg.axes(r, &x, &y, &x_ticks, spec, "");
    svg.reference_lines(r, &y, spec);

    for &(g, bin) in &bins {
        let algo = groups[g].algorithm;
        let color = algorithm_color(algo);
        let name = escape(algo.name());
        let left = x.map(bin.t as f64) - slot_px * 0.4 + g as f64 * box_px;
        let mid = left + box_px / 2.0;
        let attrs = format!(r#"data-series="{name}" data-t="{}""#, bin.t);
        if bin.infinite > 0 {
            svg.push(&format!(
                r#"<text class="infinite-count" {attrs} x="{}" y="{}" text-anchor="middle" font-size="9">inf {}</text>"#,
                px(mid),
                px(r.top + 10.0),
                bin.infinite
            ));
        }
        let Some(s) = &bin.stats else {
            warn!("{}: {} bin at t={} has no finite values, box omitted", spec.title, algo, bin.t);
            continue;
        };
        let (wl, wh) = whisker_bounds(&bin.values, s);
        let stroke = format!(r#" {attrs} stroke-width="1""#);
        svg.line("whisker", (mid, y.map(wh)), (mid, y.map(s.q3)), color, &stroke);
        svg.line("whisker", (mid, y.map(s.q1)), (mid, y.map(wl)), color, &stroke);
        svg.line("whisker-cap", (left + box_px * 0.25, y.map(wh)), (left + box_px * 0.75, y.map(wh)), color, &stroke);
        svg.line("whisker-cap", (left + box_px * 0.25, y.map(wl)), (left + box_px * 0.75, y.map(wl)), color, &stroke);
        let top = y.map(s.q3);
        svg.push(&format!(
            r#"<rect class="box" {attrs} x="{}" y="{}" width="{}" height="{}" fill="{color}" fill-opacity="0.3" stroke="{color}"/>"#,
            px(left),
            px(top),
            px(box_px * 0.9),
            px(y.map(s.q1) - top)
        ));
        svg.line("median", (left, y.map(s.median)), (left + box_px * 0.9, y.map(s.median)), color, &format!(r#" {attrs} stroke-width="2""#));
        for v in bin.values.iter().filter(|v| v.is_finite() && (**v < wl || **v > wh)) {
            svg.push(&format!(
                r#"<circle class="outlier" {attrs} cx="{}" cy="{}" r="2" fill="none" stroke="{color}"/>"#,
                px(mid),
                px(y.map(*v))
            ));
        }
    }
    for (k, grp) in groups.iter().enumerate() {
        let ly = r.top + 12.0 + 14.0 * k as f64;
        let color = algorithm_color(grp.algorithm);
        svg.line("legend", (r.right - 120.0, ly - 4.0), (r.right - 104.0, ly - 4.0), color, r#" stroke-width="6""#);
        svg.text("legend-label", r.right - 100.0, ly, "start", grp.algorithm.name());
    }
    Ok(svg.finish())
}
