use super::{algorithm_color, escape, px, ticks, Axis, PlotSpec, Svg, VizError};
use crate::analysis::Series;

/// One panel of line series sharing axes (e.g. ID-val at left, OOD at right).
pub struct CiPanel<'a> {
    pub title: String,
    pub series: Vec<&'a Series>,
}

fn band(s: &Series) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
    s.points.iter().filter_map(|p| p.mean.map(|m| (p.t as f64, m - p.ci_half_width, m + p.ci_half_width)))
}

/// Mean line with a shaded confidence ribbon per series. Points without a
/// mean are skipped. Panels share both axes.
pub fn render_ci_lines(panels: &[CiPanel<'_>], spec: &PlotSpec) -> Result<String, VizError> {
    let all: Vec<(f64, f64, f64)> = panels.iter().flat_map(|p| p.series.iter().flat_map(|s| band(s))).collect();
    if all.is_empty() {
        return Err(VizError::Empty(format!("{}: no series values", spec.title)));
    }
    let (t0, t1) = all.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.0), b.max(p.0)));
    let (y0, y1) = spec.y_range.unwrap_or_else(|| {
        let refs = spec.reference_lines.iter().map(|r| r.value);
        let lo = all.iter().map(|p| p.1).chain(refs.clone()).fold(f64::INFINITY, f64::min);
        let hi = all.iter().map(|p| p.2).chain(refs).fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    });

    let mut svg = Svg::new(spec.panel_width * panels.len() as f64, spec.panel_height, spec);
    for (i, panel) in panels.iter().enumerate() {
        let r = spec.plot_box(i);
        let x = Axis::new(t0, t1, r.left, r.right);
        let y = Axis::new(y0, y1, r.bottom, r.top);
        let x_ticks: Vec<f64> = ticks(t0, t1, 6).into_iter().filter(|t| t.fract() == 0.0).collect();
        svg.axes(r, &x, &y, &x_ticks, spec, &panel.title);
        svg.reference_lines(r, &y, spec);
        for s in &panel.series {
            let pts: Vec<(f64, f64, f64)> = band(s).collect();
            if pts.is_empty() {
                continue;
            }
            let color = algorithm_color(s.algorithm);
            let name = escape(s.algorithm.name());
            let upper = pts.iter().map(|p| format!("{},{}", px(x.map(p.0)), px(y.map(p.2))));
            let lower = pts.iter().rev().map(|p| format!("{},{}", px(x.map(p.0)), px(y.map(p.1))));
            let d = upper.chain(lower).collect::<Vec<_>>().join(" L ");
            svg.push(&format!(
                r#"<path class="ribbon" data-series="{name}" d="M {d} Z" fill="{color}" fill-opacity="0.2" stroke="none"/>"#
            ));
            let line: Vec<String> =
                pts.iter().map(|p| format!("{},{}", px(x.map(p.0)), px(y.map((p.1 + p.2) / 2.0)))).collect();
            svg.push(&format!(
                r#"<polyline class="line" data-series="{name}" points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
                line.join(" ")
            ));
        }
        if i == 0 {
            for (k, s) in panel.series.iter().enumerate() {
                let ly = r.top + 12.0 + 14.0 * k as f64;
                let color = algorithm_color(s.algorithm);
                svg.line("legend", (r.left + 8.0, ly - 4.0), (r.left + 24.0, ly - 4.0), color, r#" stroke-width="2""#);
                svg.text("legend-label", r.left + 28.0, ly, "start", s.algorithm.name());
            }
        }
    }
    Ok(svg.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{summarize, Series};
    use crate::soup::Algorithm;
    use crate::viz::PlotKind;

    fn series(algorithm: Algorithm, runs: Vec<Vec<Option<f64>>>) -> Series {
        let max_t = runs.iter().map(Vec::len).max().unwrap_or(0);
        let points = summarize(&runs, max_t);
        Series { algorithm, statistic: "s".into(), carried: vec![], runs, points }
    }

    fn coords(doc: &roxmltree::Document<'_>, class: &str) -> Vec<Vec<(f64, f64)>> {
        doc.descendants()
            .filter(|n| n.attribute("class") == Some(class))
            .map(|n| {
                let raw = n.attribute("points").or(n.attribute("d")).unwrap();
                raw.split(' ')
                    .filter_map(|tok| tok.split_once(','))
                    .map(|(a, b)| (a.parse().unwrap(), b.parse().unwrap()))
                    .collect()
            })
            .collect()
    }

    #[test]
    fn hand_mapped_three_points() {
        let s = series(Algorithm::Greedy, vec![vec![Some(0.2), Some(0.5), Some(0.9)]; 2]);
        let mut spec = PlotSpec::new(PlotKind::CiLines, "t", "x", "y");
        spec.y_range = Some((0.0, 1.0));
        let doc = render_ci_lines(&[CiPanel { title: String::new(), series: vec![&s] }], &spec).unwrap();
        let doc = roxmltree::Document::parse(&doc).unwrap();
        // plot box: left 60, right 400, top 40, bottom 250; t spans 1..3
        let expect = [(60.0, 250.0 - 0.2 * 210.0), (230.0, 250.0 - 0.5 * 210.0), (400.0, 250.0 - 0.9 * 210.0)];
        let line = &coords(&doc, "line")[0];
        assert_eq!(line.len(), 3);
        for (got, want) in line.iter().zip(expect) {
            assert!((got.0 - want.0).abs() < 0.006 && (got.1 - want.1).abs() < 0.006, "{got:?} vs {want:?}");
        }
    }

    #[test]
    fn flat_series_is_horizontal_with_degenerate_ribbon() {
        let s = series(Algorithm::Greedier, vec![vec![Some(0.7); 4]; 3]);
        let spec = PlotSpec::new(PlotKind::CiLines, "flat", "t", "acc");
        let doc = render_ci_lines(&[CiPanel { title: "id".into(), series: vec![&s] }], &spec).unwrap();
        let doc = roxmltree::Document::parse(&doc).unwrap();
        let line = &coords(&doc, "line")[0];
        assert!(line.iter().all(|p| p.1 == line[0].1));
        let ribbon = &coords(&doc, "ribbon")[0];
        assert!(ribbon.iter().all(|p| p.1 == line[0].1));
    }

    #[test]
    fn constant_width_ribbon() {
        // two runs offset by ±0.1 at every t: equal spread, so equal band height
        let s = series(Algorithm::Greedy, vec![vec![Some(0.4); 3], vec![Some(0.6); 3]]);
        let spec = PlotSpec::new(PlotKind::CiLines, "band", "t", "acc");
        let doc = render_ci_lines(&[CiPanel { title: String::new(), series: vec![&s] }], &spec).unwrap();
        let doc = roxmltree::Document::parse(&doc).unwrap();
        let ribbon = &coords(&doc, "ribbon")[0];
        let heights: Vec<f64> = (0..3).map(|k| ribbon[5 - k].1 - ribbon[k].1).collect();
        assert!(heights.iter().all(|h| (h - heights[0]).abs() < 0.011 && *h > 0.0));
    }

    #[test]
    fn empty_input_is_an_error() {
        let spec = PlotSpec::new(PlotKind::CiLines, "none", "t", "y");
        assert!(matches!(render_ci_lines(&[], &spec), Err(VizError::Empty(_))));
        let s = series(Algorithm::Greedy, vec![vec![None, None]]);
        assert!(render_ci_lines(&[CiPanel { title: String::new(), series: vec![&s] }], &spec).is_err());
    }

    #[test]
    fn paired_panels_and_identical_bytes() {
        let a = series(Algorithm::Greedy, vec![vec![Some(0.1), Some(0.3)], vec![Some(0.2), Some(0.2)]]);
        let b = series(Algorithm::RankedDiversity, vec![vec![Some(-0.1), Some(0.0)]]);
        let spec = PlotSpec::new(PlotKind::CiLines, "pair", "t", "diff");
        let panels = || vec![CiPanel { title: "ID".into(), series: vec![&a, &b] }, CiPanel { title: "OOD".into(), series: vec![&b] }];
        let one = render_ci_lines(&panels(), &spec).unwrap();
        assert_eq!(one, render_ci_lines(&panels(), &spec).unwrap());
        let doc = roxmltree::Document::parse(&one).unwrap();
        assert_eq!(coords(&doc, "line").len(), 3);
        assert_eq!(doc.descendants().filter(|n| n.attribute("class") == Some("frame")).count(), 2);
    }
}
