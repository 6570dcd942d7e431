use std::collections::BTreeMap;

use super::{class_color, escape, px, ramp_color, Axis, PlotSpec, Rect, Svg, VizError};
use crate::mds::{Embedding, MdsNode, Point, Triangulation};
use crate::soup::SoupTrajectory;

/// Backdrop triangles are split into this many strips per side.
const SUBDIVISIONS: usize = 3;

pub struct MdsScene<'a> {
    pub nodes: &'a [MdsNode],
    pub embedding: &'a Embedding,
    pub backdrop: Option<&'a Triangulation>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum FrameRole {
    Other,
    PastWa,
    CandidateWa,
    Ingredient,
    Selected,
    CurrentWa,
}

impl FrameRole {
    pub fn name(self) -> &'static str {
        match self {
            Self::Other => "other",
            Self::PastWa => "past-wa",
            Self::CandidateWa => "candidate-wa",
            Self::Ingredient => "ingredient",
            Self::Selected => "selected",
            Self::CurrentWa => "current-wa",
        }
    }
}

struct Frame {
    /// Node → role, for every node revealed by step t.
    roles: BTreeMap<usize, FrameRole>,
    current: usize,
    candidate_was: Vec<usize>,
    candidate_models: Vec<usize>,
}

struct Catalog<'a> {
    nodes: &'a [MdsNode],
    index: BTreeMap<Vec<u32>, usize>,
}

impl<'a> Catalog<'a> {
    fn new(nodes: &'a [MdsNode]) -> Self {
        Self { nodes, index: nodes.iter().enumerate().map(|(i, n)| (n.ingredients.clone(), i)).collect() }
    }
}

fn lookup(points: &Catalog<'_>, set: &[u32]) -> Result<usize, VizError> {
    let mut key = set.to_vec();
    key.sort_unstable();
    points.index.get(&key).copied().ok_or_else(|| VizError::MissingPoint(format!("{set:?}")))
}

fn frame(points: &Catalog<'_>, traj: &SoupTrajectory, t: usize) -> Result<Frame, VizError> {
    let current_wa = traj.wa_before(t).ok_or_else(|| VizError::MissingPoint(format!("WA before step {t}")))?;
    let soup = &current_wa.ingredients;
    let current = lookup(points, soup)?;
    let it = traj.iterations.get(t - 1);
    let latest = if t >= 2 { traj.iterations[t - 2].selected_id } else { None };

    let mut roles: BTreeMap<usize, FrameRole> =
        points.nodes.iter().enumerate().filter(|(_, n)| n.first_t <= t).map(|(i, _)| (i, FrameRole::Other)).collect();
    for tau in 1..t {
        if let Some(past) = traj.wa_before(tau) {
            roles.insert(lookup(points, &past.ingredients)?, FrameRole::PastWa);
        }
    }
    let mut candidate_was = Vec::new();
    let mut candidate_models = Vec::new();
    if let Some(it) = it {
        for e in &it.evals {
            let mut set = soup.clone();
            set.push(e.candidate_id);
            let k = lookup(points, &set)?;
            roles.insert(k, FrameRole::CandidateWa);
            candidate_was.push(k);
        }
        for &id in &it.remaining_ids_before {
            candidate_models.push(lookup(points, &[id])?);
        }
    }
    for &id in soup {
        let k = lookup(points, &[id])?;
        let role = if Some(id) == latest { FrameRole::Selected } else { FrameRole::Ingredient };
        roles.insert(k, role);
    }
    // at t = 1 the lone initial model is the current WA itself
    roles.insert(current, FrameRole::CurrentWa);
    Ok(Frame { roles, current, candidate_was, candidate_models })
}

/// Marker role of every point revealed by step `t`.
pub fn frame_roles(nodes: &[MdsNode], traj: &SoupTrajectory, t: usize) -> Result<Vec<(usize, FrameRole)>, VizError> {
    Ok(frame(&Catalog::new(nodes), traj, t)?.roles.into_iter().collect())
}

/// Equal-aspect map of `pts` into `r`, padded by 8%.
fn fit(pts: &[Point], r: Rect) -> (Axis, Axis) {
    let (lo, hi) = pts.iter().fold(([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]), |(lo, hi), p| {
        ([lo[0].min(p[0]), lo[1].min(p[1])], [hi[0].max(p[0]), hi[1].max(p[1])])
    });
    let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-9) * 1.08;
    let c = [(lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0];
    let side = (r.right - r.left).min(r.bottom - r.top);
    let (cx, cy) = ((r.left + r.right) / 2.0, (r.top + r.bottom) / 2.0);
    (
        Axis::new(c[0] - span / 2.0, c[0] + span / 2.0, cx - side / 2.0, cx + side / 2.0),
        Axis::new(c[1] - span / 2.0, c[1] + span / 2.0, cy + side / 2.0, cy - side / 2.0),
    )
}

fn backdrop(svg: &mut Svg, tri: &Triangulation, x: &Axis, y: &Axis, clip: &str, range: (f64, f64)) {
    let scale = |v: f64| if range.1 > range.0 { (v - range.0) / (range.1 - range.0) } else { 0.5 };
    svg.push(&format!(r#"<g class="backdrop" clip-path="url(#{clip})">"#));
    let k = SUBDIVISIONS as f64;
    for t in &tri.triangles {
        let [a, b, c] = t.map(|i| ([x.map(tri.points[i][0]), y.map(tri.points[i][1])], tri.values[i]));
        let at = |i: usize, j: usize| {
            let (u, w) = (i as f64 / k, j as f64 / k);
            let p = [a.0[0] + u * (b.0[0] - a.0[0]) + w * (c.0[0] - a.0[0]), a.0[1] + u * (b.0[1] - a.0[1]) + w * (c.0[1] - a.0[1])];
            (p, a.1 + u * (b.1 - a.1) + w * (c.1 - a.1))
        };
        let mut cells = Vec::new();
        for i in 0..SUBDIVISIONS {
            for j in 0..SUBDIVISIONS - i {
                cells.push([at(i, j), at(i + 1, j), at(i, j + 1)]);
                if i + j + 2 <= SUBDIVISIONS {
                    cells.push([at(i + 1, j), at(i + 1, j + 1), at(i, j + 1)]);
                }
            }
        }
        for cell in cells {
            let v = cell.iter().map(|c| c.1).sum::<f64>() / 3.0;
            let pts: Vec<String> = cell.iter().map(|c| format!("{},{}", px(c.0[0]), px(c.0[1]))).collect();
            let fill = ramp_color(scale(v));
            svg.push(&format!(r#"<polygon points="{}" fill="{fill}" stroke="{fill}" stroke-width="0.3"/>"#, pts.join(" ")));
        }
    }
    svg.push("</g>");
}

fn marker(svg: &mut Svg, role: FrameRole, label: &str, color: &str, p: (f64, f64)) {
    let (x, y) = p;
    let head = format!(r#"class="marker" data-role="{}" data-id="{}""#, role.name(), escape(label));
    let el = match role {
        FrameRole::CurrentWa => format!(
            r#"<path {head} d="M {},{} L {},{} M {},{} L {},{}" stroke="black" stroke-width="2.5" fill="none"/>"#,
            px(x - 6.0),
            px(y - 6.0),
            px(x + 6.0),
            px(y + 6.0),
            px(x - 6.0),
            px(y + 6.0),
            px(x + 6.0),
            px(y - 6.0)
        ),
        FrameRole::Selected => format!(
            r#"<rect {head} x="{}" y="{}" width="12.00" height="12.00" fill="{color}" stroke="black" stroke-width="1.5"/>"#,
            px(x - 6.0),
            px(y - 6.0)
        ),
        FrameRole::Ingredient => {
            format!(r#"<circle {head} cx="{}" cy="{}" r="6" fill="{color}" stroke="black" stroke-width="1.5"/>"#, px(x), px(y))
        }
        FrameRole::CandidateWa => format!(
            r##"<polygon {head} points="{},{} {},{} {},{}" fill="{color}" stroke="#222" stroke-width="0.8"/>"##,
            px(x),
            px(y - 5.0),
            px(x + 4.5),
            px(y + 4.0),
            px(x - 4.5),
            px(y + 4.0)
        ),
        FrameRole::PastWa => format!(
            r##"<polygon {head} points="{},{} {},{} {},{} {},{}" fill="{color}" stroke="#222" stroke-width="0.8"/>"##,
            px(x),
            px(y - 5.0),
            px(x + 5.0),
            px(y),
            px(x),
            px(y + 5.0),
            px(x - 5.0),
            px(y)
        ),
        FrameRole::Other => format!(r#"<circle {head} cx="{}" cy="{}" r="2.5" fill="{color}"/>"#, px(x), px(y)),
    };
    svg.push(&el);
}

/// One three-panel SVG per step: every point revealed so far, the current
/// WA with its candidate WAs, and the current WA with the candidate models.
/// Markers: x current WA, square the ingredient added last step, circles
/// the other ingredients, triangles candidate WAs, diamonds past WAs; fill
/// encodes the number of ingredients.
pub fn render_mds_frames(scene: &MdsScene<'_>, traj: &SoupTrajectory, spec: &PlotSpec) -> Result<Vec<String>, VizError> {
    let pts = Catalog::new(scene.nodes);
    let emb = &scene.embedding.points;
    if emb.len() != pts.nodes.len() {
        return Err(VizError::MissingPoint(format!("embedding has {} points for {} nodes", emb.len(), pts.nodes.len())));
    }
    let acc_range =
        pts.nodes.iter().map(|n| n.id_val_accuracy).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let frames = traj.iterations.len().max(1);
    (1..=frames)
        .map(|t| {
            let f = frame(&pts, traj, t)?;
            let mut spec_t = spec.clone();
            spec_t.title = format!("{} t = {t}", spec.title).trim().to_string();
            let mut svg = Svg::new(spec.panel_width * 3.0, spec.panel_height, &spec_t);
            let mut with_current = vec![f.current];
            let zoom: Vec<usize> = with_current.iter().chain(&f.candidate_was).copied().collect();
            with_current.extend(&f.candidate_models);
            let panels: [(&str, &str, Vec<usize>); 3] = [
                ("all", "all points", f.roles.keys().copied().collect()),
                ("zoom", "current WA and candidate WAs", zoom),
                ("candidates", "current WA and candidate models", with_current),
            ];
            svg.push("<defs>");
            for i in 0..3 {
                let r = spec.plot_box(i);
                svg.push(&format!(
                    r#"<clipPath id="clip-{t}-{i}"><rect x="{}" y="{}" width="{}" height="{}"/></clipPath>"#,
                    px(r.left),
                    px(r.top),
                    px(r.right - r.left),
                    px(r.bottom - r.top)
                ));
            }
            svg.push("</defs>");
            for (i, (key, title, members)) in panels.iter().enumerate() {
                let r = spec.plot_box(i);
                let coords: Vec<Point> = members.iter().map(|&k| emb[k]).collect();
                let (x, y) = fit(&coords, r);
                svg.push(&format!(r#"<g class="panel" data-panel="{key}">"#));
                svg.text("panel-title", (r.left + r.right) / 2.0, r.top - 6.0, "middle", title);
                if let Some(tri) = scene.backdrop {
                    backdrop(&mut svg, tri, &x, &y, &format!("clip-{t}-{i}"), acc_range);
                }
                svg.push(&format!(
                    r##"<rect class="frame" x="{}" y="{}" width="{}" height="{}" fill="none" stroke="#444"/>"##,
                    px(r.left),
                    px(r.top),
                    px(r.right - r.left),
                    px(r.bottom - r.top)
                ));
                svg.push(&format!(r#"<g class="markers" clip-path="url(#clip-{t}-{i})">"#));
                let mut order: Vec<(FrameRole, usize)> = members.iter().map(|&k| (f.roles[&k], k)).collect();
                order.sort();
                for (role, k) in order {
                    let node = &pts.nodes[k];
                    let p = (x.map(emb[k][0]), y.map(emb[k][1]));
                    marker(&mut svg, role, &node.label, class_color(node.ingredients.len()), p);
                }
                svg.push("</g>");
                svg.push("</g>");
            }
            Ok(svg.finish())
        })
        .collect()
}
