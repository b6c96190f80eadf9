//! Sunburst geometry: the goal disk at the center, one ring per obstacle
//! depth, then solution and resource rings outside each leaf.
//!
//! Angles are degrees clockwise from 12 o'clock. A DAG node reached through
//! several parents is drawn once per root path, so every ring stays an exact
//! partition of its parent's span.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::impact;
use crate::model::{ProblemModel, GOAL_ROOT, TOLERANCE};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct LayoutConfig {
    pub goal_radius: f64,
    pub ring_thickness: f64,
    pub start_angle_deg: f64,
}

impl Default for LayoutConfig {
    fn default() -> Self {
        LayoutConfig { goal_radius: 120.0, ring_thickness: 60.0, start_angle_deg: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("layout lengths must be positive and finite (goalRadius {goal_radius}, ringThickness {ring_thickness})")]
pub struct InvalidConfig {
    pub goal_radius: f64,
    pub ring_thickness: f64,
}

impl LayoutConfig {
    pub fn new(goal_radius: f64, ring_thickness: f64, start_angle_deg: f64) -> Result<Self, InvalidConfig> {
        let ok = |x: f64| x.is_finite() && x > 0.0;
        if !ok(goal_radius) || !ok(ring_thickness) || !start_angle_deg.is_finite() {
            return Err(InvalidConfig { goal_radius, ring_thickness });
        }
        Ok(LayoutConfig { goal_radius, ring_thickness, start_angle_deg })
    }

    /// Inner radius of ring `depth` (depth 0 is the goal disk).
    pub fn inner_radius(&self, depth: usize) -> f64 {
        if depth == 0 {
            0.0
        } else {
            self.goal_radius + (depth - 1) as f64 * self.ring_thickness
        }
    }

    pub fn outer_radius(&self, depth: usize) -> f64 {
        if depth == 0 {
            self.goal_radius
        } else {
            self.inner_radius(depth) + self.ring_thickness
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SectorKind {
    Goal,
    Obstacle,
    Solution,
    Resource,
    Uncovered,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Sector {
    /// Slash-joined ids from the goal root; unique per occurrence.
    pub path_id: String,
    pub kind: SectorKind,
    pub depth: usize,
    pub inner_radius: f64,
    pub outer_radius: f64,
    pub start_angle_deg: f64,
    pub span_deg: f64,
    pub label: String,
    /// Fill fraction for obstacle and solution sectors.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub progress: Option<f64>,
}

impl Sector {
    pub fn end_angle_deg(&self) -> f64 {
        self.start_angle_deg + self.span_deg
    }

    /// Path of the enclosing sector, `None` for the goal disk.
    pub fn parent_path(&self) -> Option<&str> {
        self.path_id.rsplit_once('/').map(|(parent, _)| parent)
    }
}

pub const UNCOVERED_SEGMENT: &str = "~uncovered";

struct Builder<'a> {
    model: &'a ProblemModel,
    config: LayoutConfig,
    progress: impact::ImpactReport,
    sectors: Vec<Sector>,
}

impl Builder<'_> {
    #[allow(clippy::too_many_arguments)]
    fn push(
        &mut self,
        path_id: String,
        kind: SectorKind,
        depth: usize,
        start: f64,
        span: f64,
        label: &str,
        progress: Option<f64>,
    ) {
        self.sectors.push(Sector {
            path_id,
            kind,
            depth,
            inner_radius: self.config.inner_radius(depth),
            outer_radius: self.config.outer_radius(depth),
            start_angle_deg: start,
            span_deg: span,
            label: label.to_string(),
            progress,
        });
    }

    /// Splits `span` by `fractions`; normalizes when they sum to at least
    /// one (within tolerance) and otherwise leaves a remainder.
    fn partition(span: f64, fractions: &[f64]) -> (Vec<f64>, f64) {
        let total: f64 = fractions.iter().sum();
        if total >= 1.0 - TOLERANCE {
            (fractions.iter().map(|f| span * f / total).collect(), 0.0)
        } else {
            let spans: Vec<f64> = fractions.iter().map(|f| span * f).collect();
            let used: f64 = spans.iter().sum();
            (spans, span - used)
        }
    }

    fn obstacle_children(&mut self, parent_id: &str, path: &str, depth: usize, start: f64, span: f64) {
        let children: Vec<(usize, f64)> = self
            .model
            .obstacles
            .iter()
            .enumerate()
            .filter_map(|(i, o)| o.weight_under(parent_id).map(|w| (i, w)))
            .collect();
        if children.is_empty() {
            return;
        }
        let weights: Vec<f64> = children.iter().map(|&(_, w)| w).collect();
        let total: f64 = weights.iter().sum();
        let mut cursor = start;
        for &(i, w) in &children {
            let node = &self.model.obstacles[i];
            let child_span = span * w / total;
            let child_path = format!("{path}/{}", node.id);
            let progress = self.progress.node_progress.get(&node.id).copied();
            self.push(child_path.clone(), SectorKind::Obstacle, depth, cursor, child_span, &node.label, progress);
            if self.model.has_children(node.id.as_str()) {
                self.obstacle_children(node.id.as_str(), &child_path, depth + 1, cursor, child_span);
            } else if node.is_leaf {
                self.solution_ring(node.id.as_str(), &child_path, depth + 1, cursor, child_span);
            }
            cursor += child_span;
        }
    }

    fn solution_ring(&mut self, leaf_id: &str, path: &str, depth: usize, start: f64, span: f64) {
        let solutions: Vec<_> = self.model.solutions_of(leaf_id).collect();
        let shares: Vec<f64> = solutions.iter().map(|s| s.share).collect();
        let (spans, remainder) = Self::partition(span, &shares);
        let mut cursor = start;
        for (solution, solution_span) in solutions.into_iter().zip(spans) {
            let solution_path = format!("{path}/{}", solution.id);
            self.push(
                solution_path.clone(),
                SectorKind::Solution,
                depth,
                cursor,
                solution_span,
                &solution.label,
                Some(solution.progress),
            );
            self.resource_ring(solution.id.as_str(), &solution_path, depth + 1, cursor, solution_span);
            cursor += solution_span;
        }
        if remainder > 0.0 {
            self.push(format!("{path}/{UNCOVERED_SEGMENT}"), SectorKind::Uncovered, depth, cursor, remainder, "unsolved", None);
        }
    }

    fn resource_ring(&mut self, solution_id: &str, path: &str, depth: usize, start: f64, span: f64) {
        let assignments: Vec<_> = self.model.assignments_of(solution_id).collect();
        if assignments.is_empty() {
            return;
        }
        let shares: Vec<f64> = assignments.iter().map(|a| a.share).collect();
        let (spans, remainder) = Self::partition(span, &shares);
        let mut cursor = start;
        for (assignment, resource_span) in assignments.into_iter().zip(spans) {
            let label = self
                .model
                .resource(assignment.resource_id.as_str())
                .map_or(assignment.resource_id.as_str(), |r| r.name.as_str())
                .to_string();
            self.push(
                format!("{path}/{}", assignment.resource_id),
                SectorKind::Resource,
                depth,
                cursor,
                resource_span,
                &label,
                None,
            );
            cursor += resource_span;
        }
        if remainder > 0.0 {
            self.push(format!("{path}/{UNCOVERED_SEGMENT}"), SectorKind::Uncovered, depth, cursor, remainder, "unfunded", None);
        }
    }
}

/// Lays out a valid model as a list of sectors in depth-first order.
pub fn compute_layout(model: &ProblemModel, config: &LayoutConfig) -> Vec<Sector> {
    let mut builder = Builder {
        model,
        config: *config,
        progress: impact::progress_rollup(model),
        sectors: Vec::new(),
    };
    let start = config.start_angle_deg;
    let goal_progress = Some(builder.progress.goal_progress);
    builder.push(GOAL_ROOT.to_string(), SectorKind::Goal, 0, start, 360.0, &model.goal.text, goal_progress);
    builder.obstacle_children(GOAL_ROOT, GOAL_ROOT, 1, start, 360.0);
    builder.sectors
}

fn num(x: f64) -> String {
    let s = format!("{x:.3}");
    if s == "-0.000" {
        "0.000".to_string()
    } else {
        s
    }
}

fn escape(text: &str) -> String {
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

fn fill(kind: SectorKind) -> &'static str {
    match kind {
        SectorKind::Goal => "#f4e3b1",
        SectorKind::Obstacle => "#d9826b",
        SectorKind::Solution => "#7fb77e",
        SectorKind::Resource => "#6d9dc5",
        SectorKind::Uncovered => "#eeeeee",
    }
}

fn class(kind: SectorKind) -> &'static str {
    match kind {
        SectorKind::Goal => "goal",
        SectorKind::Obstacle => "obstacle",
        SectorKind::Solution => "solution",
        SectorKind::Resource => "resource",
        SectorKind::Uncovered => "uncovered",
    }
}

struct Canvas {
    cx: f64,
    cy: f64,
}

impl Canvas {
    fn point(&self, radius: f64, angle_deg: f64) -> (f64, f64) {
        let theta = angle_deg.to_radians();
        (self.cx + radius * theta.sin(), self.cy - radius * theta.cos())
    }

    fn full_ring(&self, radius: f64, start: f64, sweep: u8, d: &mut String) {
        let (x0, y0) = self.point(radius, start);
        let (x1, y1) = self.point(radius, start + 180.0);
        let r = num(radius);
        let _ = write!(
            d,
            "M{} {} A{r} {r} 0 1 {sweep} {} {} A{r} {r} 0 1 {sweep} {} {} Z",
            num(x0),
            num(y0),
            num(x1),
            num(y1),
            num(x0),
            num(y0)
        );
    }

    fn path(&self, s: &Sector) -> String {
        let mut d = String::new();
        if s.span_deg >= 360.0 - 1e-9 {
            self.full_ring(s.outer_radius, s.start_angle_deg, 1, &mut d);
            if s.inner_radius > 0.0 {
                d.push(' ');
                self.full_ring(s.inner_radius, s.start_angle_deg, 0, &mut d);
            }
            return d;
        }
        let large = u8::from(s.span_deg > 180.0);
        let (ox0, oy0) = self.point(s.outer_radius, s.start_angle_deg);
        let (ox1, oy1) = self.point(s.outer_radius, s.end_angle_deg());
        let ro = num(s.outer_radius);
        let _ = write!(d, "M{} {} A{ro} {ro} 0 {large} 1 {} {}", num(ox0), num(oy0), num(ox1), num(oy1));
        if s.inner_radius > 0.0 {
            let (ix1, iy1) = self.point(s.inner_radius, s.end_angle_deg());
            let (ix0, iy0) = self.point(s.inner_radius, s.start_angle_deg);
            let ri = num(s.inner_radius);
            let _ = write!(d, " L{} {} A{ri} {ri} 0 {large} 0 {} {} Z", num(ix1), num(iy1), num(ix0), num(iy0));
        } else {
            let _ = write!(d, " L{} {} Z", num(self.cx), num(self.cy));
        }
        d
    }
}

/// Renders sectors as an SVG 1.1 document, one path and label per sector,
/// ordered by path id.
pub fn to_svg(sectors: &[Sector], config: &LayoutConfig) -> String {
    let extent = sectors
        .iter()
        .map(|s| s.outer_radius)
        .fold(config.goal_radius, f64::max);
    let margin = 10.0;
    let size = 2.0 * (extent + margin);
    let canvas = Canvas { cx: size / 2.0, cy: size / 2.0 };

    let mut ordered: Vec<&Sector> = sectors.iter().collect();
    ordered.sort_by(|a, b| a.path_id.cmp(&b.path_id));

    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{0}\" height=\"{0}\" viewBox=\"0 0 {0} {0}\">",
        num(size)
    );
    for s in ordered {
        let _ = writeln!(
            out,
            "<path id=\"{}\" class=\"{}\" fill=\"{}\" fill-rule=\"evenodd\" stroke=\"#ffffff\" stroke-width=\"1\" d=\"{}\"/>",
            escape(&s.path_id),
            class(s.kind),
            fill(s.kind),
            canvas.path(s)
        );
        let (tx, ty) = if s.kind == SectorKind::Goal {
            (canvas.cx, canvas.cy)
        } else {
            canvas.point((s.inner_radius + s.outer_radius) / 2.0, s.start_angle_deg + s.span_deg / 2.0)
        };
        let _ = writeln!(
            out,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" dominant-baseline=\"middle\" font-size=\"10\">{}</text>",
            num(tx),
            num(ty),
            escape(&s.label)
        );
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::*;

    fn id(s: &str) -> Id {
        Id::new(s).unwrap()
    }

    fn top(weights: &[f64]) -> ProblemModel {
        let parts: Vec<Part> = weights.iter().enumerate().map(|(i, w)| Part::new(format!("t{i}"), *w)).collect();
        subdivide_obstacle(&ProblemModel::new(id("m"), "t"), &Id::root(), &parts).unwrap()
    }

    #[test]
    fn single_obstacle_full_circle() {
        let sectors = compute_layout(&top(&[1.0]), &LayoutConfig::default());
        assert_eq!(sectors.len(), 2);
        assert_eq!(sectors[1].span_deg, 360.0);
        assert_eq!(sectors[1].inner_radius, 120.0);
        assert_eq!(sectors[1].outer_radius, 180.0);
    }

    #[test]
    fn top_spans_follow_weights() {
        let sectors = compute_layout(&top(&[0.2, 0.3, 0.5]), &LayoutConfig::default());
        let spans: Vec<f64> = sectors[1..].iter().map(|s| s.span_deg).collect();
        for (got, want) in spans.iter().zip([72.0, 108.0, 180.0]) {
            assert!((got - want).abs() < 1e-9);
        }
        assert!((sectors[2].start_angle_deg - sectors[1].end_angle_deg()).abs() < 1e-12);
        assert!((spans.iter().sum::<f64>() - 360.0).abs() < 1e-9);
    }

    #[test]
    fn uncovered_remainder_is_explicit() {
        let m = mark_leaf(&top(&[1.0]), &id("o1")).unwrap();
        let m = add_solution(&m, None, &id("o1"), "half", 0.5).unwrap();
        let sectors = compute_layout(&m, &LayoutConfig::default());
        let kinds: Vec<SectorKind> = sectors.iter().map(|s| s.kind).collect();
        assert_eq!(kinds, vec![SectorKind::Goal, SectorKind::Obstacle, SectorKind::Solution, SectorKind::Uncovered]);
        assert_eq!(sectors[3].path_id, "goal/o1/~uncovered");
        assert!((sectors[3].span_deg - 180.0).abs() < 1e-12);
        assert_eq!(sectors[2].depth, 2);
    }

    #[test]
    fn empty_model_svg_has_only_goal() {
        let mut m = ProblemModel::new(id("m"), "t");
        m.goal.text = "Streets <safe> & bright".into();
        let config = LayoutConfig::default();
        let svg = to_svg(&compute_layout(&m, &config), &config);
        assert_eq!(svg.matches("<path").count(), 1);
        assert!(svg.contains("Streets &lt;safe&gt; &amp; bright"));
        assert_eq!(svg, to_svg(&compute_layout(&m, &config), &config));
    }

    #[test]
    fn config_validation() {
        assert!(LayoutConfig::new(0.0, 1.0, 0.0).is_err());
        assert!(LayoutConfig::new(1.0, -1.0, 0.0).is_err());
        assert!(LayoutConfig::new(1.0, 1.0, 90.0).is_ok());
    }
}
