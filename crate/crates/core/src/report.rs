//! CSV and SVG artifacts.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::env::{Environment, Shape};
use crate::geometry::Point;
use crate::planner::RunRecord;
use crate::rrt::{Path, Tree};

pub const TRAJECTORY_COLUMNS: [&str; 12] = [
    "step",
    "t",
    "x",
    "y",
    "theta",
    "phi",
    "v",
    "omega",
    "deviation",
    "replanned",
    "min_rollout_cost",
    "ess",
];

/// Shortest round-trip formatting; NaN becomes an empty cell.
fn num(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x}")
    }
}

/// One row per executed step with the state before the step, then a final
/// row holding the last state with empty control and diagnostic cells.
pub fn trajectory_csv(rec: &RunRecord, dt: f64) -> String {
    let mut out = TRAJECTORY_COLUMNS.join(",");
    out.push('\n');
    for r in &rec.steps {
        let s = r.state;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.step,
            num(r.t),
            num(s.x),
            num(s.y),
            num(s.theta),
            num(s.phi),
            num(r.control.v),
            num(r.control.omega),
            num(r.deviation),
            u8::from(r.replanned),
            num(r.diagnostics.min_cost),
            num(r.diagnostics.ess),
        );
    }
    let k = rec.steps.len();
    let s = rec.final_state;
    let _ = writeln!(
        out,
        "{k},{},{},{},{},{},,,,0,,",
        num(k as f64 * dt),
        num(s.x),
        num(s.y),
        num(s.theta),
        num(s.phi)
    );
    out
}

pub fn path_csv(path: &Path) -> String {
    let mut out = String::from("index,x,y\n");
    for (i, p) in path.waypoints.iter().enumerate() {
        let _ = writeln!(out, "{i},{},{}", num(p.x), num(p.y));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub mode: String,
    pub seed: u64,
    pub replan_radius: f64,
    pub outcome: String,
    pub steps: usize,
    pub collision_steps: usize,
    pub final_distance: f64,
    pub replans: usize,
    pub offline_rrt_ms: f64,
    pub mppi_ms: f64,
    pub replan_ms: f64,
    pub total_ms: f64,
}

impl BenchRow {
    pub fn from_record(rec: &RunRecord, env: &Environment, replan_radius: f64, dt: f64) -> Self {
        BenchRow {
            mode: rec.mode.to_string(),
            seed: rec.seed,
            replan_radius,
            outcome: rec.outcome.to_string(),
            steps: rec.steps.len(),
            collision_steps: rec.collision_steps(env, dt),
            final_distance: rec.final_state.position().distance(env.goal),
            replans: rec.replans.len(),
            offline_rrt_ms: rec.timings.offline_rrt_ms,
            mppi_ms: rec.timings.mppi_ms,
            replan_ms: rec.timings.replan_ms,
            total_ms: rec.timings.total_ms,
        }
    }

    pub const HEADER: &'static str = "mode,seed,replan_radius,outcome,steps,collision_steps,final_distance,replans,offline_rrt_ms,mppi_ms,replan_ms,total_ms";

    /// The row without its wall-clock columns.
    pub fn deterministic_part(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.mode,
            self.seed,
            num(self.replan_radius),
            self.outcome,
            self.steps,
            self.collision_steps,
            num(self.final_distance),
            self.replans
        )
    }

    fn csv(&self) -> String {
        format!(
            "{},{:.3},{:.3},{:.3},{:.3}",
            self.deterministic_part(),
            self.offline_rrt_ms,
            self.mppi_ms,
            self.replan_ms,
            self.total_ms
        )
    }
}

/// Mean, min and max of a column over one (mode, radius) group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spread {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

impl Spread {
    fn of(xs: impl Iterator<Item = f64>) -> Self {
        let (mut n, mut sum, mut min, mut max) = (0usize, 0.0, f64::INFINITY, f64::NEG_INFINITY);
        for x in xs {
            n += 1;
            sum += x;
            min = min.min(x);
            max = max.max(x);
        }
        Spread {
            mean: sum / n as f64,
            min,
            max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mode: String,
    pub replan_radius: f64,
    pub runs: usize,
    pub reached_goal: usize,
    pub steps: Spread,
    pub total_ms: Spread,
    pub offline_rrt_ms: Spread,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    pub fn to_csv(&self) -> String {
        let mut out = format!("{}\n", BenchRow::HEADER);
        for r in &self.rows {
            out.push_str(&r.csv());
            out.push('\n');
        }
        out
    }

    /// Groups by (mode, radius) in first-appearance order.
    pub fn aggregates(&self) -> Vec<Aggregate> {
        let mut order: Vec<(String, u64)> = Vec::new();
        let mut groups: BTreeMap<(String, u64), Vec<&BenchRow>> = BTreeMap::new();
        for r in &self.rows {
            let key = (r.mode.clone(), r.replan_radius.to_bits());
            if !groups.contains_key(&key) {
                order.push(key.clone());
            }
            groups.entry(key).or_default().push(r);
        }
        order
            .into_iter()
            .map(|key| {
                let rows = &groups[&key];
                Aggregate {
                    mode: key.0.clone(),
                    replan_radius: f64::from_bits(key.1),
                    runs: rows.len(),
                    reached_goal: rows.iter().filter(|r| r.outcome == "reached-goal").count(),
                    steps: Spread::of(rows.iter().map(|r| r.steps as f64)),
                    total_ms: Spread::of(rows.iter().map(|r| r.total_ms)),
                    offline_rrt_ms: Spread::of(rows.iter().map(|r| r.offline_rrt_ms)),
                }
            })
            .collect()
    }

    pub fn aggregates_csv(&self) -> String {
        let mut out = String::from(
            "mode,replan_radius,runs,reached_goal,steps_mean,steps_min,steps_max,total_ms_mean,total_ms_min,total_ms_max,offline_rrt_ms_mean,offline_rrt_ms_min,offline_rrt_ms_max\n",
        );
        for a in self.aggregates() {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{:.3},{:.3},{:.3},{:.3},{:.3},{:.3}",
                a.mode,
                num(a.replan_radius),
                a.runs,
                a.reached_goal,
                num(a.steps.mean),
                a.steps.min,
                a.steps.max,
                a.total_ms.mean,
                a.total_ms.min,
                a.total_ms.max,
                a.offline_rrt_ms.mean,
                a.offline_rrt_ms.min,
                a.offline_rrt_ms.max,
            );
        }
        out
    }
}

/// What to draw on top of the environment.
#[derive(Debug, Default)]
pub struct Layers<'a> {
    pub tree: Option<&'a Tree>,
    /// Paths with their stroke colors, drawn in order.
    pub paths: Vec<(&'a Path, &'a str)>,
    pub trajectory: Vec<Point>,
}

/// SVG 1.1 drawing in workspace coordinates (y up). Base obstacle shapes
/// are solid, scheduled later shapes dotted.
pub fn render_svg(env: &Environment, layers: &Layers<'_>) -> String {
    let b = env.bounds;
    let (w, h) = (b.width(), b.height());
    let pad = 0.02 * w.max(h);
    let flip = |p: Point| Point::new(p.x, b.max.y + b.min.y - p.y);
    let stroke = 0.004 * w.max(h);

    let mut out = String::new();
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" viewBox="{} {} {} {}" width="{}" height="{}">"#,
        num(b.min.x - pad),
        num(b.min.y - pad),
        num(w + 2.0 * pad),
        num(h + 2.0 * pad),
        num(((w + 2.0 * pad) * 20.0).round()),
        num(((h + 2.0 * pad) * 20.0).round()),
    );
    let _ = writeln!(
        out,
        r#"  <rect id="bounds" x="{}" y="{}" width="{}" height="{}" fill="white" stroke="black" stroke-width="{}"/>"#,
        num(b.min.x),
        num(b.min.y),
        num(w),
        num(h),
        num(stroke * 2.0)
    );

    for (k, o) in env.obstacles.iter().enumerate() {
        let _ = writeln!(out, r#"  <g id="obstacle-{k}">"#);
        shape_svg(&mut out, &o.shape, flip, "fill=\"#9e9e9e\" stroke=\"#555555\"", stroke);
        for e in &o.schedule {
            let style = format!(
                "fill=\"none\" stroke=\"#555555\" stroke-dasharray=\"{} {}\"",
                num(stroke * 3.0),
                num(stroke * 3.0)
            );
            shape_svg(&mut out, &e.shape, flip, &style, stroke);
        }
        out.push_str("  </g>\n");
    }

    if let Some(tree) = layers.tree {
        out.push_str("  <g id=\"tree\" stroke=\"#b0bec5\" fill=\"none\">\n");
        for (a, c) in tree.edges() {
            let (a, c) = (flip(a), flip(c));
            let _ = writeln!(
                out,
                r#"    <line x1="{}" y1="{}" x2="{}" y2="{}" stroke-width="{}"/>"#,
                num(a.x),
                num(a.y),
                num(c.x),
                num(c.y),
                num(stroke * 0.5)
            );
        }
        out.push_str("  </g>\n");
    }

    for (i, (path, color)) in layers.paths.iter().enumerate() {
        polyline(
            &mut out,
            &format!("path-{i}"),
            path.waypoints.iter().copied().map(flip),
            color,
            stroke * 1.5,
        );
    }
    if !layers.trajectory.is_empty() {
        polyline(
            &mut out,
            "trajectory",
            layers.trajectory.iter().copied().map(flip),
            "#ef6c00",
            stroke * 2.0,
        );
    }

    let s = flip(env.start);
    let half = 0.6;
    let _ = writeln!(
        out,
        r##"  <rect id="start" x="{}" y="{}" width="{}" height="{}" fill="#1565c0"/>"##,
        num(s.x - half),
        num(s.y - half),
        num(2.0 * half),
        num(2.0 * half)
    );
    let g = flip(env.goal);
    let _ = writeln!(
        out,
        r##"  <path id="goal" d="M {} {} L {} {} M {} {} L {} {}" stroke="#1565c0" stroke-width="{}" fill="none"/>"##,
        num(g.x - half),
        num(g.y - half),
        num(g.x + half),
        num(g.y + half),
        num(g.x - half),
        num(g.y + half),
        num(g.x + half),
        num(g.y - half),
        num(stroke * 2.0)
    );
    out.push_str("</svg>\n");
    out
}

fn shape_svg(out: &mut String, shape: &Shape, flip: impl Fn(Point) -> Point, style: &str, stroke: f64) {
    match *shape {
        Shape::Circle { center, radius } => {
            let c = flip(center);
            let _ = writeln!(
                out,
                r#"    <circle cx="{}" cy="{}" r="{}" {style} stroke-width="{}"/>"#,
                num(c.x),
                num(c.y),
                num(radius),
                num(stroke)
            );
        }
        Shape::Rect { min, max } => {
            let top_left = flip(Point::new(min.x, max.y));
            let _ = writeln!(
                out,
                r#"    <rect x="{}" y="{}" width="{}" height="{}" {style} stroke-width="{}"/>"#,
                num(top_left.x),
                num(top_left.y),
                num(max.x - min.x),
                num(max.y - min.y),
                num(stroke)
            );
        }
    }
}

fn polyline(out: &mut String, id: &str, points: impl Iterator<Item = Point>, color: &str, width: f64) {
    let pts: Vec<String> = points.map(|p| format!("{},{}", num(p.x), num(p.y))).collect();
    let _ = writeln!(
        out,
        r#"  <polyline id="{id}" points="{}" fill="none" stroke="{color}" stroke-width="{}"/>"#,
        pts.join(" "),
        num(width)
    );
}

/// Trajectory positions of a run, for [`Layers::trajectory`].
pub fn trajectory_points(rec: &RunRecord) -> Vec<Point> {
    rec.states().map(|s| s.position()).collect()
}
