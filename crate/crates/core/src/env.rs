//! Workspace geometry and collision queries.
//!
//! Obstacles are circles or axis-aligned rectangles whose shape can change
//! at scheduled instants. Everything outside the workspace bounds counts as
//! occupied, so a rollout that leaves the map is penalized exactly like one
//! that enters an obstacle.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Aabb, Point};

/// Default spacing between collision samples along a tree edge.
pub const DEFAULT_EDGE_RESOLUTION: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Shape {
    Circle { center: Point, radius: f64 },
    Rect { min: Point, max: Point },
}

impl Shape {
    pub fn circle(center: Point, radius: f64) -> Self {
        Shape::Circle { center, radius }
    }

    pub fn rect(min: Point, max: Point) -> Self {
        Shape::Rect { min, max }
    }

    /// Closed containment test.
    #[inline]
    pub fn contains(&self, p: Point) -> bool {
        match *self {
            Shape::Circle { center, radius } => p.distance_squared(center) <= radius * radius,
            Shape::Rect { min, max } => p.x >= min.x && p.x <= max.x && p.y >= min.y && p.y <= max.y,
        }
    }

    fn validate(&self, path: &str) -> Result<()> {
        match *self {
            Shape::Circle { center, radius } => {
                if !center.is_finite() {
                    return Err(Error::invalid(format!("{path}.center"), "must be finite"));
                }
                if !(radius > 0.0 && radius.is_finite()) {
                    return Err(Error::invalid(
                        format!("{path}.radius"),
                        format!("must be positive, got {radius}"),
                    ));
                }
            }
            Shape::Rect { min, max } => {
                if !Aabb::new(min, max).is_valid() {
                    return Err(Error::invalid(
                        path,
                        format!("min corner {min:?} must be strictly below max corner {max:?}"),
                    ));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleEntry {
    /// Activation time in seconds; the shape applies for all `t >= at`
    /// until the next entry.
    pub at: f64,
    pub shape: Shape,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Obstacle {
    pub shape: Shape,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub schedule: Vec<ScheduleEntry>,
}

impl Obstacle {
    pub fn fixed(shape: Shape) -> Self {
        Obstacle {
            shape,
            schedule: Vec::new(),
        }
    }

    pub fn with_change(mut self, at: f64, shape: Shape) -> Self {
        self.schedule.push(ScheduleEntry { at, shape });
        self
    }

    /// The shape in effect at `t`: the last entry with `at <= t`, else the
    /// base shape.
    #[inline]
    pub fn shape_at(&self, t: f64) -> &Shape {
        // Schedules are short; a reverse scan beats a binary search here.
        self.schedule
            .iter()
            .rev()
            .find(|e| e.at <= t)
            .map_or(&self.shape, |e| &e.shape)
    }

    pub fn validate(&self, path: &str) -> Result<()> {
        self.shape.validate(&format!("{path}.shape"))?;
        let mut prev = f64::NEG_INFINITY;
        for (k, entry) in self.schedule.iter().enumerate() {
            let entry_path = format!("{path}.schedule[{k}]");
            if !entry.at.is_finite() {
                return Err(Error::invalid(format!("{entry_path}.at"), "must be finite"));
            }
            if entry.at <= prev {
                return Err(Error::invalid(
                    format!("{entry_path}.at"),
                    format!(
                        "activation times must be strictly increasing ({} after {prev})",
                        entry.at
                    ),
                ));
            }
            prev = entry.at;
            entry.shape.validate(&format!("{entry_path}.shape"))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Environment {
    pub bounds: Aabb,
    #[serde(default)]
    pub obstacles: Vec<Obstacle>,
    pub start: Point,
    pub goal: Point,
}

impl Environment {
    pub fn new(bounds: Aabb, obstacles: Vec<Obstacle>, start: Point, goal: Point) -> Result<Self> {
        let env = Environment {
            bounds,
            obstacles,
            start,
            goal,
        };
        env.validate()?;
        Ok(env)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.bounds.is_valid() {
            return Err(Error::invalid("bounds", "min corner must be strictly below max corner"));
        }
        for (k, o) in self.obstacles.iter().enumerate() {
            o.validate(&format!("obstacles[{k}]"))?;
        }
        if !self.bounds.contains(self.start) {
            return Err(Error::invalid("start", "must lie inside bounds"));
        }
        if !self.bounds.contains(self.goal) {
            return Err(Error::invalid("goal", "must lie inside bounds"));
        }
        Ok(())
    }

    /// True when `p` is outside the workspace or inside any obstacle active
    /// at `t`.
    #[inline]
    pub fn is_in_obstacle(&self, p: Point, t: f64) -> bool {
        !self.bounds.contains(p) || self.obstacles.iter().any(|o| o.shape_at(t).contains(p))
    }

    /// Index of the first obstacle containing `p` at `t`.
    pub fn blocking_obstacle(&self, p: Point, t: f64) -> Option<usize> {
        self.obstacles.iter().position(|o| o.shape_at(t).contains(p))
    }

    pub fn active_shapes(&self, t: f64) -> Vec<Shape> {
        self.obstacles.iter().map(|o| *o.shape_at(t)).collect()
    }

    /// Obstacles resolved at `t`, for repeated queries at a fixed instant.
    pub fn snapshot(&self, t: f64) -> Snapshot {
        Snapshot {
            bounds: self.bounds,
            shapes: self.active_shapes(t),
        }
    }

    /// Edge check used by both tree planners; see [`Snapshot::segment_free`].
    pub fn segment_free(&self, a: Point, b: Point, t: f64, resolution: f64) -> bool {
        segment_free_with(a, b, resolution, |p| self.is_in_obstacle(p, t))
    }

    /// Every instant at which some obstacle changes shape, sorted.
    pub fn change_times(&self) -> Vec<f64> {
        let mut times: Vec<f64> = self
            .obstacles
            .iter()
            .flat_map(|o| o.schedule.iter().map(|e| e.at))
            .collect();
        times.sort_by(f64::total_cmp);
        times.dedup();
        times
    }
}

/// The obstacle set frozen at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub bounds: Aabb,
    pub shapes: Vec<Shape>,
}

impl Snapshot {
    #[inline]
    pub fn is_blocked(&self, p: Point) -> bool {
        !self.bounds.contains(p) || self.shapes.iter().any(|s| s.contains(p))
    }

    pub fn segment_free(&self, a: Point, b: Point, resolution: f64) -> bool {
        segment_free_with(a, b, resolution, |p| self.is_blocked(p))
    }
}

/// Samples the segment at `n + 1` evenly spaced points, endpoints included,
/// where `n` is the smallest power of two giving spacing `<= resolution`.
///
/// Power-of-two subdivision makes the sample set at `resolution / 2` a
/// superset of the one at `resolution`, and ordering the endpoints makes the
/// result independent of direction.
fn segment_free_with(a: Point, b: Point, resolution: f64, blocked: impl Fn(Point) -> bool) -> bool {
    debug_assert!(resolution > 0.0);
    let (a, b) = if (a.x, a.y) <= (b.x, b.y) { (a, b) } else { (b, a) };
    let len = a.distance(b);
    let mut n: u64 = 1;
    while len / (n as f64) > resolution && n < (1 << 40) {
        n <<= 1;
    }
    let d = b - a;
    (0..=n).all(|k| {
        let f = k as f64 / n as f64;
        !blocked(Point::new(a.x + d.x * f, a.y + d.y * f))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn open_env() -> Environment {
        Environment::new(
            Aabb::new(Point::new(0.0, 0.0), Point::new(10.0, 10.0)),
            vec![],
            Point::new(1.0, 1.0),
            Point::new(9.0, 9.0),
        )
        .unwrap()
    }

    fn growing_circle_env() -> Environment {
        let c = Point::new(5.0, 5.0);
        let mut env = open_env();
        env.obstacles
            .push(Obstacle::fixed(Shape::circle(c, 3.0)).with_change(0.5, Shape::circle(c, 5.0)));
        env
    }

    #[test]
    fn circle_center_is_inside() {
        let env = growing_circle_env();
        for t in [0.0, 0.3, 1.0, 100.0] {
            assert!(env.is_in_obstacle(Point::new(5.0, 5.0), t));
        }
    }

    #[test]
    fn outside_bounds_is_blocked() {
        let env = open_env();
        assert!(env.is_in_obstacle(Point::new(-0.1, 5.0), 0.0));
        assert!(env.is_in_obstacle(Point::new(5.0, 10.5), 0.0));
        assert!(!env.is_in_obstacle(Point::new(5.0, 5.0), 0.0));
    }

    #[test]
    fn schedule_switches_at_activation() {
        let env = growing_circle_env();
        let p = Point::new(9.0, 5.0);
        assert!(!env.is_in_obstacle(p, 0.4));
        assert!(env.is_in_obstacle(p, 0.6));
    }

    #[test]
    fn active_shapes_boundaries() {
        assert!(open_env().active_shapes(3.0).is_empty());
        let env = growing_circle_env();
        let c = Point::new(5.0, 5.0);
        assert_eq!(env.active_shapes(0.0), vec![Shape::circle(c, 3.0)]);
        assert_eq!(env.active_shapes(0.5), vec![Shape::circle(c, 5.0)]);
    }

    #[test]
    fn degenerate_segment() {
        let env = open_env();
        let a = Point::new(2.0, 2.0);
        assert!(env.segment_free(a, a, 0.0, 0.1));
    }

    #[test]
    fn segment_through_center_blocked() {
        let env = growing_circle_env();
        assert!(!env.segment_free(Point::new(0.5, 5.0), Point::new(9.9, 5.0), 0.0, 0.1));
    }

    #[test]
    fn grazing_segment_matches_dense_oracle() {
        // Circle of radius 3 at (5,5); the horizontal line y = 8.01 clears it
        // by 0.01, and y = 7.99 cuts a chord of length ~0.49.
        let env = growing_circle_env();
        for (y, expect_free) in [(8.01, true), (7.99, false)] {
            let a = Point::new(1.0, y);
            let b = Point::new(9.0, y);
            let n = (a.distance(b) / 1e-4).ceil() as usize;
            let oracle = (0..=n).all(|k| {
                let p = a + (b - a) * (k as f64 / n as f64);
                !env.is_in_obstacle(p, 0.0)
            });
            assert_eq!(oracle, expect_free);
            assert_eq!(env.segment_free(a, b, 0.0, 0.1), oracle, "y = {y}");
        }
    }

    #[test]
    fn validation_errors() {
        let bad = Obstacle::fixed(Shape::circle(Point::new(1.0, 1.0), 0.0));
        assert!(matches!(bad.validate("o"), Err(Error::Invalid { path, .. }) if path == "o.shape.radius"));

        let bad = Obstacle::fixed(Shape::rect(Point::new(1.0, 1.0), Point::new(1.0, 2.0)));
        assert!(bad.validate("o").is_err());

        let c = Point::new(1.0, 1.0);
        let bad = Obstacle::fixed(Shape::circle(c, 1.0))
            .with_change(1.0, Shape::circle(c, 2.0))
            .with_change(0.5, Shape::circle(c, 3.0));
        assert!(matches!(bad.validate("o"), Err(Error::Invalid { path, .. }) if path == "o.schedule[1].at"));

        let r = Environment::new(
            Aabb::new(Point::new(0.0, 0.0), Point::new(1.0, 1.0)),
            vec![],
            Point::new(2.0, 0.5),
            Point::new(0.5, 0.5),
        );
        assert!(matches!(r, Err(Error::Invalid { path, .. }) if path == "start"));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn pt() -> impl Strategy<Value = Point> {
            (0.0..10.0f64, 0.0..10.0f64).prop_map(|(x, y)| Point::new(x, y))
        }

        proptest! {
            #[test]
            fn segment_free_is_symmetric(a in pt(), b in pt(), res in 0.01..2.0f64) {
                let env = growing_circle_env();
                prop_assert_eq!(env.segment_free(a, b, 0.0, res), env.segment_free(b, a, 0.0, res));
            }

            #[test]
            fn finer_resolution_never_frees(a in pt(), b in pt(), res in 0.01..2.0f64) {
                let env = growing_circle_env();
                if !env.segment_free(a, b, 0.0, res) {
                    prop_assert!(!env.segment_free(a, b, 0.0, res / 2.0));
                }
            }

            #[test]
            fn schedule_lookup_constant_between_changes(t1 in -1.0..0.49f64, dt in 0.0..0.01f64) {
                let env = growing_circle_env();
                prop_assert_eq!(env.active_shapes(t1), env.active_shapes(t1 + dt));
            }
        }
    }
}
