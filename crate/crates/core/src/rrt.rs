//! Rapidly-exploring random trees over 2D positions.
//!
//! [`plan`] grows a single tree from the start until a new vertex lands
//! within `gamma` of the goal. [`replan`] grows a tree from the robot's
//! current position and stops as soon as it reaches either the goal or any
//! waypoint of the previous nominal path, so the caller can keep following
//! the old path from that junction on.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::{Environment, Snapshot, DEFAULT_EDGE_RESOLUTION};
use crate::error::{Error, Result};
use crate::geometry::{Aabb, Point};

/// Point sets up to this size are searched linearly; larger ones through a
/// uniform grid.
pub const LINEAR_SCAN_LIMIT: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RrtConfig {
    /// Steer radius, also the goal capture radius.
    pub gamma: f64,
    pub max_iters: usize,
    /// Probability of sampling the goal instead of a uniform point.
    pub goal_bias: f64,
    /// Spacing of collision samples along an edge.
    pub resolution: f64,
    pub seed: u64,
}

impl Default for RrtConfig {
    fn default() -> Self {
        RrtConfig {
            gamma: 0.5,
            max_iters: 20_000,
            goal_bias: 0.05,
            resolution: DEFAULT_EDGE_RESOLUTION,
            seed: 0,
        }
    }
}

impl RrtConfig {
    pub fn validate(&self, path: &str) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::invalid(format!("{path}.gamma"), "must be positive"));
        }
        if self.max_iters < 1 {
            return Err(Error::invalid(format!("{path}.max_iters"), "must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.goal_bias) {
            return Err(Error::invalid(format!("{path}.goal_bias"), "must be in [0, 1]"));
        }
        if !(self.resolution > 0.0 && self.resolution.is_finite()) {
            return Err(Error::invalid(format!("{path}.resolution"), "must be positive"));
        }
        Ok(())
    }
}

/// Vertices with parent links. The root has no parent.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Tree {
    pub vertices: Vec<Point>,
    pub parent: Vec<Option<usize>>,
    pub root: usize,
}

impl Tree {
    pub fn new(root: Point) -> Self {
        Tree {
            vertices: vec![root],
            parent: vec![None],
            root: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn push(&mut self, p: Point, parent: usize) -> usize {
        self.vertices.push(p);
        self.parent.push(Some(parent));
        self.vertices.len() - 1
    }

    /// Walks parent links from `leaf` back to the root.
    pub fn extract_path(&self, leaf: usize) -> Path {
        let mut waypoints = vec![self.vertices[leaf]];
        let mut cur = leaf;
        while let Some(p) = self.parent[cur] {
            waypoints.push(self.vertices[p]);
            cur = p;
        }
        waypoints.reverse();
        Path { waypoints }
    }

    /// `(parent, child)` vertex pairs.
    pub fn edges(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        self.parent
            .iter()
            .enumerate()
            .filter_map(|(i, p)| p.map(|p| (self.vertices[p], self.vertices[i])))
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Path {
    pub waypoints: Vec<Point>,
}

impl Path {
    pub fn new(waypoints: Vec<Point>) -> Self {
        Path { waypoints }
    }

    pub fn len(&self) -> usize {
        self.waypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waypoints.is_empty()
    }

    pub fn first(&self) -> Option<Point> {
        self.waypoints.first().copied()
    }

    pub fn last(&self) -> Option<Point> {
        self.waypoints.last().copied()
    }

    pub fn length(&self) -> f64 {
        self.waypoints.windows(2).map(|w| w[0].distance(w[1])).sum()
    }

    /// Checks spacing `<= gamma + 1e-9` and that every edge is collision
    /// free against the obstacles at `t`. Returns a description of the
    /// first violation.
    pub fn check(&self, env: &Environment, t: f64, gamma: f64, resolution: f64) -> std::result::Result<(), String> {
        if self.waypoints.is_empty() {
            return Err("empty path".into());
        }
        for (k, w) in self.waypoints.windows(2).enumerate() {
            let d = w[0].distance(w[1]);
            if d > gamma + 1e-9 {
                return Err(format!("edge {k} has length {d} > {gamma}"));
            }
            if !env.segment_free(w[0], w[1], t, resolution) {
                return Err(format!("edge {k} {:?} -> {:?} is in collision", w[0], w[1]));
            }
        }
        Ok(())
    }
}

/// Nearest-neighbor index: linear scan for small sets, a uniform grid once
/// the set grows past [`LINEAR_SCAN_LIMIT`]. Ties go to the lowest index in
/// both modes.
#[derive(Debug, Clone)]
pub struct PointIndex {
    points: Vec<Point>,
    region: Aabb,
    grid: Option<Grid>,
}

#[derive(Debug, Clone)]
struct Grid {
    region: Aabb,
    cell: f64,
    nx: usize,
    ny: usize,
    cells: Vec<Vec<u32>>,
}

impl Grid {
    fn new(region: Aabb, expected: usize) -> Self {
        // Aim for a few points per cell at build time.
        let area = region.width() * region.height();
        let cell = (area / expected.max(1) as f64 * 4.0).sqrt().max(1e-9);
        let nx = ((region.width() / cell).ceil() as usize).clamp(1, 4096);
        let ny = ((region.height() / cell).ceil() as usize).clamp(1, 4096);
        Grid {
            region,
            cell,
            nx,
            ny,
            cells: vec![Vec::new(); nx * ny],
        }
    }

    fn cell_of(&self, p: Point) -> (usize, usize) {
        let p = self.region.clamp(p);
        let cx = (((p.x - self.region.min.x) / self.cell) as usize).min(self.nx - 1);
        let cy = (((p.y - self.region.min.y) / self.cell) as usize).min(self.ny - 1);
        (cx, cy)
    }

    fn insert(&mut self, p: Point, idx: usize) {
        let (cx, cy) = self.cell_of(p);
        self.cells[cy * self.nx + cx].push(idx as u32);
    }

    fn nearest(&self, points: &[Point], q: Point) -> usize {
        let (cx, cy) = self.cell_of(q);
        let (cx, cy) = (cx as isize, cy as isize);
        let mut best: Option<(f64, usize)> = None;
        let max_ring = self.nx.max(self.ny) as isize;
        for r in 0..=max_ring {
            let mut visit = |x: isize, y: isize| {
                if x < 0 || y < 0 || x >= self.nx as isize || y >= self.ny as isize {
                    return;
                }
                for &i in &self.cells[y as usize * self.nx + x as usize] {
                    let i = i as usize;
                    let d = points[i].distance_squared(q);
                    if best.is_none_or(|(bd, bi)| d < bd || (d == bd && i < bi)) {
                        best = Some((d, i));
                    }
                }
            };
            if r == 0 {
                visit(cx, cy);
            } else {
                for x in (cx - r)..=(cx + r) {
                    visit(x, cy - r);
                    visit(x, cy + r);
                }
                for y in (cy - r + 1)..=(cy + r - 1) {
                    visit(cx - r, y);
                    visit(cx + r, y);
                }
            }
            // Anything in ring r + 1 or beyond is at least r cells away.
            if let Some((bd, _)) = best {
                let bound = r as f64 * self.cell;
                if bd < bound * bound {
                    break;
                }
            }
        }
        best.expect("grid holds at least one point").1
    }
}

impl PointIndex {
    /// `region` sizes the grid; points outside it are still handled.
    pub fn new(region: Aabb) -> Self {
        PointIndex {
            points: Vec::new(),
            region,
            grid: None,
        }
    }

    pub fn from_points(region: Aabb, points: &[Point]) -> Self {
        let mut idx = PointIndex::new(region);
        for &p in points {
            idx.push(p);
        }
        idx
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn push(&mut self, p: Point) -> usize {
        let idx = self.points.len();
        self.points.push(p);
        if let Some(grid) = &mut self.grid {
            grid.insert(p, idx);
        } else if self.points.len() > LINEAR_SCAN_LIMIT {
            let mut grid = Grid::new(self.region, self.points.len());
            for (i, &q) in self.points.iter().enumerate() {
                grid.insert(q, i);
            }
            self.grid = Some(grid);
        }
        idx
    }

    pub fn nearest(&self, q: Point) -> Result<usize> {
        if self.points.is_empty() {
            return Err(Error::EmptyPointSet);
        }
        Ok(match &self.grid {
            Some(grid) => grid.nearest(&self.points, q),
            None => linear_nearest(&self.points, q),
        })
    }
}

fn linear_nearest(points: &[Point], q: Point) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, p) in points.iter().enumerate() {
        let d = p.distance_squared(q);
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

/// Index of the point closest to `q`, lowest index on ties.
pub fn nearest_neighbor(points: &[Point], q: Point) -> Result<usize> {
    if points.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    if points.len() <= LINEAR_SCAN_LIMIT {
        return Ok(linear_nearest(points, q));
    }
    let mut region = Aabb::new(points[0], points[0]);
    for p in points {
        region.min.x = region.min.x.min(p.x);
        region.min.y = region.min.y.min(p.y);
        region.max.x = region.max.x.max(p.x);
        region.max.y = region.max.y.max(p.y);
    }
    region.max.x += 1e-9;
    region.max.y += 1e-9;
    PointIndex::from_points(region, points).nearest(q)
}

/// Moves from `from` toward `toward` by at most `gamma`.
pub fn steer(from: Point, toward: Point, gamma: f64) -> Point {
    let d = toward - from;
    let len = d.norm();
    if len <= gamma {
        return toward;
    }
    let p = from + d * (gamma / len);
    // Rounding can leave the step a hair longer than gamma.
    if p.distance(from) > gamma {
        from + d * (gamma / len * (1.0 - 1e-12))
    } else {
        p
    }
}

/// With probability `goal_bias` the goal, otherwise uniform over `bounds`.
pub fn sample_state<R: Rng + ?Sized>(rng: &mut R, bounds: &Aabb, goal: Point, goal_bias: f64) -> Point {
    if goal_bias > 0.0 && rng.random::<f64>() < goal_bias {
        return goal;
    }
    Point::new(
        rng.random_range(bounds.min.x..=bounds.max.x),
        rng.random_range(bounds.min.y..=bounds.max.y),
    )
}

/// Result of a tree search.
#[derive(Debug, Clone)]
pub struct Search {
    pub path: Path,
    pub tree: Tree,
    pub iterations: usize,
    /// For [`replan`]: index into the nominal path where the new branch
    /// rejoins it, or `None` when the branch ends at the goal.
    pub junction: Option<usize>,
}

/// Single-tree RRT from `env.start` with obstacles frozen at `t`.
pub fn plan(env: &Environment, cfg: &RrtConfig, t: f64) -> Result<Search> {
    plan_from(env, env.start, cfg, t)
}

/// As [`plan`] but rooted at an arbitrary position.
pub fn plan_from(env: &Environment, start: Point, cfg: &RrtConfig, t: f64) -> Result<Search> {
    let snap = env.snapshot(t);
    if snap.is_blocked(start) {
        return Err(Error::StartInCollision { x: start.x, y: start.y });
    }
    let goal = env.goal;
    let mut tree = Tree::new(start);
    let mut index = PointIndex::new(env.bounds);
    index.push(start);

    if let Some(path) = connect(&snap, &mut tree, 0, goal, cfg) {
        return Ok(Search {
            path,
            tree,
            iterations: 0,
            junction: None,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for iter in 1..=cfg.max_iters {
        let sample = sample_state(&mut rng, &env.bounds, goal, cfg.goal_bias);
        let near = index.nearest(sample)?;
        let Some(new) = extend(&snap, &mut tree, &mut index, near, sample, cfg) else {
            continue;
        };
        if let Some(path) = connect(&snap, &mut tree, new, goal, cfg) {
            return Ok(Search {
                path,
                tree,
                iterations: iter,
                junction: None,
            });
        }
    }
    Err(Error::PlanningFailed {
        iterations: cfg.max_iters,
    })
}

/// Replanning RRT.
///
/// The previous `nominal` path is kept as a second vertex set. A fresh tree
/// grows from `current`; each new vertex is tested against the goal and
/// against its nearest nominal waypoint, and the first one within `gamma`
/// (with a free connecting edge) ends the search.
pub fn replan(nominal: &Path, current: Point, env: &Environment, cfg: &RrtConfig, t: f64) -> Result<Search> {
    if nominal.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    let snap = env.snapshot(t);
    if snap.is_blocked(current) {
        return Err(Error::StartInCollision {
            x: current.x,
            y: current.y,
        });
    }
    let goal = env.goal;
    let nominal_index = PointIndex::from_points(env.bounds, &nominal.waypoints);
    let mut tree = Tree::new(current);
    let mut index = PointIndex::new(env.bounds);
    index.push(current);

    let try_finish = |tree: &mut Tree, v: usize| -> Result<Option<(Path, Option<usize>)>> {
        if let Some(path) = connect(&snap, tree, v, goal, cfg) {
            return Ok(Some((path, None)));
        }
        let w = nominal_index.nearest(tree.vertices[v])?;
        let junction = nominal.waypoints[w];
        if let Some(path) = connect(&snap, tree, v, junction, cfg) {
            return Ok(Some((path, Some(w))));
        }
        Ok(None)
    };

    if let Some((path, junction)) = try_finish(&mut tree, 0)? {
        return Ok(Search {
            path,
            tree,
            iterations: 0,
            junction,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for iter in 1..=cfg.max_iters {
        let sample = sample_state(&mut rng, &env.bounds, goal, cfg.goal_bias);
        let near = index.nearest(sample)?;
        let Some(new) = extend(&snap, &mut tree, &mut index, near, sample, cfg) else {
            continue;
        };
        if let Some((path, junction)) = try_finish(&mut tree, new)? {
            return Ok(Search {
                path,
                tree,
                iterations: iter,
                junction,
            });
        }
    }
    Err(Error::PlanningFailed {
        iterations: cfg.max_iters,
    })
}

/// Steers from vertex `near` toward `sample` and inserts the result when
/// the edge is free. Zero-length extensions are skipped.
fn extend(
    snap: &Snapshot,
    tree: &mut Tree,
    index: &mut PointIndex,
    near: usize,
    sample: Point,
    cfg: &RrtConfig,
) -> Option<usize> {
    let from = tree.vertices[near];
    let s = steer(from, sample, cfg.gamma);
    if s == from || !snap.segment_free(from, s, cfg.resolution) {
        return None;
    }
    index.push(s);
    Some(tree.push(s, near))
}

/// Adds `target` below vertex `v` when it is strictly within `gamma` and the
/// edge is free, returning the root-to-target path.
fn connect(snap: &Snapshot, tree: &mut Tree, v: usize, target: Point, cfg: &RrtConfig) -> Option<Path> {
    let p = tree.vertices[v];
    if p.distance(target) >= cfg.gamma || !snap.segment_free(p, target, cfg.resolution) {
        return None;
    }
    let leaf = if p == target { v } else { tree.push(target, v) };
    Some(tree.extract_path(leaf))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{Obstacle, Shape};

    fn region() -> Aabb {
        Aabb::new(Point::new(0.0, 0.0), Point::new(50.0, 27.0))
    }

    fn open_env(start: Point, goal: Point) -> Environment {
        Environment::new(region(), vec![], start, goal).unwrap()
    }

    fn brute(points: &[Point], q: Point) -> usize {
        // Independent oracle: full sort by (distance, index).
        let mut order: Vec<usize> = (0..points.len()).collect();
        order.sort_by(|&a, &b| {
            points[a]
                .distance_squared(q)
                .total_cmp(&points[b].distance_squared(q))
                .then(a.cmp(&b))
        });
        order[0]
    }

    #[test]
    fn steer_examples() {
        let o = Point::new(0.0, 0.0);
        assert_eq!(steer(o, Point::new(0.3, 0.0), 0.5), Point::new(0.3, 0.0));
        assert_eq!(steer(o, Point::new(10.0, 0.0), 0.5), Point::new(0.5, 0.0));
        let s = steer(Point::new(1.0, 1.0), Point::new(4.0, 5.0), 0.5);
        assert!((s.x - 1.3).abs() < 1e-12 && (s.y - 1.4).abs() < 1e-12);
        assert_eq!(steer(o, o, 0.5), o);
    }

    #[test]
    fn nearest_basic() {
        assert!(matches!(
            nearest_neighbor(&[], Point::default()),
            Err(Error::EmptyPointSet)
        ));
        assert_eq!(
            nearest_neighbor(&[Point::new(3.0, 3.0)], Point::new(-1.0, 0.0)).unwrap(),
            0
        );
        let pts = [Point::new(0.0, 0.0), Point::new(1.0, 1.0), Point::new(2.0, 2.0)];
        assert_eq!(nearest_neighbor(&pts, Point::new(1.0, 1.0)).unwrap(), 1);
        // Tie between 0 and 2 goes to the lower index.
        assert_eq!(nearest_neighbor(&pts[..], Point::new(1.0, -1.0)).unwrap(), 0);
    }

    #[test]
    fn nearest_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let r = region();
        let pts: Vec<Point> = (0..1000)
            .map(|_| sample_state(&mut rng, &r, Point::default(), 0.0))
            .collect();
        for _ in 0..100 {
            let q = sample_state(&mut rng, &r, Point::default(), 0.0);
            assert_eq!(nearest_neighbor(&pts, q).unwrap(), brute(&pts, q));
        }
    }

    #[test]
    fn grid_index_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let r = region();
        let mut pts: Vec<Point> = (0..9000)
            .map(|_| sample_state(&mut rng, &r, Point::default(), 0.0))
            .collect();
        // Duplicates, a far-away cluster, and points outside the region.
        pts.extend_from_slice(&[pts[5], pts[17], Point::new(-30.0, 80.0), Point::new(120.0, -4.0)]);
        let idx = PointIndex::from_points(r, &pts);
        assert!(idx.grid.is_some());
        for k in 0..300 {
            let q = if k % 10 == 0 {
                Point::new(rng.random_range(-60.0..110.0), rng.random_range(-60.0..90.0))
            } else {
                sample_state(&mut rng, &r, Point::default(), 0.0)
            };
            assert_eq!(idx.nearest(q).unwrap(), brute(&pts, q), "query {q:?}");
        }
        assert_eq!(idx.nearest(pts[5]).unwrap(), 5);
        assert_eq!(nearest_neighbor(&pts, pts[17]).unwrap(), 17);
    }

    #[test]
    fn sample_state_goal_bias_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let goal = Point::new(49.0, 24.0);
        for _ in 0..100 {
            assert_eq!(sample_state(&mut rng, &region(), goal, 1.0), goal);
        }
    }

    #[test]
    fn sample_state_uniform_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let r = region();
        let n = 100_000;
        let (mut sx, mut sy) = (0.0, 0.0);
        for _ in 0..n {
            let p = sample_state(&mut rng, &r, Point::default(), 0.0);
            assert!(r.contains(p));
            sx += p.x;
            sy += p.y;
        }
        let c = r.center();
        assert!((sx / n as f64 - c.x).abs() < 0.02 * c.x);
        assert!((sy / n as f64 - c.y).abs() < 0.02 * c.y);
    }

    #[test]
    fn sample_state_reproducible() {
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..10)
                .map(|_| sample_state(&mut rng, &region(), Point::default(), 0.1))
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(9), draw(9));
        assert_ne!(draw(9), draw(10));
    }

    #[test]
    fn plan_in_open_space() {
        let env = open_env(Point::new(10.0, 10.0), Point::new(11.0, 10.0));
        let cfg = RrtConfig::default();
        let res = plan(&env, &cfg, 0.0).unwrap();
        assert!(res.path.len() >= 2);
        assert_eq!(res.path.first(), Some(env.start));
        assert_eq!(res.path.last(), Some(env.goal));
        res.path.check(&env, 0.0, cfg.gamma, cfg.resolution).unwrap();
    }

    #[test]
    fn plan_enclosed_goal_fails() {
        let goal = Point::new(40.0, 15.0);
        let mut env = open_env(Point::new(5.0, 5.0), goal);
        // A thick ring of rectangles around the goal.
        let (a, b) = (3.0, 5.0);
        for (min, max) in [
            ((-b, -b), (b, -a)),
            ((-b, a), (b, b)),
            ((-b, -b), (-a, b)),
            ((a, -b), (b, b)),
        ] {
            env.obstacles.push(Obstacle::fixed(Shape::rect(
                Point::new(goal.x + min.0, goal.y + min.1),
                Point::new(goal.x + max.0, goal.y + max.1),
            )));
        }
        let cfg = RrtConfig {
            max_iters: 3000,
            ..Default::default()
        };
        assert_eq!(
            plan(&env, &cfg, 0.0).unwrap_err(),
            Error::PlanningFailed { iterations: 3000 }
        );
    }

    #[test]
    fn plan_rejects_blocked_start() {
        let mut env = open_env(Point::new(5.0, 5.0), Point::new(40.0, 20.0));
        env.obstacles
            .push(Obstacle::fixed(Shape::circle(Point::new(5.0, 5.0), 1.0)));
        assert!(matches!(
            plan(&env, &RrtConfig::default(), 0.0),
            Err(Error::StartInCollision { .. })
        ));
    }

    #[test]
    fn tree_size_bounded() {
        let env = open_env(Point::new(1.0, 1.0), Point::new(49.0, 26.0));
        let cfg = RrtConfig {
            max_iters: 50,
            goal_bias: 0.0,
            ..Default::default()
        };
        match plan(&env, &cfg, 0.0) {
            Ok(r) => assert!(r.tree.len() <= cfg.max_iters + 2),
            Err(e) => assert_eq!(e, Error::PlanningFailed { iterations: 50 }),
        }
    }

    #[test]
    fn replan_immediate_junction() {
        let env = open_env(Point::new(1.0, 1.0), Point::new(45.0, 20.0));
        let nominal = Path::new(vec![Point::new(1.0, 1.0), Point::new(1.5, 1.0), Point::new(2.0, 1.0)]);
        let current = Point::new(1.6, 1.3);
        let r = replan(&nominal, current, &env, &RrtConfig::default(), 0.0).unwrap();
        assert_eq!(r.path.waypoints, vec![current, Point::new(1.5, 1.0)]);
        assert_eq!(r.junction, Some(1));
        assert_eq!(r.iterations, 0);
    }

    #[test]
    fn replan_around_blocked_nominal_reaches_goal() {
        // The nominal path runs along y = 5 through a wall that now blocks
        // it; the only junction candidates are the start-side waypoints
        // (which are far from `current`) and waypoints inside the wall. An
        // open corridor at the top leads to the goal.
        let goal = Point::new(45.0, 5.0);
        let mut env = open_env(Point::new(2.0, 5.0), goal);
        env.obstacles.push(Obstacle::fixed(Shape::rect(
            Point::new(20.0, 0.0),
            Point::new(48.0, 22.0),
        )));
        let nominal = Path::new((0..=86).map(|k| Point::new(2.0 + 0.5 * k as f64, 5.0)).collect());
        let current = Point::new(12.0, 24.0);
        let cfg = RrtConfig {
            seed: 5,
            ..Default::default()
        };
        // Drop the unblocked part of the nominal path so that only the goal
        // can terminate the search.
        let blocked_part = Path::new(nominal.waypoints[40..76].to_vec());
        let r = replan(&blocked_part, current, &env, &cfg, 0.0);
        // The goal sits inside the wall, so nothing can connect.
        assert!(r.is_err());

        env.obstacles[0] = Obstacle::fixed(Shape::rect(Point::new(20.0, 0.0), Point::new(40.0, 22.0)));
        let r = replan(&blocked_part, current, &env, &cfg, 0.0).unwrap();
        assert_eq!(r.junction, None);
        assert_eq!(r.path.first(), Some(current));
        assert_eq!(r.path.last(), Some(goal));
        r.path.check(&env, 0.0, cfg.gamma, cfg.resolution).unwrap();
    }

    #[test]
    fn replan_edges_are_free() {
        let env = crate::scenario::Scenario::preset_static().environment;
        let cfg = RrtConfig {
            seed: 1,
            ..Default::default()
        };
        let nominal = plan(&env, &cfg, 0.0).unwrap().path;
        let r = replan(&nominal, env.start, &env, &RrtConfig { seed: 2, ..cfg }, 0.0).unwrap();
        r.path.check(&env, 0.0, cfg.gamma, cfg.resolution).unwrap();
        assert_eq!(r.path.first(), Some(env.start));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn pt() -> impl Strategy<Value = Point> {
            (-100.0..100.0f64, -100.0..100.0f64).prop_map(|(x, y)| Point::new(x, y))
        }

        proptest! {
            #[test]
            fn steer_stays_within_gamma(a in pt(), b in pt(), gamma in 1e-3..10.0f64) {
                let s = steer(a, b, gamma);
                prop_assert!(s.distance(a) <= gamma);
            }

            #[test]
            fn replan_junction_on_nominal(seed in 0u64..20, cx in 5.0..45.0f64, cy in 3.0..24.0f64) {
                let env = open_env(Point::new(2.0, 3.0), Point::new(49.0, 24.0));
                let nominal = Path::new((0..40).map(|k| Point::new(2.0 + 0.5 * k as f64, 3.0)).collect());
                let cfg = RrtConfig { seed, max_iters: 5000, ..Default::default() };
                let r = replan(&nominal, Point::new(cx, cy), &env, &cfg, 0.0).unwrap();
                r.path.check(&env, 0.0, cfg.gamma, cfg.resolution).unwrap();
                match r.junction {
                    Some(w) => prop_assert_eq!(r.path.last(), Some(nominal.waypoints[w])),
                    None => prop_assert_eq!(r.path.last(), Some(env.goal)),
                }
            }
        }
    }
}
