use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use rrt_mppi::mppi::mppi_step;
use rrt_mppi::planner::horizon_mean;
use rrt_mppi::rrt::{self, PointIndex};
use rrt_mppi::{Lanes, Point, RrtConfig, Scenario, State};

fn offline_rrt(c: &mut Criterion) {
    let s = Scenario::preset_static();
    c.bench_function("rrt_plan_static", |b| {
        let mut seed = 0;
        b.iter(|| {
            seed += 1;
            let cfg = RrtConfig { seed, ..s.planner.rrt };
            black_box(rrt::plan(&s.environment, &cfg, 0.0).unwrap().path.len())
        })
    });
}

fn nearest(c: &mut Criterion) {
    let s = Scenario::preset_static();
    let bounds = s.environment.bounds;
    let mut group = c.benchmark_group("nearest");
    for n in [1_000usize, 10_000] {
        let points: Vec<Point> = (0..n)
            .map(|i| {
                let f = i as f64 * 0.618_033_988_749_895;
                Point::new(
                    bounds.min.x + f.fract() * bounds.width(),
                    bounds.min.y + (i as f64 / n as f64) * bounds.height(),
                )
            })
            .collect();
        let index = PointIndex::from_points(bounds, &points);
        let q = Point::new(31.3, 12.7);
        group.bench_with_input(BenchmarkId::new("grid", n), &index, |b, idx| {
            b.iter(|| idx.nearest(black_box(q)))
        });
        group.bench_with_input(BenchmarkId::new("scan", n), &points, |b, pts| {
            b.iter(|| rrt::nearest_neighbor(pts, black_box(q)))
        });
    }
    group.finish();
}

fn mppi_iteration(c: &mut Criterion) {
    let s = Scenario::preset_dynamic(4.0);
    let path = rrt::plan(&s.environment, &s.planner.rrt, 0.0).unwrap().path;
    let x = State::at(s.environment.start);
    let mean = horizon_mean(&path, &x, &s.planner.gains, &s.dynamics, s.planner.mppi.horizon);
    let mut group = c.benchmark_group("mppi_step");
    group.sample_size(10);
    for k in [1_000usize, 10_000] {
        let mut cfg = s.planner.mppi;
        cfg.samples = k;
        group.bench_with_input(BenchmarkId::from_parameter(k), &cfg, |b, cfg| {
            b.iter(|| mppi_step(&x, &mean, 0, 0.0, &s.environment, cfg, &s.dynamics, &Lanes::single()).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, offline_rrt, nearest, mppi_iteration);
criterion_main!(benches);
