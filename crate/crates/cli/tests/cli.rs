use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_rrt-mppi");

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn rrt_mppi(args: &[&str]) -> Output {
    cli(args, &[])
}

fn cli(args: &[&str], vars: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(BIN);
    cmd.args(args);
    for (k, v) in vars {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn error_line(out: &Output) -> Value {
    let stderr = String::from_utf8_lossy(&out.stderr);
    let line = stderr.lines().last().expect("stderr has an error line");
    serde_json::from_str(line).expect("error line is JSON")
}

fn write_json(dir: &Path, name: &str, v: &Value) -> String {
    let p = dir.join(name);
    fs::write(&p, v.to_string()).unwrap();
    p.to_str().unwrap().to_string()
}

fn minimal(obstacles: Value) -> Value {
    serde_json::json!({
        "version": 1,
        "environment": {
            "bounds": {"min": [0, 0], "max": [10, 10]},
            "obstacles": obstacles,
            "start": [1, 1],
            "goal": [9, 9]
        }
    })
}

#[test]
fn sample_size_table_has_k1() {
    let out = rrt_mppi(&["sample-size", "--eps1", "0.02", "--rho1", "0.05"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("K1 = 9223"), "{text}");

    let out = rrt_mppi(&["sample-size", "--json", "--means", "0,1,4"]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let k2: Vec<u64> = v["rows"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["k2"].as_u64().unwrap())
        .collect();
    assert!(k2.windows(2).all(|w| w[0] < w[1]), "{k2:?}");
}

#[test]
fn sample_size_rejects_eps1_above_e1() {
    let out = rrt_mppi(&["sample-size", "--eps1", "0.6", "--e1-hat", "0.5"]);
    assert_eq!(out.status.code(), Some(4));
    assert_eq!(error_line(&out)["error"], "weight_mean_bound");
}

#[test]
fn plan_static_seed0_reaches_goal() {
    let dir = tempfile::tempdir().unwrap();
    let out = rrt_mppi(&[
        "plan",
        "--scenario",
        scenario("static.json").to_str().unwrap(),
        "--seed",
        "0",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    let header = csv.lines().next().unwrap();
    assert_eq!(
        header,
        "step,t,x,y,theta,phi,v,omega,deviation,replanned,min_rollout_cost,ess"
    );
    let last: Vec<&str> = csv.lines().last().unwrap().split(',').collect();
    let (x, y): (f64, f64) = (last[2].parse().unwrap(), last[3].parse().unwrap());
    assert!((x - 49.0).hypot(y - 24.0) <= 1.0, "ended at ({x}, {y})");
    assert!(dir.path().join("run.svg").exists());
    assert!(dir.path().join("path.csv").exists());
}

#[test]
fn render_empty_environment() {
    let dir = tempfile::tempdir().unwrap();
    let scen = write_json(dir.path(), "empty.json", &minimal(Value::Array(vec![])));
    let out = rrt_mppi(&["render", "--scenario", &scen]);
    assert!(out.status.success());
    let svg = String::from_utf8(out.stdout).unwrap();
    assert!(svg.starts_with("<?xml"));
    assert!(svg.contains("viewBox=\""));
    assert_eq!(svg.matches("<svg").count(), 1);
    assert!(svg.trim_end().ends_with("</svg>"));
    let ids: Vec<&str> = svg
        .split("id=\"")
        .skip(1)
        .map(|s| s.split('"').next().unwrap())
        .collect();
    assert_eq!(ids, ["bounds", "start", "goal"]);
    assert!(!svg.contains("<circle"));
}

#[test]
fn malformed_scenario_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.json");
    fs::write(&p, "{ \"version\": 1, ").unwrap();
    let out = rrt_mppi(&["plan", "--scenario", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_line(&out)["error"], "parse");

    let out = rrt_mppi(&["plan", "--scenario", dir.path().join("missing.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_line(&out)["error"], "io");
}

#[test]
fn start_in_obstacle_exits_2_naming_it() {
    let dir = tempfile::tempdir().unwrap();
    let obstacles = serde_json::json!([
        {"shape": {"kind": "circle", "center": [5, 5], "radius": 1}},
        {"shape": {"kind": "rect", "min": [0.5, 0.5], "max": [1.5, 1.5]}}
    ]);
    let scen = write_json(dir.path(), "s.json", &minimal(obstacles));
    let out = rrt_mppi(&["rrt", "--scenario", &scen]);
    assert_eq!(out.status.code(), Some(2));
    let err = error_line(&out);
    assert_eq!(err["error"], "invalid");
    assert!(err["message"].as_str().unwrap().contains("obstacles[1]"), "{err}");
}

#[test]
fn enclosed_goal_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let walls = serde_json::json!([
        {"shape": {"kind": "rect", "min": [7, 7], "max": [10, 7.5]}},
        {"shape": {"kind": "rect", "min": [7, 7], "max": [7.5, 10]}}
    ]);
    let mut doc = minimal(walls);
    doc["planner"] = serde_json::json!({"rrt": {"max_iters": 500}});
    let scen = write_json(dir.path(), "s.json", &doc);
    for cmd in ["rrt", "plan"] {
        let out = rrt_mppi(&[cmd, "--scenario", &scen]);
        assert_eq!(out.status.code(), Some(3), "{cmd}");
        assert_eq!(error_line(&out)["error"], "planning_failed");
    }
}

#[test]
fn rrt_writes_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = rrt_mppi(&[
        "rrt",
        "--scenario",
        scenario("dynamic_plus4.json").to_str().unwrap(),
        "--seed",
        "3",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let summary: Value = serde_json::from_slice(&out.stdout).unwrap();
    let csv = fs::read_to_string(dir.path().join("path.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("index,x,y"));
    assert_eq!(csv.lines().count() as u64 - 1, summary["waypoints"].as_u64().unwrap());
}

#[test]
fn env_overrides_and_fixed_mean() {
    let scen = scenario("static.json");
    let out = cli(
        &["mppi", "--scenario", scen.to_str().unwrap(), "--mu", "1.5,0"],
        &[
            ("RRTMPPI_PLANNER__MPPI__SAMPLES", "20"),
            ("RRTMPPI_PLANNER__MAX_WALL_STEPS", "7"),
        ],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["mode"], "fixed:1.5,0");
    assert!(v["steps"].as_u64().unwrap() <= 7);

    let out = cli(
        &["plan", "--scenario", scen.to_str().unwrap()],
        &[("RRTMPPI_PLANNER__MPPI__SAMPLES", "0")],
    );
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_line(&out)["error"], "invalid");
}

#[test]
fn bench_is_deterministic_across_threads() {
    let scen = scenario("dynamic_plus2.json");
    let vars = [
        ("RRTMPPI_PLANNER__MPPI__SAMPLES", "30"),
        ("RRTMPPI_PLANNER__MAX_WALL_STEPS", "40"),
    ];
    let run = |threads: &str| {
        let dir = tempfile::tempdir().unwrap();
        let out = cli(
            &[
                "bench",
                "--scenario",
                scen.to_str().unwrap(),
                "--seeds",
                "0..3",
                "--mode",
                "rrt-mppi",
                "--mode",
                "fixed:1,0",
                "--radii",
                "2,8",
                "--threads",
                threads,
                "--out",
                dir.path().to_str().unwrap(),
            ],
            &vars,
        );
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let csv = fs::read_to_string(dir.path().join("bench.csv")).unwrap();
        let rows: Vec<String> = csv
            .lines()
            .map(|l| l.split(',').take(8).collect::<Vec<_>>().join(","))
            .collect();
        let agg = fs::read_to_string(dir.path().join("bench_aggregates.csv")).unwrap();
        (rows, agg)
    };
    let (a, agg) = run("1");
    let (b, _) = run("3");
    assert_eq!(a, b);
    // rrt-mppi at both radii, the fixed mean once.
    assert_eq!(a.len(), 1 + 2 * 3 + 3);
    assert_eq!(agg.lines().count(), 1 + 3);
}
