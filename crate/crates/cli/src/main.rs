use std::fs;
use std::num::NonZeroUsize;
use std::path::{Path as FsPath, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use rrt_mppi::planner::{self, RunOptions};
use rrt_mppi::report::{self, BenchReport, BenchRow, Layers};
use rrt_mppi::sample_size::{self, SampleSizeInputs};
use rrt_mppi::{rrt, Control, Error, Lanes, Mode, Outcome, RunRecord, Scenario};

#[derive(Parser)]
#[command(name = "rrt-mppi", version, about = "RRT-guided MPPI planning for a unicycle robot")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Offline tree search; writes the path.
    Rrt(RunArgs),
    /// Full closed loop with an RRT nominal mean.
    Plan(RunArgs),
    /// Closed loop with a constant sampling mean.
    Mppi {
        #[command(flatten)]
        run: RunArgs,
        /// Constant mean as `v,omega`.
        #[arg(long, default_value = "1,0", value_parser = parse_control)]
        mu: Control,
    },
    /// Sweep modes x seeds x replanning radii.
    Bench(BenchArgs),
    /// Rollout counts from the Hoeffding and Chebyshev bounds.
    SampleSize(SampleSizeArgs),
    /// SVG of the environment, optionally with one run drawn on top.
    Render(RenderArgs),
}

#[derive(Args)]
struct Common {
    /// Scenario file. `RRTMPPI_*` variables override its fields.
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<NonZeroUsize>,
    /// Score every rollout step against the obstacles at the rollout start.
    #[arg(long)]
    freeze_obstacles: bool,
    #[arg(long)]
    replan_radius: Option<f64>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    common: Common,
    /// Seed range `n..m` (end exclusive) or `n..=m`.
    #[arg(long, value_parser = parse_seeds)]
    seeds: Option<SeedRange>,
    /// Repeatable; defaults to the scenario's mode list.
    #[arg(long = "mode")]
    modes: Vec<Mode>,
    /// Additional radii to sweep, comma separated.
    #[arg(long, value_delimiter = ',')]
    radii: Vec<f64>,
}

#[derive(Args)]
struct SampleSizeArgs {
    #[arg(long, default_value_t = 0.02)]
    eps1: f64,
    #[arg(long, default_value_t = 0.05)]
    rho1: f64,
    #[arg(long, default_value_t = 0.1)]
    eps2: f64,
    #[arg(long, default_value_t = 0.1)]
    rho2: f64,
    #[arg(long, default_value_t = 0.5)]
    e1_hat: f64,
    #[arg(long, default_value_t = 1.0)]
    var: f64,
    /// Perturbation means to tabulate.
    #[arg(long, value_delimiter = ',', default_value = "0,0.5,1,2,4")]
    means: Vec<f64>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct RenderArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run this mode and draw the tree, paths and trajectory.
    #[arg(long)]
    mode: Option<Mode>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    threads: Option<NonZeroUsize>,
}

struct Failure {
    code: u8,
    kind: String,
    message: String,
}

impl Failure {
    fn new(code: u8, kind: &str, message: impl Into<String>) -> Self {
        Failure {
            code,
            kind: kind.into(),
            message: message.into(),
        }
    }

    fn io(path: &FsPath, e: std::io::Error) -> Self {
        Failure::new(1, "io", format!("{}: {e}", path.display()))
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Parse(_) | Error::Invalid { .. } | Error::Io { .. } | Error::StartInCollision { .. } => 2,
            Error::PlanningFailed { .. } => 3,
            _ => 4,
        };
        Failure::new(code, e.kind(), e.to_string())
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Rrt(a) => cmd_rrt(&a),
        Command::Plan(a) => cmd_run(&a, Mode::RrtMppi),
        Command::Mppi { run, mu } => cmd_run(&run, Mode::FixedMean(mu)),
        Command::Bench(a) => cmd_bench(&a),
        Command::SampleSize(a) => cmd_sample_size(&a),
        Command::Render(a) => cmd_render(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!(
                "{}",
                json!({"error": f.kind, "message": f.message, "exit_code": f.code})
            );
            ExitCode::from(f.code)
        }
    }
}

fn parse_control(s: &str) -> Result<Control, String> {
    let (v, w) = s.split_once(',').ok_or("expected `v,omega`")?;
    let v = v.trim().parse::<f64>().map_err(|e| e.to_string())?;
    let w = w.trim().parse::<f64>().map_err(|e| e.to_string())?;
    Ok(Control::new(v, w))
}

#[derive(Clone)]
struct SeedRange(Vec<u64>);

fn parse_seeds(s: &str) -> Result<SeedRange, String> {
    let (a, b, inclusive) = if let Some((a, b)) = s.split_once("..=") {
        (a, b, true)
    } else if let Some((a, b)) = s.split_once("..") {
        (a, b, false)
    } else {
        let n = s.parse::<u64>().map_err(|e| e.to_string())?;
        return Ok(SeedRange(vec![n]));
    };
    let a = a.parse::<u64>().map_err(|e| e.to_string())?;
    let b = b.parse::<u64>().map_err(|e| e.to_string())?;
    let seeds: Vec<u64> = if inclusive { (a..=b).collect() } else { (a..b).collect() };
    if seeds.is_empty() {
        return Err(format!("empty seed range `{s}`"));
    }
    Ok(SeedRange(seeds))
}

fn load(c: &Common) -> CliResult<Scenario> {
    let mut s = Scenario::load(&c.scenario)?;
    if c.freeze_obstacles {
        s.planner.mppi.freeze_obstacles = true;
    }
    if let Some(r) = c.replan_radius {
        s.planner.replan_radius = r;
    }
    s.validate()?;
    Ok(s)
}

fn lanes(threads: Option<NonZeroUsize>) -> CliResult<Lanes> {
    Ok(Lanes::new(threads.map_or(1, NonZeroUsize::get))?)
}

fn out_dir(c: &Common, s: &Scenario) -> CliResult<Option<PathBuf>> {
    let dir = c.out.clone().or_else(|| s.output_dir.as_ref().map(PathBuf::from));
    if let Some(d) = &dir {
        fs::create_dir_all(d).map_err(|e| Failure::io(d, e))?;
    }
    Ok(dir)
}

fn write(dir: &FsPath, name: &str, body: &str) -> CliResult {
    let p = dir.join(name);
    fs::write(&p, body).map_err(|e| Failure::io(&p, e))
}

fn cmd_rrt(a: &RunArgs) -> CliResult {
    let s = load(&a.common)?;
    let cfg = s.planner.with_seed(a.seed);
    let search = rrt::plan(&s.environment, &cfg.rrt, 0.0)?;
    if let Some(dir) = out_dir(&a.common, &s)? {
        write(&dir, "path.csv", &report::path_csv(&search.path))?;
        let layers = Layers {
            tree: Some(&search.tree),
            paths: vec![(&search.path, "#2e7d32")],
            ..Layers::default()
        };
        write(&dir, "rrt.svg", &report::render_svg(&s.environment, &layers))?;
    }
    println!(
        "{}",
        json!({
            "seed": a.seed,
            "waypoints": search.path.len(),
            "length": search.path.length(),
            "iterations": search.iterations,
            "tree_size": search.tree.len(),
        })
    );
    Ok(())
}

fn summary(rec: &RunRecord, s: &Scenario) -> serde_json::Value {
    let env = &s.environment;
    let p = rec.final_state.position();
    json!({
        "mode": rec.mode.to_string(),
        "seed": rec.seed,
        "outcome": rec.outcome.as_str(),
        "steps": rec.steps.len(),
        "final": [p.x, p.y],
        "distance_to_goal": p.distance(env.goal),
        "collision_steps": rec.collision_steps(env, s.dynamics.dt),
        "replans": rec.replans.len(),
        "timings_ms": rec.timings,
    })
}

fn cmd_run(a: &RunArgs, mode: Mode) -> CliResult {
    let s = load(&a.common)?;
    let cfg = s.planner.with_seed(a.seed);
    let rec = planner::run(
        &s.environment,
        &s.dynamics,
        &cfg,
        mode,
        &lanes(a.common.threads)?,
        RunOptions::default(),
    )?;
    if let Some(dir) = out_dir(&a.common, &s)? {
        write(&dir, "trajectory.csv", &report::trajectory_csv(&rec, s.dynamics.dt))?;
        if let Some(p) = &rec.nominal {
            write(&dir, "nominal_path.csv", &report::path_csv(p))?;
        }
        if let Some(p) = &rec.active_path {
            write(&dir, "path.csv", &report::path_csv(p))?;
        }
        write(&dir, "run.svg", &svg_for(&s, &rec))?;
    }
    println!("{}", summary(&rec, &s));
    if rec.outcome == Outcome::PlanningFailed {
        return Err(Failure::new(3, "planning_failed", "offline tree search found no path"));
    }
    Ok(())
}

fn svg_for(s: &Scenario, rec: &RunRecord) -> String {
    let mut layers = Layers {
        tree: rec.tree.as_ref(),
        trajectory: report::trajectory_points(rec),
        ..Layers::default()
    };
    if let Some(p) = &rec.nominal {
        layers.paths.push((p, "#2e7d32"));
    }
    for e in &rec.replans {
        if let Some(p) = &e.new_path {
            layers.paths.push((p, "#6a1b9a"));
        }
    }
    report::render_svg(&s.environment, &layers)
}

fn cmd_bench(a: &BenchArgs) -> CliResult {
    let s = load(&a.common)?;
    let seeds = a.seeds.clone().map_or_else(|| s.seeds.clone(), |r| r.0);
    let modes = if a.modes.is_empty() {
        s.modes.clone()
    } else {
        a.modes.clone()
    };
    let mut radii = s.replan_radii.clone();
    radii.extend(&a.radii);
    if radii.is_empty() {
        radii.push(s.planner.replan_radius);
    }
    if let Some((i, _)) = radii.iter().enumerate().find(|(_, r)| r.is_nan() || **r <= 0.0) {
        return Err(Failure::new(
            2,
            "invalid",
            format!("replan radius {i} must be positive"),
        ));
    }

    let mut cells = Vec::new();
    for &mode in &modes {
        // The radius has no effect without a nominal path.
        let rs: &[f64] = if mode == Mode::RrtMppi { &radii } else { &radii[..1] };
        for &r in rs {
            for &seed in &seeds {
                cells.push((mode, r, seed));
            }
        }
    }

    let workers = a.common.threads.map_or(1, NonZeroUsize::get).min(cells.len().max(1));
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<BenchRow, Error>>>> = Mutex::new(vec![None; cells.len()]);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(mode, radius, seed)) = cells.get(i) else {
                    break;
                };
                let mut cfg = s.planner.with_seed(seed);
                cfg.replan_radius = radius;
                let row = planner::run(
                    &s.environment,
                    &s.dynamics,
                    &cfg,
                    mode,
                    &Lanes::single(),
                    RunOptions::default(),
                )
                .map(|rec| BenchRow::from_record(&rec, &s.environment, radius, s.dynamics.dt));
                results.lock().unwrap()[i] = Some(row);
            });
        }
    });

    let mut bench = BenchReport::default();
    for r in results.into_inner().unwrap() {
        bench.rows.push(r.expect("every cell ran")?);
    }
    if let Some(dir) = out_dir(&a.common, &s)? {
        write(&dir, "bench.csv", &bench.to_csv())?;
        write(&dir, "bench_aggregates.csv", &bench.aggregates_csv())?;
    }
    print!("{}", bench.aggregates_csv());
    Ok(())
}

fn cmd_sample_size(a: &SampleSizeArgs) -> CliResult {
    let k1 = sample_size::k1(a.eps1, a.rho1)?;
    let mut rows = Vec::new();
    for &m in &a.means {
        let inputs = SampleSizeInputs {
            eps1: a.eps1,
            eps2: a.eps2,
            rho1: a.rho1,
            rho2: a.rho2,
            mean_u: vec![m],
            var_u: vec![a.var],
            e1_hat: a.e1_hat,
        };
        let k2 = sample_size::k2(&inputs)?;
        rows.push((m, inputs.gamma(), k2, k1.max(k2)));
    }
    if a.json {
        let rows: Vec<_> = rows
            .iter()
            .map(|&(m, g, k2, k)| json!({"mean": m, "var": a.var, "gamma": g, "k1": k1, "k2": k2, "k": k}))
            .collect();
        println!("{}", json!({"k1": k1, "rows": rows}));
        return Ok(());
    }
    println!("K1 = {k1}  (eps1 = {}, rho1 = {})", a.eps1, a.rho1);
    println!(
        "{:>8} {:>8} {:>10} {:>8} {:>10} {:>10}",
        "mean", "var", "gamma", "K1", "K2", "K"
    );
    for (m, g, k2, k) in rows {
        println!("{m:>8} {:>8} {g:>10.4} {k1:>8} {k2:>10} {k:>10}", a.var);
    }
    Ok(())
}

fn cmd_render(a: &RenderArgs) -> CliResult {
    let s = Scenario::load(&a.scenario)?;
    let svg = match a.mode {
        None => report::render_svg(&s.environment, &Layers::default()),
        Some(mode) => {
            let cfg = s.planner.with_seed(a.seed);
            let rec = planner::run(
                &s.environment,
                &s.dynamics,
                &cfg,
                mode,
                &lanes(a.threads)?,
                RunOptions::default(),
            )?;
            svg_for(&s, &rec)
        }
    };
    match &a.out {
        Some(p) => fs::write(p, svg).map_err(|e| Failure::io(p, e)),
        None => {
            print!("{svg}");
            Ok(())
        }
    }
}
