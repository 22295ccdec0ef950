//! The closed loop: offline RRT, deviation-triggered replanning, nominal
//! mean construction, one MPPI iteration per executed step, and a noisy
//! plant update.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dynamics::{self, Control, DynamicsParams, NoiseStream, State, StreamKind};
use crate::env::Environment;
use crate::error::{Error, Result};
use crate::mppi::{self, Diagnostics, Lanes, MeanSequence, MppiConfig};
use crate::nominal::{nominal_control, select_target, NominalGains};
use crate::rrt::{self, Path, RrtConfig, Tree};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlannerConfig {
    /// Deviation from the nominal path at which a replan is triggered.
    pub replan_radius: f64,
    pub rrt: RrtConfig,
    pub mppi: MppiConfig,
    pub gains: NominalGains,
    pub goal_tolerance: f64,
    /// Executed-step budget.
    pub max_wall_steps: usize,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            replan_radius: 6.0,
            rrt: RrtConfig::default(),
            mppi: MppiConfig::default(),
            gains: NominalGains::default(),
            goal_tolerance: 1.0,
            max_wall_steps: 600,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self, path: &str) -> Result<()> {
        if self.replan_radius.is_nan() || self.replan_radius <= 0.0 {
            return Err(Error::invalid(format!("{path}.replan_radius"), "must be positive"));
        }
        if !(self.goal_tolerance > 0.0 && self.goal_tolerance.is_finite()) {
            return Err(Error::invalid(format!("{path}.goal_tolerance"), "must be positive"));
        }
        self.rrt.validate(&format!("{path}.rrt"))?;
        self.mppi.validate(&format!("{path}.mppi"))?;
        self.gains.validate(&format!("{path}.gains"))
    }

    /// Seeds the tree search and the rollout/plant noise from one run seed.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.rrt.seed = seed;
        self.mppi.seed = seed;
        self
    }
}

/// Which mean the MPPI sampling distribution uses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mode {
    /// Mean rebuilt every step from the nominal tracker along an RRT path.
    RrtMppi,
    /// Constant mean, no tree search.
    FixedMean(Control),
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::RrtMppi => f.write_str("rrt-mppi"),
            Mode::FixedMean(u) => write!(f, "fixed:{},{}", u.v, u.omega),
        }
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "rrt-mppi" {
            return Ok(Mode::RrtMppi);
        }
        let bad = || Error::invalid("mode", format!("expected `rrt-mppi` or `fixed:v,w`, got `{s}`"));
        let rest = s.strip_prefix("fixed:").ok_or_else(bad)?;
        let (v, w) = rest.split_once(',').ok_or_else(bad)?;
        let v: f64 = v.trim().parse().map_err(|_| bad())?;
        let w: f64 = w.trim().parse().map_err(|_| bad())?;
        if !(v.is_finite() && w.is_finite()) {
            return Err(bad());
        }
        Ok(Mode::FixedMean(Control::new(v, w)))
    }
}

impl Serialize for Mode {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Mode {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    ReachedGoal,
    Collided,
    BudgetExhausted,
    /// The offline tree search found no path.
    PlanningFailed,
    /// The plant's steering angle reached the tan singularity.
    SteeringLimit,
    /// Every rollout of some iteration was singular.
    DegenerateSamples,
}

impl Outcome {
    pub fn as_str(&self) -> &'static str {
        match self {
            Outcome::ReachedGoal => "reached-goal",
            Outcome::Collided => "collided",
            Outcome::BudgetExhausted => "budget-exhausted",
            Outcome::PlanningFailed => "planning-failed",
            Outcome::SteeringLimit => "steering-limit",
            Outcome::DegenerateSamples => "degenerate-samples",
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One executed step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub t: f64,
    /// State before the control is applied.
    pub state: State,
    pub control: Control,
    /// Plant perturbation added to `control`.
    pub perturbation: Control,
    /// Distance to the nearest nominal waypoint before any replan at this
    /// step; NaN without a nominal path.
    pub deviation: f64,
    pub replanned: bool,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplanEvent {
    pub step: usize,
    pub t: f64,
    pub deviation: f64,
    pub old_path: Path,
    /// `None` when the search failed and the stale path was kept.
    pub new_path: Option<Path>,
    pub junction: Option<usize>,
    pub iterations: usize,
}

/// Wall-clock milliseconds per phase.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Timings {
    pub offline_rrt_ms: f64,
    pub mppi_ms: f64,
    pub replan_ms: f64,
    pub total_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub mode: Mode,
    pub seed: u64,
    pub outcome: Outcome,
    pub steps: Vec<StepRecord>,
    pub final_state: State,
    /// Offline RRT path and tree, in rrt-mppi mode.
    pub nominal: Option<Path>,
    pub tree: Option<Tree>,
    /// Active nominal path when the run ended.
    pub active_path: Option<Path>,
    pub replans: Vec<ReplanEvent>,
    pub timings: Timings,
    /// Rollout costs of the iteration at `RunOptions::capture_costs_at`.
    pub captured_costs: Option<Vec<f64>>,
}

impl RunRecord {
    pub fn states(&self) -> impl Iterator<Item = State> + '_ {
        self.steps
            .iter()
            .map(|s| s.state)
            .chain(std::iter::once(self.final_state))
    }

    pub fn collision_steps(&self, env: &Environment, dt: f64) -> usize {
        self.states()
            .enumerate()
            .filter(|(k, s)| env.is_in_obstacle(s.position(), *k as f64 * dt))
            .count()
    }

    /// Re-applies the logged controls and perturbations and reports whether
    /// every logged state is reproduced bit for bit.
    pub fn replays(&self, p: &DynamicsParams) -> bool {
        let mut s = match self.steps.first() {
            Some(r) => r.state,
            None => return true,
        };
        for (k, r) in self.steps.iter().enumerate() {
            if r.state != s {
                return false;
            }
            s = match dynamics::step(&s, r.control, r.perturbation, p) {
                Ok(n) => n,
                Err(_) => return k + 1 == self.steps.len() && self.outcome == Outcome::SteeringLimit,
            };
        }
        s == self.final_state
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RunOptions {
    /// Keep the rollout costs of this executed step.
    pub capture_costs_at: Option<usize>,
}

/// `deviation >= radius`.
pub fn replan_trigger(deviation: f64, radius: f64) -> bool {
    deviation >= radius
}

/// Mean sequence from simulating the nominal tracker along `path` for
/// `horizon` steps without noise.
pub fn horizon_mean(path: &Path, s: &State, gains: &NominalGains, p: &DynamicsParams, horizon: usize) -> MeanSequence {
    let mut x = *s;
    let mut out = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let target = select_target(path, &x, gains);
        let u = nominal_control(&x, target.point, gains);
        out.push(u);
        if let Ok(next) = dynamics::step(&x, u, Control::ZERO, p) {
            x = next;
        }
    }
    MeanSequence(out)
}

/// Tree-search seed for the replan at `step`.
fn replan_seed(seed: u64, step: usize) -> u64 {
    seed ^ (step as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Runs one episode from `env.start` (heading and steering zero) at `t = 0`.
pub fn run(
    env: &Environment,
    dynp: &DynamicsParams,
    cfg: &PlannerConfig,
    mode: Mode,
    lanes: &Lanes,
    opts: RunOptions,
) -> Result<RunRecord> {
    let clock = Instant::now();
    let start = State::at(env.start);
    if let Some(k) = env.blocking_obstacle(env.start, 0.0) {
        return Err(Error::invalid("start", format!("lies inside obstacles[{k}] at t = 0")));
    }
    let mut rec = RunRecord {
        mode,
        seed: cfg.mppi.seed,
        outcome: Outcome::BudgetExhausted,
        steps: Vec::new(),
        final_state: start,
        nominal: None,
        tree: None,
        active_path: None,
        replans: Vec::new(),
        timings: Timings::default(),
        captured_costs: None,
    };
    let dt = dynp.dt;
    let horizon = cfg.mppi.horizon;

    if start.position().distance(env.goal) <= cfg.goal_tolerance {
        rec.outcome = Outcome::ReachedGoal;
        rec.timings.total_ms = ms(clock);
        return Ok(rec);
    }

    let mut active = None;
    if mode == Mode::RrtMppi {
        let t0 = Instant::now();
        let search = rrt::plan(env, &cfg.rrt, 0.0);
        rec.timings.offline_rrt_ms = ms(t0);
        match search {
            Ok(search) => {
                rec.nominal = Some(search.path.clone());
                rec.tree = Some(search.tree);
                active = Some(search.path);
            }
            Err(Error::PlanningFailed { .. }) => {
                rec.outcome = Outcome::PlanningFailed;
                rec.timings.total_ms = ms(clock);
                return Ok(rec);
            }
            Err(e) => return Err(e),
        }
    }

    let mut plant = NoiseStream::new(cfg.mppi.seed, StreamKind::Plant, 0, 0);
    let mut s = start;
    for k in 0..cfg.max_wall_steps {
        let t = k as f64 * dt;
        let mut deviation = f64::NAN;
        let mut replanned = false;
        let mean = match (&mode, &mut active) {
            (Mode::FixedMean(mu), _) => MeanSequence::constant(*mu, horizon),
            (Mode::RrtMppi, Some(path)) => {
                deviation = select_target(path, &s, &cfg.gains).deviation;
                if replan_trigger(deviation, cfg.replan_radius) {
                    replanned = true;
                    let t0 = Instant::now();
                    let rcfg = RrtConfig {
                        seed: replan_seed(cfg.rrt.seed, k),
                        ..cfg.rrt
                    };
                    let result = rrt::replan(path, s.position(), env, &rcfg, t);
                    rec.timings.replan_ms += ms(t0);
                    let mut event = ReplanEvent {
                        step: k,
                        t,
                        deviation,
                        old_path: path.clone(),
                        new_path: None,
                        junction: None,
                        iterations: rcfg.max_iters,
                    };
                    if let Ok(search) = result {
                        let mut waypoints = search.path.waypoints;
                        if let Some(j) = search.junction {
                            waypoints.extend_from_slice(&path.waypoints[j + 1..]);
                        }
                        *path = Path::new(waypoints);
                        event.new_path = Some(path.clone());
                        event.junction = search.junction;
                        event.iterations = search.iterations;
                    }
                    rec.replans.push(event);
                }
                horizon_mean(path, &s, &cfg.gains, dynp, horizon)
            }
            (Mode::RrtMppi, None) => unreachable!("rrt-mppi always has a nominal path"),
        };

        let t0 = Instant::now();
        let out = mppi::mppi_step(&s, &mean, k as u64, t, env, &cfg.mppi, dynp, lanes);
        rec.timings.mppi_ms += ms(t0);
        let out = match out {
            Ok(out) => out,
            Err(Error::DegenerateSamples { .. }) => {
                rec.outcome = Outcome::DegenerateSamples;
                break;
            }
            Err(e) => return Err(e),
        };
        if opts.capture_costs_at == Some(k) {
            rec.captured_costs = Some(out.costs);
        }

        let delta = dynamics::sample_perturbation(&mut plant, k as u64, dynp);
        rec.steps.push(StepRecord {
            step: k,
            t,
            state: s,
            control: out.executed,
            perturbation: delta,
            deviation,
            replanned,
            diagnostics: out.diagnostics,
        });
        s = match dynamics::step(&s, out.executed, delta, dynp) {
            Ok(next) => next,
            Err(_) => {
                rec.outcome = Outcome::SteeringLimit;
                break;
            }
        };
        rec.final_state = s;

        let t_next = (k + 1) as f64 * dt;
        if env.is_in_obstacle(s.position(), t_next) {
            rec.outcome = Outcome::Collided;
            break;
        }
        if s.position().distance(env.goal) <= cfg.goal_tolerance {
            rec.outcome = Outcome::ReachedGoal;
            break;
        }
    }
    rec.active_path = active;
    rec.timings.total_ms = ms(clock);
    Ok(rec)
}

fn ms(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1e3
}
