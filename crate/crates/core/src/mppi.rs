//! Model Predictive Path Integral control.
//!
//! Each iteration draws `K` perturbed copies of the current mean control
//! sequence, simulates them through the unicycle model, scores them with a
//! quadratic goal-distance cost plus an obstacle indicator penalty, and
//! replaces the mean with the exponentially cost-weighted average.
//!
//! Rollouts are independent and may run on several threads. Their noise
//! comes from per-rollout counter streams and the weighted sums are reduced
//! sequentially in rollout order, so the result does not depend on the
//! number of threads.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{self, Control, DynamicsParams, NoiseStream, State, StreamKind};
use crate::env::{Environment, Snapshot};
use crate::error::{Error, Result};

/// Cost assigned to rollouts that hit the steering singularity.
pub const SENTINEL_COST: f64 = 1e9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MppiConfig {
    /// Number of sampled rollouts `K`.
    pub samples: usize,
    /// Horizon length `T` in steps.
    pub horizon: usize,
    /// Temperature of the exponential weighting.
    pub lambda: f64,
    /// Per-channel standard deviation of the sampling distribution.
    pub sigma: Control,
    /// Symmetric positive semidefinite control penalty, `0.5 * u' R u`.
    pub r_ctrl: [[f64; 2]; 2],
    pub obstacle_penalty: f64,
    /// Scale of the terminal cost, which is the state part of the running
    /// cost evaluated at the final state.
    pub terminal_weight: f64,
    pub seed: u64,
    /// Evaluate every rollout step against the obstacles at the rollout
    /// start instead of at its own future timestamp.
    pub freeze_obstacles: bool,
}

impl Default for MppiConfig {
    fn default() -> Self {
        MppiConfig {
            samples: 10_000,
            horizon: 20,
            lambda: 1.0,
            sigma: Control::new(1.0, 1.0),
            r_ctrl: [[0.0; 2]; 2],
            obstacle_penalty: 1000.0,
            terminal_weight: 1.0,
            seed: 0,
            freeze_obstacles: false,
        }
    }
}

impl MppiConfig {
    pub fn validate(&self, path: &str) -> Result<()> {
        if self.samples < 1 {
            return Err(Error::invalid(format!("{path}.samples"), "must be at least 1"));
        }
        if self.horizon < 1 {
            return Err(Error::invalid(format!("{path}.horizon"), "must be at least 1"));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid(format!("{path}.lambda"), "must be positive"));
        }
        let s = self.sigma;
        if !(s.v >= 0.0 && s.omega >= 0.0 && s.is_finite()) {
            return Err(Error::invalid(format!("{path}.sigma"), "must be nonnegative"));
        }
        let r = self.r_ctrl;
        let symmetric = r[0][1] == r[1][0];
        let psd = r[0][0] >= 0.0 && r[1][1] >= 0.0 && r[0][0] * r[1][1] - r[0][1] * r[1][0] >= 0.0;
        if !(symmetric && psd && r.iter().flatten().all(|x| x.is_finite())) {
            return Err(Error::invalid(
                format!("{path}.r_ctrl"),
                "must be symmetric positive semidefinite",
            ));
        }
        if !(self.obstacle_penalty >= 0.0 && self.obstacle_penalty.is_finite()) {
            return Err(Error::invalid(
                format!("{path}.obstacle_penalty"),
                "must be nonnegative",
            ));
        }
        if !(self.terminal_weight >= 0.0 && self.terminal_weight.is_finite()) {
            return Err(Error::invalid(format!("{path}.terminal_weight"), "must be nonnegative"));
        }
        Ok(())
    }
}

/// Mean of the sampling distribution, one control per horizon step.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MeanSequence(pub Vec<Control>);

impl MeanSequence {
    pub fn constant(u: Control, horizon: usize) -> Self {
        MeanSequence(vec![u; horizon])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn first(&self) -> Control {
        self.0[0]
    }

    /// Drops the first control and repeats the last one.
    pub fn shifted(&self) -> Self {
        let mut v = self.0[1..].to_vec();
        v.push(*self.0.last().expect("non-empty sequence"));
        MeanSequence(v)
    }
}

/// One sampled trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    /// Sampled controls, mean plus perturbation.
    pub controls: Vec<Control>,
    /// States after each control.
    pub states: Vec<State>,
    pub cost: f64,
    /// Normalized weight in `[0, 1]`; filled in by [`assign_weights`].
    pub weight: f64,
}

/// `|p - goal|^2 + penalty * [p blocked] + 0.5 u' R u`.
pub fn running_cost(s: &State, u: Control, t: f64, env: &Environment, cfg: &MppiConfig) -> f64 {
    state_cost(s, env.is_in_obstacle(s.position(), t), env, cfg) + control_cost(u, cfg)
}

/// Terminal cost: the state part of the running cost, scaled.
pub fn terminal_cost(s: &State, t: f64, env: &Environment, cfg: &MppiConfig) -> f64 {
    cfg.terminal_weight * state_cost(s, env.is_in_obstacle(s.position(), t), env, cfg)
}

#[inline]
fn state_cost(s: &State, blocked: bool, env: &Environment, cfg: &MppiConfig) -> f64 {
    let d2 = s.position().distance_squared(env.goal);
    if blocked {
        d2 + cfg.obstacle_penalty
    } else {
        d2
    }
}

#[inline]
fn control_cost(u: Control, cfg: &MppiConfig) -> f64 {
    let r = &cfg.r_ctrl;
    if r[0][0] == 0.0 && r[0][1] == 0.0 && r[1][0] == 0.0 && r[1][1] == 0.0 {
        return 0.0;
    }
    0.5 * (r[0][0] * u.v * u.v + (r[0][1] + r[1][0]) * u.v * u.omega + r[1][1] * u.omega * u.omega)
}

/// Obstacle snapshots for state indices `0..=T` of a rollout starting at
/// `t0`.
fn horizon_snapshots(env: &Environment, t0: f64, dt: f64, horizon: usize, freeze: bool) -> Vec<Snapshot> {
    (0..=horizon)
        .map(|j| env.snapshot(if freeze { t0 } else { t0 + j as f64 * dt }))
        .collect()
}

struct Sim<'a> {
    initial: State,
    mean: &'a [Control],
    env: &'a Environment,
    snaps: &'a [Snapshot],
    cfg: &'a MppiConfig,
    dynamics: &'a DynamicsParams,
    epoch: u64,
}

impl Sim<'_> {
    /// Fills `controls` with rollout `i`'s sampled inputs and returns its
    /// cost. `S = sum_j q(x_j, u_j) + phi(x_T)`, with `x_0` the initial
    /// state.
    fn run(&self, i: usize, controls: &mut [Control], mut states: Option<&mut Vec<State>>) -> f64 {
        let mut noise = NoiseStream::new(self.cfg.seed, StreamKind::Rollout, self.epoch, i as u64);
        let mut s = self.initial;
        let mut cost = 0.0;
        let mut singular = false;
        for (j, (u_out, mean)) in controls.iter_mut().zip(self.mean).enumerate() {
            let u = *mean + noise.perturbation(j as u64, self.cfg.sigma);
            *u_out = u;
            if !singular {
                let blocked = self.snaps[j].is_blocked(s.position());
                cost += state_cost(&s, blocked, self.env, self.cfg) + control_cost(u, self.cfg);
                match dynamics::step(&s, u, Control::ZERO, self.dynamics) {
                    Ok(next) => s = next,
                    Err(_) => singular = true,
                }
            }
            if let Some(states) = states.as_deref_mut() {
                states.push(s);
            }
        }
        if singular {
            return SENTINEL_COST;
        }
        let blocked = self.snaps[controls.len()].is_blocked(s.position());
        cost += self.cfg.terminal_weight * state_cost(&s, blocked, self.env, self.cfg);
        if cost.is_finite() {
            cost.min(SENTINEL_COST)
        } else {
            SENTINEL_COST
        }
    }
}

/// Simulates rollout `i` of iteration `epoch`. Its perturbations come from
/// the stream `(cfg.seed, Rollout, epoch, i)`, one draw per step.
#[allow(clippy::too_many_arguments)]
pub fn rollout(
    initial: &State,
    mean: &MeanSequence,
    i: usize,
    epoch: u64,
    t0: f64,
    env: &Environment,
    cfg: &MppiConfig,
    dynamics: &DynamicsParams,
) -> Rollout {
    let snaps = horizon_snapshots(env, t0, dynamics.dt, mean.len(), cfg.freeze_obstacles);
    let sim = Sim {
        initial: *initial,
        mean: &mean.0,
        env,
        snaps: &snaps,
        cfg,
        dynamics,
        epoch,
    };
    let mut controls = vec![Control::ZERO; mean.len()];
    let mut states = Vec::with_capacity(mean.len());
    let cost = sim.run(i, &mut controls, Some(&mut states));
    Rollout {
        controls,
        states,
        cost,
        weight: 1.0,
    }
}

/// `w_i = exp(-(S_i - min S) / lambda)`; the cheapest rollout gets 1.
pub fn weights(costs: &[f64], lambda: f64) -> Vec<f64> {
    let min = costs.iter().copied().fold(f64::INFINITY, f64::min);
    costs.iter().map(|&s| (-(s - min) / lambda).exp()).collect()
}

/// Sets each rollout's `weight` from its cost.
pub fn assign_weights(rollouts: &mut [Rollout], lambda: f64) {
    let costs: Vec<f64> = rollouts.iter().map(|r| r.cost).collect();
    for (r, w) in rollouts.iter_mut().zip(weights(&costs, lambda)) {
        r.weight = w;
    }
}

/// Weighted average of the rollouts' control sequences using their
/// `weight` fields.
pub fn update_controls(rollouts: &[Rollout]) -> Result<MeanSequence> {
    if rollouts.iter().all(|r| r.cost >= SENTINEL_COST) {
        return Err(Error::DegenerateSamples {
            samples: rollouts.len(),
        });
    }
    let horizon = rollouts[0].controls.len();
    let w: Vec<f64> = rollouts.iter().map(|r| r.weight).collect();
    let mut flat = Vec::with_capacity(rollouts.len() * horizon);
    for r in rollouts {
        flat.extend_from_slice(&r.controls);
    }
    Ok(weighted_average(&w, &flat, horizon, &rollouts[0].controls))
}

/// `u_j = sum_i w_i u_ij / sum_i w_i`, accumulated as offsets from
/// `reference` in rollout order. When every sample equals the reference the
/// result is the reference bit for bit.
fn weighted_average(w: &[f64], controls: &[Control], horizon: usize, reference: &[Control]) -> MeanSequence {
    let mut acc = vec![(0.0f64, 0.0f64); horizon];
    let mut total = 0.0;
    for (wi, row) in w.iter().zip(controls.chunks_exact(horizon)) {
        if *wi == 0.0 {
            continue;
        }
        total += wi;
        for ((a, u), r) in acc.iter_mut().zip(row).zip(reference) {
            a.0 += wi * (u.v - r.v);
            a.1 += wi * (u.omega - r.omega);
        }
    }
    MeanSequence(
        acc.iter()
            .zip(reference)
            .map(|(a, r)| Control::new(r.v + a.0 / total, r.omega + a.1 / total))
            .collect(),
    )
}

/// Execution lanes for rollout evaluation. One lane runs inline.
#[derive(Debug)]
pub struct Lanes {
    pool: Option<rayon::ThreadPool>,
    count: usize,
}

impl Lanes {
    pub fn new(count: usize) -> Result<Self> {
        let count = count.max(1);
        let pool = if count == 1 {
            None
        } else {
            Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(count)
                    .build()
                    .map_err(|e| Error::invalid("threads", e.to_string()))?,
            )
        };
        Ok(Lanes { pool, count })
    }

    pub fn single() -> Self {
        Lanes { pool: None, count: 1 }
    }

    pub fn count(&self) -> usize {
        self.count
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    pub min_cost: f64,
    pub mean_cost: f64,
    /// Effective sample size `(sum w)^2 / sum w^2`.
    pub ess: f64,
    /// Mean of the normalized weights.
    pub mean_weight: f64,
    pub sentinel_count: usize,
    /// Per-channel empirical mean of all sampled controls.
    pub control_mean: Control,
    /// Per-channel empirical variance of all sampled controls.
    pub control_var: Control,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    /// First control of the updated sequence.
    pub executed: Control,
    pub updated: MeanSequence,
    /// `updated` shifted one step, for warm starting.
    pub next_mean: MeanSequence,
    pub diagnostics: Diagnostics,
    /// Rollout costs in rollout order.
    pub costs: Vec<f64>,
}

/// One MPPI iteration from `initial` at time `t0`. `epoch` selects the
/// noise streams and must differ between iterations of one run.
#[allow(clippy::too_many_arguments)]
pub fn mppi_step(
    initial: &State,
    mean: &MeanSequence,
    epoch: u64,
    t0: f64,
    env: &Environment,
    cfg: &MppiConfig,
    dynamics: &DynamicsParams,
    lanes: &Lanes,
) -> Result<StepOutput> {
    let horizon = mean.len();
    if horizon == 0 {
        return Err(Error::invalid("mean", "must not be empty"));
    }
    let k = cfg.samples.max(1);
    let snaps = horizon_snapshots(env, t0, dynamics.dt, horizon, cfg.freeze_obstacles);
    let sim = Sim {
        initial: *initial,
        mean: &mean.0,
        env,
        snaps: &snaps,
        cfg,
        dynamics,
        epoch,
    };

    let mut controls = vec![Control::ZERO; k * horizon];
    let mut costs = Vec::with_capacity(k);
    match &lanes.pool {
        Some(pool) => pool.install(|| {
            controls
                .par_chunks_mut(horizon)
                .enumerate()
                .map(|(i, row)| sim.run(i, row, None))
                .collect_into_vec(&mut costs)
        }),
        None => costs.extend(
            controls
                .chunks_mut(horizon)
                .enumerate()
                .map(|(i, row)| sim.run(i, row, None)),
        ),
    }

    let sentinel_count = costs.iter().filter(|&&c| c >= SENTINEL_COST).count();
    if sentinel_count == k {
        return Err(Error::DegenerateSamples { samples: k });
    }
    let w = weights(&costs, cfg.lambda);
    let updated = weighted_average(&w, &controls, horizon, &mean.0);

    let sum_w: f64 = w.iter().sum();
    let sum_w2: f64 = w.iter().map(|x| x * x).sum();
    let n = controls.len() as f64;
    let (mut m, mut m2) = ((0.0, 0.0), (0.0, 0.0));
    for u in &controls {
        m.0 += u.v;
        m.1 += u.omega;
        m2.0 += u.v * u.v;
        m2.1 += u.omega * u.omega;
    }
    let control_mean = Control::new(m.0 / n, m.1 / n);
    let control_var = Control::new(
        (m2.0 / n - control_mean.v * control_mean.v).max(0.0),
        (m2.1 / n - control_mean.omega * control_mean.omega).max(0.0),
    );
    let diagnostics = Diagnostics {
        min_cost: costs.iter().copied().fold(f64::INFINITY, f64::min),
        mean_cost: costs.iter().sum::<f64>() / k as f64,
        ess: sum_w * sum_w / sum_w2,
        mean_weight: sum_w / k as f64,
        sentinel_count,
        control_mean,
        control_var,
    };

    Ok(StepOutput {
        executed: updated.first(),
        next_mean: updated.shifted(),
        updated,
        diagnostics,
        costs,
    })
}
