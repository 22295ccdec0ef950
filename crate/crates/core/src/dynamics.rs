//! Kinematic unicycle with a steering angle, discretized with a forward
//! Euler step. Noise enters only through additive perturbations of the two
//! control channels.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point;

/// Steering angles at or beyond `pi/2 - STEERING_MARGIN` in magnitude are
/// rejected.
pub const STEERING_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct State {
    pub x: f64,
    pub y: f64,
    /// Heading, unwrapped.
    pub theta: f64,
    /// Steering angle, unwrapped.
    pub phi: f64,
}

impl State {
    pub const fn new(x: f64, y: f64, theta: f64, phi: f64) -> Self {
        State { x, y, theta, phi }
    }

    pub fn at(p: Point) -> Self {
        State::new(p.x, p.y, 0.0, 0.0)
    }

    pub fn position(&self) -> Point {
        Point::new(self.x, self.y)
    }
}

/// Linear velocity and steering rate. Also used for perturbations and
/// per-channel standard deviations.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Control {
    pub v: f64,
    pub omega: f64,
}

impl Control {
    pub const ZERO: Control = Control { v: 0.0, omega: 0.0 };

    pub const fn new(v: f64, omega: f64) -> Self {
        Control { v, omega }
    }

    pub fn is_finite(&self) -> bool {
        self.v.is_finite() && self.omega.is_finite()
    }
}

impl std::ops::Add for Control {
    type Output = Control;
    fn add(self, rhs: Control) -> Control {
        Control::new(self.v + rhs.v, self.omega + rhs.omega)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DynamicsParams {
    pub wheelbase: f64,
    pub dt: f64,
    /// Per-channel standard deviation of the plant perturbation.
    pub noise_scale: Control,
}

impl Default for DynamicsParams {
    fn default() -> Self {
        DynamicsParams {
            wheelbase: 0.5,
            dt: 0.05,
            noise_scale: Control::new(1.0, 1.0),
        }
    }
}

impl DynamicsParams {
    pub fn validate(&self, path: &str) -> Result<()> {
        if !(self.wheelbase > 0.0 && self.wheelbase.is_finite()) {
            return Err(Error::invalid(format!("{path}.wheelbase"), "must be positive"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid(format!("{path}.dt"), "must be positive"));
        }
        let s = self.noise_scale;
        if !(s.v >= 0.0 && s.omega >= 0.0 && s.is_finite()) {
            return Err(Error::invalid(format!("{path}.noise_scale"), "must be nonnegative"));
        }
        Ok(())
    }
}

/// One Euler step of the perturbed unicycle:
///
/// ```text
/// x'     = x     + dt * cos(theta) * (v + dv)
/// y'     = y     + dt * sin(theta) * (v + dv)
/// theta' = theta + dt * tan(phi) / L * (v + dv)
/// phi'   = phi   + dt * (omega + domega)
/// ```
#[inline]
pub fn step(s: &State, u: Control, delta: Control, p: &DynamicsParams) -> Result<State> {
    if s.phi.abs() >= std::f64::consts::FRAC_PI_2 - STEERING_MARGIN {
        return Err(Error::SteeringSingular { phi: s.phi });
    }
    let v = u.v + delta.v;
    let w = u.omega + delta.omega;
    let (sin, cos) = s.theta.sin_cos();
    Ok(State {
        x: s.x + p.dt * cos * v,
        y: s.y + p.dt * sin * v,
        theta: s.theta + p.dt * s.phi.tan() / p.wheelbase * v,
        phi: s.phi + p.dt * w,
    })
}

/// Which consumer a noise stream belongs to. Rollout and plant noise never
/// share draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StreamKind {
    Rollout,
    Plant,
}

/// Counter-indexed standard-normal stream.
///
/// A stream is identified by `(seed, kind, epoch, index)`; draw `j` is read
/// from a fixed ChaCha block, so its value depends only on the key and `j`,
/// never on how many other draws were made or on which thread made them.
/// MPPI uses `epoch` = controller iteration and `index` = rollout number.
#[derive(Debug, Clone)]
pub struct NoiseStream {
    rng: ChaCha8Rng,
}

/// 32-bit words reserved per draw: one ChaCha block.
const WORDS_PER_DRAW: u128 = 16;

impl NoiseStream {
    pub fn new(seed: u64, kind: StreamKind, epoch: u64, index: u64) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        key[8] = match kind {
            StreamKind::Rollout => 1,
            StreamKind::Plant => 2,
        };
        key[16..24].copy_from_slice(&epoch.to_le_bytes());
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(index);
        NoiseStream { rng }
    }

    /// Draw `j`: independent N(0, 1) values for the two channels.
    #[inline]
    pub fn standard(&mut self, j: u64) -> Control {
        self.rng.set_word_pos(j as u128 * WORDS_PER_DRAW);
        let v: f64 = self.rng.sample(StandardNormal);
        let omega: f64 = self.rng.sample(StandardNormal);
        Control::new(v, omega)
    }

    /// Draw `j` scaled per channel. A zero scale yields exactly zero.
    #[inline]
    pub fn perturbation(&mut self, j: u64, scale: Control) -> Control {
        let z = self.standard(j);
        Control::new(scaled(z.v, scale.v), scaled(z.omega, scale.omega))
    }
}

#[inline]
fn scaled(z: f64, s: f64) -> f64 {
    if s == 0.0 {
        0.0
    } else {
        z * s
    }
}

/// Draw `j` of `stream` with the plant noise scale of `p`.
pub fn sample_perturbation(stream: &mut NoiseStream, j: u64, p: &DynamicsParams) -> Control {
    stream.perturbation(j, p.noise_scale)
}
