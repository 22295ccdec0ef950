//! Path tracking law that turns RRT waypoints into control means.
//!
//! Velocity follows a saturating Lyapunov-style law in the distance to the
//! target, `v = v_max * (1 - exp(-alpha * e_d^2))`, and the steering rate is
//! proportional to the heading error toward the target.

use serde::{Deserialize, Serialize};

use crate::dynamics::{Control, State};
use crate::error::{Error, Result};
use crate::geometry::{wrap_angle, Point};
use crate::rrt::Path;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NominalGains {
    pub v_max: f64,
    pub alpha: f64,
    pub k_p: f64,
    /// Waypoints ahead of the nearest one used as the target.
    pub lookahead: usize,
}

impl Default for NominalGains {
    fn default() -> Self {
        NominalGains {
            v_max: 3.0,
            alpha: 0.5,
            k_p: 0.3,
            lookahead: 15,
        }
    }
}

impl NominalGains {
    pub fn validate(&self, path: &str) -> Result<()> {
        for (name, v) in [("v_max", self.v_max), ("alpha", self.alpha), ("k_p", self.k_p)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{path}.{name}"), "must be positive"));
            }
        }
        Ok(())
    }
}

pub fn nominal_control(s: &State, target: Point, gains: &NominalGains) -> Control {
    let d = target - s.position();
    let e_d = d.norm();
    // atan2(0, 0) = 0, so at the target the heading error is just -theta.
    let e_theta = wrap_angle(d.y.atan2(d.x) - s.theta);
    Control {
        v: gains.v_max * -(-gains.alpha * e_d * e_d).exp_m1(),
        omega: gains.k_p * e_theta,
    }
}

/// Where the tracker should aim from `s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Target {
    pub point: Point,
    /// Distance from `s` to the nearest waypoint.
    pub deviation: f64,
    pub nearest: usize,
}

/// Nearest waypoint (lowest index on ties) and the waypoint `lookahead`
/// positions after it, clamped to the end of the path.
pub fn select_target(nominal: &Path, s: &State, gains: &NominalGains) -> Target {
    assert!(!nominal.is_empty(), "nominal path must not be empty");
    let p = s.position();
    let mut nearest = 0;
    let mut best = f64::INFINITY;
    for (i, w) in nominal.waypoints.iter().enumerate() {
        let d = w.distance_squared(p);
        if d < best {
            best = d;
            nearest = i;
        }
    }
    let target = (nearest + gains.lookahead).min(nominal.len() - 1);
    Target {
        point: nominal.waypoints[target],
        deviation: best.sqrt(),
        nearest,
    }
}
