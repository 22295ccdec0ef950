//! Sampling-based motion planning for a kinematic unicycle.
//!
//! The crate combines a Rapidly-exploring Random Tree (RRT) that supplies a
//! coarse nominal path with Model Predictive Path Integral (MPPI) control
//! that refines the executed inputs online:
//!
//! * [`env`] holds the workspace, circle/rectangle obstacles with step
//!   schedules, and the collision predicates.
//! * [`dynamics`] is the unicycle model with steering angle and the
//!   counter-indexed perturbation streams.
//! * [`rrt`] implements the offline planner and the replanning variant that
//!   grows a tree from the current state back onto the previous path.
//! * [`nominal`] turns a waypoint path into control means.
//! * [`mppi`] samples, scores and averages perturbed control sequences.
//! * [`planner`] is the closed-loop orchestration of all of the above.
//! * [`sample_size`] evaluates the Hoeffding/Chebyshev sample-size bounds.
//! * [`scenario`] and [`report`] are the file formats used by the CLI.

pub mod dynamics;
pub mod env;
pub mod error;
pub mod geometry;
pub mod mppi;
pub mod nominal;
pub mod planner;
pub mod report;
pub mod rrt;
pub mod sample_size;
pub mod scenario;

pub use dynamics::{Control, DynamicsParams, NoiseStream, State, StreamKind};
pub use env::{Environment, Obstacle, ScheduleEntry, Shape};
pub use error::{Error, Result};
pub use geometry::{Aabb, Point};
pub use mppi::{Diagnostics, Lanes, MeanSequence, MppiConfig, Rollout, StepOutput};
pub use nominal::NominalGains;
pub use planner::{Mode, Outcome, PlannerConfig, RunRecord};
pub use rrt::{Path, RrtConfig, Tree};
pub use scenario::Scenario;
