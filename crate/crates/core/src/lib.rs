//! Planar push sorting.
//!
//! A robot pushes densely packed planar objects until objects of each class
//! form clusters separated from the other classes and from obstacles. The
//! crate provides the transition model ([`physics`]), the sorting reward
//! ([`objective`]), a max-backup Monte Carlo tree search planner
//! ([`planner`]), comparison baselines ([`baselines`]) and a benchmark
//! harness ([`harness`]).

pub mod baselines;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod objective;
pub mod physics;
pub mod planner;
pub mod scene;

pub use error::{Error, Result};
pub use geometry::{ConvexSet, Vec2};
pub use objective::{is_sorted, reward, RewardBreakdown};
pub use physics::{step, BoundaryMode, PhysicsConfig, TransitionResult};
pub use scene::{Action, Pose2, PlannerConfig, Scene, Shape, WorldState};
