//! Scheduling connected vehicles through an unsignalized four-way
//! intersection with hierarchical soft actor-critic agents, plus the
//! simulator, reservation table, baselines and metrics around it.

pub mod baselines;
pub mod config;
pub mod control;
pub mod error;
pub mod geometry;
pub mod harl;
pub mod harness;
pub mod metrics;
pub mod reservation;
pub mod rl;
pub mod sim;

pub use config::{ControllerKind, ScenarioConfig, TrainingConfig};
pub use error::*;
pub use geometry::{build_intersection, Intersection, IntersectionSpec, Zone};
pub use metrics::{MetricsRow, RunMetrics};
pub use sim::{Controls, Vehicle, VehicleId, VehicleKind, World, WorldConfig};
