//! Hierarchical adversarial agents.
//!
//! Four SAC agents split the work. In the optimization area an upper agent
//! pushes a speed trend forward every few lower decisions while a lower agent
//! pulls back against reservation clashes; inside the crossing zone a second
//! pair does the same from an ego-centred occupancy grid. The applied speed
//! change is the upper trend spread over its window plus the lower
//! correction.

pub mod learner;
pub mod reward;
pub mod runner;
pub mod state;

pub use learner::{Learner, RewardWindows};
pub use reward::{lower_reward, upper_case, upper_reward, upper_step_reward, RewardConfig, UpperCase};
pub use runner::{HarlController, Mode};
pub use state::{encode_global, encode_relative, StateLayout};

use serde::{Deserialize, Serialize};

use crate::geometry::Zone;
use crate::rl::{ActionSpan, SacConfig};
use crate::sim::VehicleLimits;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observation {
    Global,
    Relative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentRole {
    PreventBeingClashed,
    PreventClashing,
    PreventBeingCollided,
    PreventColliding,
}

/// Which pair of agents drives a vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Group {
    Approach,
    Crossing,
}

impl Group {
    pub fn of(zone: Zone) -> Option<Group> {
        match zone {
            Zone::OptimizationArea => Some(Group::Approach),
            Zone::CrossingZone => Some(Group::Crossing),
            Zone::Outside | Zone::Departed => None,
        }
    }

    /// Agent indices `(upper, lower)` into the four-agent array.
    pub fn agents(self) -> (usize, usize) {
        match self {
            Group::Approach => (0, 1),
            Group::Crossing => (2, 3),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentSpec {
    /// 1-based agent number.
    pub id: usize,
    pub role: AgentRole,
    pub observation: Observation,
    pub upper: bool,
    /// Decision period in simulation steps.
    pub action_steps: u32,
    pub span: ActionSpan,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HarlConfig {
    /// Lower-agent decision period in simulation steps.
    pub lower_steps: u32,
    /// Upper period as a multiple of the lower period.
    pub multiplier: u32,
    pub upper_span: [f64; 2],
    pub lower_span: [f64; 2],
    /// Per-step speed change span of the single-agent comparison.
    pub flat_span: [f64; 2],
    /// Side of the ego occupancy grid, in cells.
    pub grid_cells: usize,
    pub cell_size: f64,
    /// Vehicles per connection in the global observation.
    pub nearest_per_connection: usize,
    pub rewards: RewardConfig,
    pub sac: SacConfig,
    /// Run a gradient update for every agent every this many steps.
    pub update_every: u64,
    /// Environment steps per reward-log window.
    pub reward_window: u64,
    /// Cap CAV commands so they never close on their leader faster than
    /// the IDM interaction term allows.
    pub following_guard: bool,
}

impl Default for HarlConfig {
    fn default() -> Self {
        Self {
            lower_steps: 3,
            multiplier: 4,
            upper_span: [0.0, 2.0],
            lower_span: [-0.55, 0.4],
            flat_span: [-1.0, 0.5],
            grid_cells: 20,
            cell_size: 1.5,
            nearest_per_connection: 9,
            rewards: RewardConfig::default(),
            sac: SacConfig::default(),
            update_every: 1,
            reward_window: 10_000,
            following_guard: true,
        }
    }
}

impl HarlConfig {
    pub fn upper_steps(&self) -> u32 {
        self.lower_steps * self.multiplier
    }

    pub fn specs(&self) -> [AgentSpec; 4] {
        let upper = ActionSpan::scalar(self.upper_span[0], self.upper_span[1]);
        let lower = ActionSpan::scalar(self.lower_span[0], self.lower_span[1]);
        let spec = |id, role, observation, up: bool| AgentSpec {
            id,
            role,
            observation,
            upper: up,
            action_steps: if up { self.upper_steps() } else { self.lower_steps },
            span: if up { upper.clone() } else { lower.clone() },
        };
        [
            spec(1, AgentRole::PreventBeingClashed, Observation::Global, true),
            spec(2, AgentRole::PreventClashing, Observation::Global, false),
            spec(3, AgentRole::PreventBeingCollided, Observation::Relative, true),
            spec(4, AgentRole::PreventColliding, Observation::Relative, false),
        ]
    }

    pub fn validate(&self) -> Result<(), (String, String)> {
        let bad = |f: &str, r: &str| Err((f.to_string(), r.to_string()));
        if self.lower_steps == 0 {
            return bad("lower_steps", "must be at least 1");
        }
        if self.multiplier == 0 {
            return bad("multiplier", "must be at least 1");
        }
        for (name, s) in
            [("upper_span", self.upper_span), ("lower_span", self.lower_span), ("flat_span", self.flat_span)]
        {
            if !(s[0].is_finite() && s[1].is_finite() && s[0] < s[1]) {
                return bad(name, "needs finite bounds with low < high");
            }
        }
        if self.grid_cells == 0 {
            return bad("grid_cells", "must be positive");
        }
        if !(self.cell_size > 0.0 && self.cell_size.is_finite()) {
            return bad("cell_size", "must be positive");
        }
        if self.nearest_per_connection == 0 {
            return bad("nearest_per_connection", "must be positive");
        }
        if self.update_every == 0 {
            return bad("update_every", "must be at least 1");
        }
        if self.reward_window == 0 {
            return bad("reward_window", "must be at least 1");
        }
        self.sac.validate().map_err(|(f, r)| (format!("sac.{f}"), r))
    }
}

/// Speed change per simulation step for one lower decision: the upper trend
/// divided over its `multiplier` lower decisions plus the lower correction,
/// spread evenly over the decision's `lower_steps` steps.
pub fn raw_step_change(a_upper: f64, a_lower: f64, multiplier: u32, lower_steps: u32) -> f64 {
    (a_upper / multiplier as f64 + a_lower) / lower_steps as f64
}

/// Applied speed change: zero while the vehicle holds its prior slot,
/// otherwise the raw change clamped into the dynamics envelope.
#[allow(clippy::too_many_arguments)]
pub fn compose_action(
    a_upper: f64,
    a_lower: f64,
    multiplier: u32,
    lower_steps: u32,
    v: f64,
    hold: bool,
    limits: &VehicleLimits,
    dt: f64,
) -> f64 {
    if hold {
        return 0.0;
    }
    limits.clamp_dv(raw_step_change(a_upper, a_lower, multiplier, lower_steps), v, dt)
}
