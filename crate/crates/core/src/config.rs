//! Scenario configuration: one TOML document covering geometry, traffic,
//! vehicle dynamics, the reservation table, the learning agents, the
//! comparison controllers and the training schedule.
//!
//! Every section is optional and falls back to defaults; unknown keys are
//! rejected. `validate` reports the first offending field by its dotted path.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::baselines::BaselineConfig;
use crate::error::ConfigError;
use crate::geometry::IntersectionSpec;
use crate::harl::HarlConfig;
use crate::reservation::ReservationConfig;
use crate::sim::fuel::FuelModel;
use crate::sim::idm::IdmParams;
use crate::sim::{VehicleLimits, WorldConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    Harl,
    FlatSac,
    FixedTime,
    Lqf,
    FcfsVtl,
    FcfsPlatoon,
}

impl ControllerKind {
    pub const ALL: [ControllerKind; 6] = [
        ControllerKind::Harl,
        ControllerKind::FlatSac,
        ControllerKind::FixedTime,
        ControllerKind::Lqf,
        ControllerKind::FcfsVtl,
        ControllerKind::FcfsPlatoon,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ControllerKind::Harl => "harl",
            ControllerKind::FlatSac => "flat_sac",
            ControllerKind::FixedTime => "fixed_time",
            ControllerKind::Lqf => "lqf",
            ControllerKind::FcfsVtl => "fcfs_vtl",
            ControllerKind::FcfsPlatoon => "fcfs_platoon",
        }
    }

    /// Whether the controller has trainable agents.
    pub fn is_learned(self) -> bool {
        matches!(self, ControllerKind::Harl | ControllerKind::FlatSac)
    }
}

impl fmt::Display for ControllerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ControllerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        ControllerKind::ALL.into_iter().find(|k| k.as_str() == norm).ok_or_else(|| {
            let names: Vec<&str> = ControllerKind::ALL.iter().map(|k| k.as_str()).collect();
            format!("unknown controller `{s}`; expected one of {}", names.join(", "))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingConfig {
    /// One epoch is one training episode.
    pub epochs: u32,
    /// Simulated seconds per training episode.
    pub episode_duration: f64,
    /// Write a checkpoint every this many epochs; the last epoch always
    /// writes one.
    pub checkpoint_every: u32,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self { epochs: 100, episode_duration: 3600.0, checkpoint_every: 10 }
    }
}

impl TrainingConfig {
    pub fn steps_per_epoch(&self, dt: f64) -> u64 {
        (self.episode_duration / dt).round() as u64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub controller: ControllerKind,
    pub seed: u64,
    /// Simulated seconds of an evaluation run.
    pub duration: f64,
    /// Poisson arrivals per entry lane, vehicles per hour.
    pub flow: f64,
    pub hv_fraction: f64,
    /// Simulation step, seconds.
    pub dt: f64,
    pub intersection: IntersectionSpec,
    pub idm: IdmParams,
    pub limits: VehicleLimits,
    pub fuel: FuelModel,
    pub reservation: ReservationConfig,
    pub harl: HarlConfig,
    pub baselines: BaselineConfig,
    pub training: TrainingConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let w = WorldConfig::default();
        Self {
            controller: ControllerKind::Harl,
            seed: 0,
            duration: 3600.0,
            flow: w.flow_rate,
            hv_fraction: w.hv_fraction,
            dt: w.dt,
            intersection: IntersectionSpec::default(),
            idm: w.idm,
            limits: w.limits,
            fuel: w.fuel,
            reservation: ReservationConfig::default(),
            harl: HarlConfig::default(),
            baselines: BaselineConfig::default(),
            training: TrainingConfig::default(),
        }
    }
}

fn positive(field: &str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(ConfigError::field(field, format!("must be positive and finite, got {v}")))
    }
}

fn non_negative(field: &str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(ConfigError::field(field, format!("must be non-negative and finite, got {v}")))
    }
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    /// Canonical TOML form with every field spelled out.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario configs always serialize")
    }

    /// Reduced-size preset for a single desktop core: small networks and
    /// batches, a light demand without human drivers, and 200k training
    /// steps in total.
    pub fn desk_scale(mut self) -> Self {
        self.flow = 200.0;
        self.hv_fraction = 0.0;
        self.harl.sac.hidden = vec![64, 64];
        self.harl.sac.batch_size = 64;
        self.harl.sac.replay_capacity = 50_000;
        self.harl.update_every = 4;
        self.harl.reward_window = 2_000;
        self.training.epochs = 100;
        self.training.episode_duration = 400.0;
        self.training.checkpoint_every = 10;
        self
    }

    /// Lower decisions of exactly 0.5 s and upper ones of 2 s, on a 0.1 s
    /// step.
    pub fn strict_cadence(mut self) -> Self {
        self.dt = 0.1;
        self.harl.lower_steps = 5;
        self.harl.multiplier = 4;
        self.reservation.bin_duration = 0.1;
        self.reservation.horizon_bins = 200;
        self
    }

    pub fn world_config(&self, seed: u64) -> WorldConfig {
        WorldConfig {
            dt: self.dt,
            flow_rate: self.flow,
            hv_fraction: self.hv_fraction,
            seed,
            idm: self.idm.clone(),
            limits: self.limits.clone(),
            fuel: self.fuel.clone(),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        positive("duration", self.duration)?;
        non_negative("flow", self.flow)?;
        if !(0.0..=1.0).contains(&self.hv_fraction) {
            return Err(ConfigError::field("hv_fraction", format!("must lie in [0, 1], got {}", self.hv_fraction)));
        }
        positive("dt", self.dt)?;
        self.intersection.validate()?;

        let idm = &self.idm;
        positive("idm.a_max", idm.a_max)?;
        positive("idm.b", idm.b)?;
        positive("idm.v0", idm.v0)?;
        non_negative("idm.s0", idm.s0)?;
        non_negative("idm.time_headway", idm.time_headway)?;

        let l = &self.limits;
        positive("limits.accel_max", l.accel_max)?;
        positive("limits.decel_max", l.decel_max)?;
        non_negative("limits.v_min", l.v_min)?;
        if !(l.v_max.is_finite() && l.v_max > l.v_min) {
            return Err(ConfigError::field("limits.v_max", format!("must exceed v_min {}, got {}", l.v_min, l.v_max)));
        }
        positive("limits.length", l.length)?;
        positive("limits.width", l.width)?;

        let f = &self.fuel;
        for (name, v) in [("idle", f.idle), ("c0", f.c0), ("c1", f.c1), ("c2", f.c2), ("c3", f.c3), ("c4", f.c4)] {
            non_negative(&format!("fuel.{name}"), v)?;
        }

        positive("reservation.bin_duration", self.reservation.bin_duration)?;
        if self.reservation.horizon_bins == 0 {
            return Err(ConfigError::field("reservation.horizon_bins", "must be at least 1"));
        }
        positive("reservation.min_speed", self.reservation.min_speed)?;

        self.harl.validate().map_err(|(f, r)| ConfigError::field(format!("harl.{f}"), r))?;
        self.baselines.validate().map_err(|(f, r)| ConfigError::field(format!("baselines.{f}"), r))?;

        if self.training.epochs == 0 {
            return Err(ConfigError::field("training.epochs", "must be at least 1"));
        }
        positive("training.episode_duration", self.training.episode_duration)?;
        if self.training.checkpoint_every == 0 {
            return Err(ConfigError::field("training.checkpoint_every", "must be at least 1"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        ScenarioConfig::default().validate().unwrap();
        ScenarioConfig::default().desk_scale().validate().unwrap();
        ScenarioConfig::default().strict_cadence().validate().unwrap();
    }

    #[test]
    fn desk_preset_trains_two_hundred_thousand_steps() {
        let c = ScenarioConfig::default().desk_scale();
        assert_eq!(c.training.steps_per_epoch(c.dt) * c.training.epochs as u64, 200_000);
        assert_eq!(c.harl.sac.hidden, vec![64, 64]);
    }

    #[test]
    fn negative_flow_names_the_field() {
        let c = ScenarioConfig::from_toml("flow = -1.0").unwrap();
        match c.validate() {
            Err(ConfigError::Field { field, .. }) => assert_eq!(field, "flow"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn nested_fields_are_named_by_path() {
        let c = ScenarioConfig::from_toml("[harl.sac]\ngamma = 1.5").unwrap();
        match c.validate() {
            Err(ConfigError::Field { field, .. }) => assert_eq!(field, "harl.sac.gamma"),
            other => panic!("{other:?}"),
        }
        let c = ScenarioConfig::from_toml("[intersection]\nlane_width = 0.0").unwrap();
        match c.validate() {
            Err(ConfigError::Field { field, .. }) => assert_eq!(field, "intersection.lane_width"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(ScenarioConfig::from_toml("flw = 3.0"), Err(ConfigError::Parse(_))));
        assert!(matches!(ScenarioConfig::from_toml("[harl]\nspeed = 1"), Err(ConfigError::Parse(_))));
    }

    #[test]
    fn canonical_round_trip() {
        let c = ScenarioConfig { controller: ControllerKind::Lqf, seed: 9, flow: 900.0, ..ScenarioConfig::default() }
            .desk_scale();
        let text = c.to_toml();
        let back = ScenarioConfig::from_toml(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_toml(), text);
    }

    #[test]
    fn controller_names() {
        for k in ControllerKind::ALL {
            assert_eq!(k.as_str().parse::<ControllerKind>().unwrap(), k);
        }
        assert_eq!("FCFS-VTL".parse::<ControllerKind>().unwrap(), ControllerKind::FcfsVtl);
        assert!("signal".parse::<ControllerKind>().is_err());
    }
}
