//! Comparison controllers.
//!
//! Signal and first-come-first-served controllers drive every vehicle with
//! IDM and only decide who may pass the stop line. They share a
//! [`StopLineInterlock`]: a vehicle before its stop line is held at a virtual
//! red until granted, grants go to the front ungranted vehicle of a lane,
//! and a grant is refused while a granted vehicle on a crossing or merging
//! connection has not yet cleared the shared part of the box.

pub mod fcfs;
pub mod fixed_time;
pub mod flat_sac;
pub mod lqf;

pub use fcfs::{form_platoons, FcfsController, PlatoonGroup};
pub use fixed_time::FixedTimeController;
pub use flat_sac::FlatSacController;
pub use lqf::{select_phase, LqfController};

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

use crate::geometry::{Intersection, Movement};
use crate::sim::events::EventKind;
use crate::sim::{VehicleId, World};

/// Extra distance a merging vehicle's rear must be past the box exit.
const MERGE_CLEARANCE: f64 = 6.0;
/// Longitudinal buffer added beyond the footprint overlap at a crossing.
const CROSS_BUFFER: f64 = 1.5;
/// Smallest crossing-angle sine used to size the overlap zone.
const MIN_CROSSING_SINE: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaselineConfig {
    pub cycle: f64,
    pub yellow: f64,
    pub lqf_min_green: f64,
    /// Speed below which a vehicle counts as queued.
    pub queue_speed: f64,
    /// Vehicles are considered for a first-come grant within this distance
    /// of the stop line.
    pub fcfs_grant_distance: f64,
    /// Projected stop-line arrival gap that joins a platoon.
    pub platoon_gap: f64,
    pub platoon_max: usize,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            cycle: 120.0,
            yellow: 3.0,
            lqf_min_green: 5.0,
            queue_speed: 0.5,
            fcfs_grant_distance: 100.0,
            platoon_gap: 2.0,
            platoon_max: 8,
        }
    }
}

impl BaselineConfig {
    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        let pos = |f: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err((f, "must be positive".to_string()))
            }
        };
        pos("cycle", self.cycle)?;
        pos("lqf_min_green", self.lqf_min_green)?;
        pos("queue_speed", self.queue_speed)?;
        pos("fcfs_grant_distance", self.fcfs_grant_distance)?;
        pos("platoon_gap", self.platoon_gap)?;
        if !(self.yellow >= 0.0 && self.yellow.is_finite()) {
            return Err(("yellow", "must be non-negative".into()));
        }
        if self.cycle <= 4.0 * self.yellow {
            return Err(("cycle", "must exceed four yellow intervals".into()));
        }
        if self.platoon_max == 0 {
            return Err(("platoon_max", "must be at least 1".into()));
        }
        Ok(())
    }
}

/// Ordered signal phases, each a set of permitted connections, with equal
/// green splits.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePlan {
    pub phases: Vec<Vec<usize>>,
    pub green: f64,
    pub yellow: f64,
}

/// Where a fixed cycle stands at some time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseState {
    pub phase: usize,
    pub green: bool,
    /// Green time left in the current phase; zero during yellow.
    pub green_left: f64,
}

impl PhasePlan {
    /// North-south straight and right, north-south left, east-west straight
    /// and right, east-west left. Approaches 0 and 2 are the north-south
    /// pair.
    pub fn four_phase(ix: &Intersection, cycle: f64, yellow: f64) -> Self {
        let pick = |ns: bool, left: bool| {
            ix.connections
                .iter()
                .filter(|c| (c.entrance_lane.approach % 2 == 0) == ns && (c.movement == Movement::Left) == left)
                .map(|c| c.id)
                .collect::<Vec<_>>()
        };
        let phases = vec![pick(true, false), pick(true, true), pick(false, false), pick(false, true)];
        let green = cycle / phases.len() as f64 - yellow;
        Self { phases, green, yellow }
    }

    pub fn cycle(&self) -> f64 {
        self.phases.len() as f64 * (self.green + self.yellow)
    }

    /// Phases must not permit two connections that cross or merge, and every
    /// connection must be served by some phase.
    pub fn validate(&self, ix: &Intersection) -> Result<(), String> {
        if self.green <= 0.0 {
            return Err(format!("non-positive green time {}", self.green));
        }
        for (k, p) in self.phases.iter().enumerate() {
            for (i, &a) in p.iter().enumerate() {
                for &b in &p[i + 1..] {
                    if ix.crossing(a, b) || ix.merging(a, b) {
                        return Err(format!("phase {k} permits conflicting connections {a} and {b}"));
                    }
                }
            }
        }
        let served: BTreeSet<usize> = self.phases.iter().flatten().copied().collect();
        if served.len() != ix.connections.len() {
            return Err("some connections are never served".into());
        }
        Ok(())
    }

    pub fn state_at(&self, t: f64) -> PhaseState {
        let slot = self.green + self.yellow;
        let in_cycle = t.rem_euclid(self.cycle());
        let phase = ((in_cycle / slot).floor() as usize).min(self.phases.len() - 1);
        let into = in_cycle - phase as f64 * slot;
        let green = into < self.green;
        PhaseState { phase, green, green_left: if green { self.green - into } else { 0.0 } }
    }

    pub fn serves(&self, phase: usize, connection: usize) -> bool {
        self.phases[phase].contains(&connection)
    }
}

/// Shortest time to cover `distance` from speed `v`, accelerating at `accel`
/// up to `v_max`.
pub fn min_travel_time(distance: f64, v: f64, accel: f64, v_max: f64) -> f64 {
    if distance <= 0.0 {
        return 0.0;
    }
    let ramp = (v_max * v_max - v * v) / (2.0 * accel);
    if ramp >= distance {
        ((v * v + 2.0 * accel * distance).sqrt() - v) / accel
    } else {
        (v_max - v) / accel + (distance - ramp) / v_max
    }
}

/// Grants to pass the stop line and the clearance rules between them.
#[derive(Debug, Clone)]
pub struct StopLineInterlock {
    /// `clearance[a][b]`: path position the rear of a vehicle on `b` must
    /// pass before a vehicle on `a` may be granted.
    clearance: Vec<Vec<Option<f64>>>,
    granted: BTreeMap<VehicleId, usize>,
}

impl StopLineInterlock {
    pub fn new(ix: &Intersection, vehicle_width: f64) -> Self {
        let n = ix.connections.len();
        let mut clearance = vec![vec![None; n]; n];
        for a in 0..n {
            for b in 0..n {
                if a == b {
                    continue;
                }
                let mut need: Option<f64> = None;
                for &p in ix.shared_points(a, b) {
                    let da = ix.conflict_distance(a, p).unwrap();
                    let db = ix.conflict_distance(b, p).unwrap();
                    let (_, ha) = ix.connections[a].pose_at(da);
                    let (_, hb) = ix.connections[b].pose_at(db);
                    let sine = (ha - hb).sin().abs().max(MIN_CROSSING_SINE);
                    let reach = db + vehicle_width / sine + CROSS_BUFFER;
                    need = Some(need.map_or(reach, |x: f64| x.max(reach)));
                }
                if ix.merging(a, b) {
                    let reach = ix.connections[b].box_exit_s + MERGE_CLEARANCE;
                    need = Some(need.map_or(reach, |x: f64| x.max(reach)));
                }
                clearance[a][b] = need;
            }
        }
        Self { clearance, granted: BTreeMap::new() }
    }

    pub fn is_granted(&self, id: VehicleId) -> bool {
        self.granted.contains_key(&id)
    }

    pub fn granted(&self) -> impl Iterator<Item = (VehicleId, usize)> + '_ {
        self.granted.iter().map(|(&k, &v)| (k, v))
    }

    /// Whether connections `a` and `b` must be serialized.
    pub fn conflicts(&self, a: usize, b: usize) -> bool {
        self.clearance[a][b].is_some()
    }

    /// Drop grants of vehicles that left the world or cleared every
    /// connection. Vehicles past their stop line without a grant (never in
    /// normal operation) are granted so that others respect them.
    pub fn refresh(&mut self, world: &World, log: &mut Vec<EventKind>, controller: &str) {
        let ix = world.intersection();
        let n = ix.connections.len();
        self.granted.retain(|id, conn| {
            world.vehicle(*id).is_some_and(|v| {
                let rear = v.s - v.length;
                (0..n).any(|a| self.clearance[a][*conn].is_some_and(|need| rear < need))
            })
        });
        for v in world.vehicles() {
            let c = &ix.connections[v.connection];
            if v.s >= c.stop_line_s
                && v.s - v.length < c.box_exit_s + MERGE_CLEARANCE
                && !self.granted.contains_key(&v.id)
            {
                let rear = v.s - v.length;
                let pending = (0..n).any(|a| self.clearance[a][v.connection].is_some_and(|need| rear < need));
                if pending {
                    self.granted.insert(v.id, v.connection);
                    log.push(EventKind::Control {
                        controller: controller.into(),
                        vehicle: Some(v.id),
                        action: "forced_grant".into(),
                    });
                }
            }
        }
    }

    /// No granted vehicle on a crossing or merging connection is still in
    /// the way of `connection`.
    pub fn can_grant(&self, world: &World, connection: usize) -> bool {
        self.granted.iter().all(|(id, &c)| match self.clearance[connection][c] {
            None => true,
            Some(need) => world.vehicle(*id).is_none_or(|v| v.s - v.length >= need),
        })
    }

    pub fn grant(&mut self, id: VehicleId, connection: usize, log: &mut Vec<EventKind>, controller: &str) {
        if self.granted.insert(id, connection).is_none() {
            log.push(EventKind::Control { controller: controller.into(), vehicle: Some(id), action: "grant".into() });
        }
    }

    /// Vehicles before their stop line without a grant.
    pub fn holds(&self, world: &World) -> BTreeSet<VehicleId> {
        let ix = world.intersection();
        world
            .vehicles()
            .iter()
            .filter(|v| v.s < ix.connections[v.connection].stop_line_s && !self.granted.contains_key(&v.id))
            .map(|v| v.id)
            .collect()
    }

    /// Ungranted vehicles before the stop line, per entry lane, front first.
    pub fn lane_queues(&self, world: &World) -> Vec<Vec<usize>> {
        let ix = world.intersection();
        let mut lanes: Vec<Vec<usize>> = vec![Vec::new(); ix.num_lanes()];
        for (i, v) in world.vehicles().iter().enumerate() {
            let c = &ix.connections[v.connection];
            if v.s < c.stop_line_s && !self.granted.contains_key(&v.id) {
                lanes[ix.lane_index(c.entrance_lane)].push(i);
            }
        }
        let vs = world.vehicles();
        for l in &mut lanes {
            l.sort_by(|&a, &b| vs[b].s.total_cmp(&vs[a].s).then(vs[a].id.cmp(&vs[b].id)));
        }
        lanes
    }
}
