//! Discrete-time microscopic world: arrivals, longitudinal kinematics along
//! connection paths, IDM car-following, collision detection and fuel.

pub mod collision;
pub mod events;
pub mod fuel;
pub mod idm;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::sync::Arc;

use crate::geometry::{locate, Intersection, Zone};
use collision::{overlaps, Footprint};
use events::{Event, EventKind};
use fuel::FuelModel;
use idm::{idm_accel, IdmParams, Leader};

/// Other-connection vehicles on a shared entry lane stay leaders until their
/// rear is this far past the stop line.
const DIVERGE_CLEAR: f64 = 8.0;
/// Vehicles bound for the same exit lane start following each other this
/// far before the box exit.
const MERGE_LOOKAHEAD: f64 = 15.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VehicleId(pub u64);

impl fmt::Display for VehicleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VehicleKind {
    Cav,
    Hv,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vehicle {
    pub id: VehicleId,
    pub kind: VehicleKind,
    pub connection: usize,
    /// Front bumper position along the connection path.
    pub s: f64,
    pub v: f64,
    pub length: f64,
    pub width: f64,
    pub zone: Zone,
    pub spawn_time: f64,
    pub entered_optimization_at: Option<f64>,
    pub entered_metric_zone_at: Option<f64>,
    pub departed_at: Option<f64>,
    /// Fuel burned inside the crossing-time window, ml.
    pub fuel_used: f64,
    /// Speed change applied on the last step.
    pub last_dv: f64,
}

impl Vehicle {
    pub fn is_cav(&self) -> bool {
        self.kind == VehicleKind::Cav
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VehicleLimits {
    pub accel_max: f64,
    /// Magnitude of the emergency deceleration.
    pub decel_max: f64,
    pub v_max: f64,
    pub v_min: f64,
    pub length: f64,
    pub width: f64,
}

impl Default for VehicleLimits {
    fn default() -> Self {
        Self { accel_max: 2.5, decel_max: 5.0, v_max: 15.0, v_min: 0.0, length: 5.0, width: 1.8 }
    }
}

impl VehicleLimits {
    /// Per-step speed change bounds `[-decel * dt, accel * dt]`.
    pub fn dv_bounds(&self, dt: f64) -> (f64, f64) {
        (-self.decel_max * dt, self.accel_max * dt)
    }

    /// Clamp a requested per-step speed change into the dynamics envelope.
    pub fn clamp_dv(&self, dv: f64, v: f64, dt: f64) -> f64 {
        let (lo, hi) = self.dv_bounds(dt);
        let dv = dv.clamp(lo, hi);
        // re-clamp: the subtraction can land an ulp outside the bounds
        ((v + dv).clamp(self.v_min, self.v_max) - v).clamp(lo, hi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldConfig {
    pub dt: f64,
    /// Arrivals per entry lane per hour.
    pub flow_rate: f64,
    /// Probability that an arrival is human driven.
    pub hv_fraction: f64,
    pub seed: u64,
    pub idm: IdmParams,
    pub limits: VehicleLimits,
    pub fuel: FuelModel,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            dt: 0.2,
            flow_rate: 450.0,
            hv_fraction: 0.2,
            seed: 0,
            idm: IdmParams::default(),
            limits: VehicleLimits::default(),
            fuel: FuelModel::default(),
        }
    }
}

/// Per-step control input.
#[derive(Debug, Clone, Default)]
pub struct Controls {
    /// Speed change commands; vehicles absent here drive by IDM.
    pub dv: BTreeMap<VehicleId, f64>,
    /// IDM-driven vehicles that must stop at the stop line.
    pub hold: BTreeSet<VehicleId>,
    /// Controller decisions to record in the event stream.
    pub log: Vec<EventKind>,
}

/// Running check of the speed-change envelope on every vehicle update.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClampAudit {
    pub checked: u64,
    /// Commands that arrived outside the envelope (controller bug).
    pub command_violations: u64,
    /// Applied updates outside the envelope (simulator bug).
    pub applied_violations: u64,
}

impl ClampAudit {
    pub fn merge(&mut self, other: &ClampAudit) {
        self.checked += other.checked;
        self.command_violations += other.command_violations;
        self.applied_violations += other.applied_violations;
    }

    pub fn clean(&self) -> bool {
        self.command_violations == 0 && self.applied_violations == 0
    }
}

#[derive(Debug, Clone)]
struct LaneArrivals {
    rng: ChaCha8Rng,
    next: f64,
    backlog: VecDeque<(VehicleKind, usize)>,
}

#[derive(Debug, Clone)]
pub struct World {
    ix: Arc<Intersection>,
    cfg: WorldConfig,
    step: u64,
    vehicles: Vec<Vehicle>,
    next_id: u64,
    lanes: Vec<LaneArrivals>,
    contacts: BTreeSet<(VehicleId, VehicleId)>,
    audit: ClampAudit,
}

const AUDIT_TOL: f64 = 1e-9;

impl World {
    pub fn new(ix: Arc<Intersection>, cfg: WorldConfig) -> Self {
        let rate = cfg.flow_rate / 3600.0;
        let lanes = (0..ix.num_lanes())
            .map(|lane| {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                rng.set_stream(lane as u64 + 1);
                let next = sample_gap(&mut rng, rate);
                LaneArrivals { rng, next, backlog: VecDeque::new() }
            })
            .collect();
        Self {
            ix,
            cfg,
            step: 0,
            vehicles: Vec::new(),
            next_id: 1,
            lanes,
            contacts: BTreeSet::new(),
            audit: ClampAudit::default(),
        }
    }

    pub fn intersection(&self) -> &Intersection {
        &self.ix
    }

    pub fn intersection_arc(&self) -> Arc<Intersection> {
        Arc::clone(&self.ix)
    }

    pub fn config(&self) -> &WorldConfig {
        &self.cfg
    }

    pub fn step_index(&self) -> u64 {
        self.step
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.cfg.dt
    }

    pub fn vehicles(&self) -> &[Vehicle] {
        &self.vehicles
    }

    pub fn vehicle(&self, id: VehicleId) -> Option<&Vehicle> {
        self.vehicles.binary_search_by_key(&id, |v| v.id).ok().map(|i| &self.vehicles[i])
    }

    pub fn audit(&self) -> ClampAudit {
        self.audit
    }

    /// Arrivals waiting for a free entry, per lane.
    pub fn backlog(&self, lane: usize) -> usize {
        self.lanes[lane].backlog.len()
    }

    pub fn footprint(&self, v: &Vehicle) -> Footprint {
        let (center, heading) = self.ix.connections[v.connection].pose_at(v.s - v.length / 2.0);
        Footprint { center, heading, half_length: v.length / 2.0, half_width: v.width / 2.0 }
    }

    /// Place a vehicle directly on a path. Used by arrivals and by scenario
    /// builders in tests and tools.
    pub fn insert_vehicle(&mut self, kind: VehicleKind, connection: usize, s: f64, v: f64) -> VehicleId {
        let id = VehicleId(self.next_id);
        self.next_id += 1;
        let lim = &self.cfg.limits;
        let conn = &self.ix.connections[connection];
        let time = self.time();
        let zone = locate(s, conn);
        let vehicle = Vehicle {
            id,
            kind,
            connection,
            s,
            v: v.clamp(lim.v_min, lim.v_max),
            length: lim.length,
            width: lim.width,
            zone,
            spawn_time: time,
            entered_optimization_at: (zone >= Zone::OptimizationArea).then_some(time),
            entered_metric_zone_at: (s >= conn.metric_entry_s).then_some(time),
            departed_at: None,
            fuel_used: 0.0,
            last_dv: 0.0,
        };
        self.vehicles.push(vehicle);
        id
    }

    /// No vehicle from `lane` has its rear within `s0` of the path start.
    pub fn entry_free(&self, lane: usize) -> bool {
        let lane_id = self.ix.lane_of_index(lane);
        let s0 = self.cfg.idm.s0;
        !self.vehicles.iter().any(|v| self.ix.connections[v.connection].entrance_lane == lane_id && v.s - v.length < s0)
    }

    /// Highest speed up to `v0` whose IDM desired gap fits behind the last
    /// vehicle on the lane.
    fn spawn_speed(&self, lane: usize) -> f64 {
        let lane_id = self.ix.lane_of_index(lane);
        let v0 = self.cfg.idm.v0.min(self.cfg.limits.v_max);
        let last = self
            .vehicles
            .iter()
            .filter(|v| self.ix.connections[v.connection].entrance_lane == lane_id)
            .min_by(|a, b| a.s.total_cmp(&b.s).then(b.id.cmp(&a.id)));
        let Some(last) = last else { return v0 };
        let gap = last.s - last.length;
        if self.cfg.idm.desired_gap(v0, last.v) <= gap {
            return v0;
        }
        let (mut lo, mut hi) = (0.0, v0);
        for _ in 0..40 {
            let mid = 0.5 * (lo + hi);
            if self.cfg.idm.desired_gap(mid, last.v) <= gap {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    /// Queue an arrival on `lane`; its movement is drawn uniformly from the
    /// lane's connections.
    pub fn enqueue_arrival(&mut self, lane: usize, kind: VehicleKind) {
        let conns = self.ix.connections_from(self.ix.lane_of_index(lane));
        let arrivals = &mut self.lanes[lane];
        let c = conns[arrivals.rng.random_range(0..conns.len())];
        arrivals.backlog.push_back((kind, c));
    }

    /// Spawn the oldest queued arrival on `lane` if the entry is free.
    pub fn spawn(&mut self, lane: usize) -> Option<Event> {
        if self.lanes[lane].backlog.is_empty() || !self.entry_free(lane) {
            return None;
        }
        let (kind, connection) = self.lanes[lane].backlog.pop_front()?;
        let speed = self.spawn_speed(lane);
        let id = self.insert_vehicle(kind, connection, 0.0, speed);
        Some(Event {
            step: self.step,
            time: self.time(),
            kind: EventKind::Spawn { vehicle: id, kind, connection, speed },
        })
    }

    fn process_arrivals(&mut self, events: &mut Vec<Event>) {
        let rate = self.cfg.flow_rate / 3600.0;
        let now = self.time();
        for lane in 0..self.lanes.len() {
            while self.lanes[lane].next <= now {
                let hv = self.lanes[lane].rng.random_bool(self.cfg.hv_fraction.clamp(0.0, 1.0));
                let kind = if hv { VehicleKind::Hv } else { VehicleKind::Cav };
                self.enqueue_arrival(lane, kind);
                let gap = sample_gap(&mut self.lanes[lane].rng, rate);
                self.lanes[lane].next += gap;
            }
            if let Some(e) = self.spawn(lane) {
                events.push(e);
            }
        }
    }

    /// Nearest leader of vehicle `idx` along its own path: same connection,
    /// a shared entry lane before divergence, or a shared exit lane near the
    /// merge. `hold` adds a standing obstacle at the stop line.
    pub fn leader_of(&self, idx: usize, hold: bool) -> Option<Leader> {
        let a = &self.vehicles[idx];
        let ca = &self.ix.connections[a.connection];
        let mut best: Option<Leader> = None;
        let mut consider = |gap: f64, speed: f64| {
            if best.is_none_or(|b| gap < b.gap) {
                best = Some(Leader { gap, speed });
            }
        };
        if hold && a.s < ca.stop_line_s {
            consider(ca.stop_line_s - a.s, 0.0);
        }
        let ea = a.s - ca.box_exit_s;
        for (j, b) in self.vehicles.iter().enumerate() {
            if j == idx {
                continue;
            }
            let cb = &self.ix.connections[b.connection];
            if b.connection == a.connection {
                if b.s > a.s || (b.s == a.s && b.id < a.id) {
                    consider(b.s - b.length - a.s, b.v);
                }
            } else if cb.entrance_lane == ca.entrance_lane {
                let split = ca.stop_line_s + DIVERGE_CLEAR;
                if a.s < split && b.s > a.s && b.s - b.length < split {
                    consider(b.s - b.length - a.s, b.v);
                }
            } else if cb.exit_lane == ca.exit_lane && b.s >= cb.stop_line_s {
                let eb = b.s - cb.box_exit_s;
                if eb > ea && ea > -MERGE_LOOKAHEAD && eb > -MERGE_LOOKAHEAD {
                    consider(eb - b.length - ea, b.v);
                }
            }
        }
        best
    }

    pub fn index_of(&self, id: VehicleId) -> Option<usize> {
        self.vehicles.binary_search_by_key(&id, |v| v.id).ok()
    }

    /// IDM speed change for vehicle `idx` over one step.
    pub fn idm_dv(&self, idx: usize, hold: bool) -> f64 {
        let v = &self.vehicles[idx];
        idm_accel(v.v, self.leader_of(idx, hold), &self.cfg.idm) * self.cfg.dt
    }

    /// Overlapping footprint pairs `(lower id, higher id)`.
    pub fn detect_collisions(&self) -> BTreeSet<(VehicleId, VehicleId)> {
        let prints: Vec<Footprint> = self.vehicles.iter().map(|v| self.footprint(v)).collect();
        let mut out = BTreeSet::new();
        for i in 0..prints.len() {
            for j in i + 1..prints.len() {
                if overlaps(&prints[i], &prints[j]) {
                    let (a, b) = (self.vehicles[i].id, self.vehicles[j].id);
                    out.insert((a.min(b), a.max(b)));
                }
            }
        }
        out
    }

    /// Advance one step. CAV commands in `controls.dv` are clamped into the
    /// dynamics envelope; every other vehicle drives by IDM.
    pub fn step(&mut self, controls: &Controls) -> Vec<Event> {
        let dt = self.cfg.dt;
        let lim = self.cfg.limits.clone();
        let (dv_lo, dv_hi) = lim.dv_bounds(dt);
        let mut events = Vec::new();
        let now = self.time();
        for kind in &controls.log {
            events.push(Event { step: self.step, time: now, kind: kind.clone() });
        }

        let mut applied = Vec::with_capacity(self.vehicles.len());
        for i in 0..self.vehicles.len() {
            let v = &self.vehicles[i];
            let requested = match controls.dv.get(&v.id) {
                Some(&dv) => {
                    let bad = !(dv_lo - AUDIT_TOL..=dv_hi + AUDIT_TOL).contains(&dv)
                        || !(lim.v_min - AUDIT_TOL..=lim.v_max + AUDIT_TOL).contains(&(v.v + dv));
                    if bad {
                        self.audit.command_violations += 1;
                    }
                    dv
                }
                None => self.idm_dv(i, controls.hold.contains(&v.id)),
            };
            applied.push(lim.clamp_dv(requested, v.v, dt));
        }

        self.step += 1;
        let now = self.time();
        for (veh, dv) in self.vehicles.iter_mut().zip(applied) {
            let v_new = veh.v + dv;
            self.audit.checked += 1;
            if !(dv_lo - AUDIT_TOL..=dv_hi + AUDIT_TOL).contains(&dv)
                || !(lim.v_min - AUDIT_TOL..=lim.v_max + AUDIT_TOL).contains(&v_new)
            {
                self.audit.applied_violations += 1;
            }
            veh.v = v_new;
            veh.last_dv = dv;
            veh.s += v_new * dt;
            let conn = &self.ix.connections[veh.connection];
            if veh.entered_metric_zone_at.is_some() && veh.departed_at.is_none() {
                veh.fuel_used += self.cfg.fuel.rate(v_new, dv / dt) * dt;
            }
            if veh.entered_metric_zone_at.is_none() && veh.s >= conn.metric_entry_s {
                veh.entered_metric_zone_at = Some(now);
                events.push(Event { step: self.step, time: now, kind: EventKind::MetricEntry { vehicle: veh.id } });
            }
            let zone = locate(veh.s, conn);
            if zone != veh.zone {
                veh.zone = zone;
                events.push(Event { step: self.step, time: now, kind: EventKind::Zone { vehicle: veh.id, zone } });
                if zone >= Zone::OptimizationArea && veh.entered_optimization_at.is_none() {
                    veh.entered_optimization_at = Some(now);
                }
                if zone == Zone::Departed && veh.departed_at.is_none() {
                    veh.departed_at = Some(now);
                    events.push(Event {
                        step: self.step,
                        time: now,
                        kind: EventKind::Departure { vehicle: veh.id, fuel_ml: veh.fuel_used },
                    });
                }
            }
        }

        let touching = self.detect_collisions();
        for &(a, b) in touching.difference(&self.contacts) {
            events.push(Event { step: self.step, time: now, kind: EventKind::Collision { a, b } });
        }
        self.contacts = touching;

        let ix = Arc::clone(&self.ix);
        self.vehicles.retain(|v| {
            let gone = v.s - v.length > ix.connections[v.connection].length();
            if gone {
                events.push(Event { step: self.step, time: now, kind: EventKind::Exit { vehicle: v.id } });
            }
            !gone
        });

        self.process_arrivals(&mut events);
        events
    }
}

fn sample_gap(rng: &mut ChaCha8Rng, rate: f64) -> f64 {
    if rate <= 0.0 {
        return f64::INFINITY;
    }
    Exp::new(rate).expect("positive rate").sample(rng)
}
