//! Shared expected-reservation timetable.
//!
//! The table is an `N_q x T_r` occupancy grid over conflict points and
//! future time bins. Each lower-level decision step the grid is cleared and
//! rebuilt by a reassignment pass that walks vehicles nearest-first and
//! classifies each one as assigned, clash, be-clashed or unassigned.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use crate::error::ReservationError;
use crate::geometry::Zone;
use crate::sim::{VehicleId, World};

/// Slack used when snapping interval ends to bin edges, so that values like
/// `3.0 / 0.2` land on the intended bin.
const SNAP_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReservationConfig {
    /// Seconds per bin.
    pub bin_duration: f64,
    /// Number of bins `T_r`.
    pub horizon_bins: usize,
    /// Below this speed a vehicle cannot produce finite indices.
    pub min_speed: f64,
}

impl Default for ReservationConfig {
    fn default() -> Self {
        Self { bin_duration: 0.2, horizon_bins: 100, min_speed: 0.1 }
    }
}

/// Inclusive bin range covered by the time interval `[start, end]` seconds,
/// or `None` when it does not overlap the horizon.
///
/// Bins `floor(start/bin)` through `ceil(end/bin) - 1` are covered, clamped
/// to `[0, T_r)`.
pub fn snap_interval(start: f64, end: f64, bin: f64, horizon: usize) -> Option<(usize, usize)> {
    let t_r = horizon as f64;
    let sb = start / bin;
    let eb = end / bin;
    if !(eb > SNAP_EPS && sb < t_r - SNAP_EPS) {
        return None;
    }
    let max = (horizon - 1) as f64;
    let lo = (sb + SNAP_EPS).floor().clamp(0.0, max) as usize;
    let hi = ((eb - SNAP_EPS).ceil() - 1.0).clamp(0.0, max) as usize;
    Some((lo, hi.max(lo)))
}

/// Occupancy grid `M` with the first claimant of every occupied cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ReservationTable {
    num_points: usize,
    horizon: usize,
    bin_duration: f64,
    cells: Vec<Option<VehicleId>>,
}

impl ReservationTable {
    pub fn new(num_points: usize, cfg: &ReservationConfig) -> Self {
        Self {
            num_points,
            horizon: cfg.horizon_bins,
            bin_duration: cfg.bin_duration,
            cells: vec![None; num_points * cfg.horizon_bins],
        }
    }

    pub fn num_points(&self) -> usize {
        self.num_points
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn bin_duration(&self) -> f64 {
        self.bin_duration
    }

    pub fn clear(&mut self) {
        self.cells.iter_mut().for_each(|c| *c = None);
    }

    pub fn is_occupied(&self, point: usize, bin: usize) -> bool {
        self.occupant(point, bin).is_some()
    }

    pub fn occupant(&self, point: usize, bin: usize) -> Option<VehicleId> {
        self.cells[point * self.horizon + bin]
    }

    /// Occupied cells as `(point, bin, vehicle)` in row-major order.
    pub fn occupied(&self) -> impl Iterator<Item = (usize, usize, VehicleId)> + '_ {
        self.cells.iter().enumerate().filter_map(move |(i, c)| c.map(|v| (i / self.horizon, i % self.horizon, v)))
    }

    /// CSV snapshot with header `point,bin,vehicle`.
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["point", "bin", "vehicle"])?;
        for (p, b, v) in self.occupied() {
            w.write_record([p.to_string(), b.to_string(), v.0.to_string()])?;
        }
        w.flush()
    }

    fn set_if_free(&mut self, point: usize, bin: usize, who: VehicleId) {
        let cell = &mut self.cells[point * self.horizon + bin];
        if cell.is_none() {
            *cell = Some(who);
        }
    }
}

/// Result of one reservation attempt.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ReserveOutcome {
    pub conflicted: bool,
    pub conflicting_occupants: BTreeSet<VehicleId>,
}

/// Request slots for `vehicle` at each `(point, distance)` claim, given its
/// speed and length. Cells are written whether or not the request
/// conflicts; on conflict the requester and every distinct occupant join
/// `lc`. Cells already held by the requester itself do not count.
pub fn try_reserve(
    table: &mut ReservationTable,
    lc: &mut BTreeSet<VehicleId>,
    vehicle: VehicleId,
    claims: &[(usize, f64)],
    speed: f64,
    length: f64,
    min_speed: f64,
) -> ReserveOutcome {
    let mut out = ReserveOutcome::default();
    if speed < min_speed {
        out.conflicted = true;
        return out;
    }
    let mut tmp = BTreeSet::new();
    for &(point, d) in claims {
        let start = d / speed;
        let end = (d + length) / speed;
        let Some((lo, hi)) = snap_interval(start, end, table.bin_duration, table.horizon) else {
            continue;
        };
        let mut hit = false;
        for bin in lo..=hi {
            if let Some(o) = table.occupant(point, bin) {
                if o != vehicle {
                    hit = true;
                    tmp.insert(o);
                    out.conflicting_occupants.insert(o);
                }
            }
        }
        if hit {
            out.conflicted = true;
            tmp.insert(vehicle);
        }
        for bin in lo..=hi {
            table.set_if_free(point, bin, vehicle);
        }
    }
    if out.conflicted {
        lc.extend(tmp);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Assigned,
    Clash,
    BeClashed,
    UnassignedNew,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssignmentStatus {
    pub status: Status,
    /// Held its previous assignment this step; its speed is frozen.
    pub kept_prior: bool,
}

impl AssignmentStatus {
    pub const ASSIGNED: Self = Self { status: Status::Assigned, kept_prior: false };
    pub const NEW: Self = Self { status: Status::UnassignedNew, kept_prior: false };
    pub const CLASH: Self = Self { status: Status::Clash, kept_prior: false };
    pub const HELD: Self = Self { status: Status::BeClashed, kept_prior: true };

    /// Holds a slot assignment (carried into the next pass).
    pub fn holds_assignment(&self) -> bool {
        matches!(self.status, Status::Assigned | Status::BeClashed)
    }
}

/// One vehicle's input to a reassignment pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ReservationRequest {
    pub id: VehicleId,
    /// Remaining `(point, distance from front)` claims, nearest first.
    pub claims: Vec<(usize, f64)>,
    pub speed: f64,
    pub length: f64,
    /// Distance to the last conflict point of the trajectory; smaller goes first.
    pub priority: f64,
    pub previously_assigned: bool,
    /// Inside the optimization area or crossing zone.
    pub participating: bool,
}

#[derive(Debug, Clone)]
pub struct PassResult {
    pub table: ReservationTable,
    pub lc: BTreeSet<VehicleId>,
    pub statuses: BTreeMap<VehicleId, AssignmentStatus>,
    /// `(requester, occupant)` pairs whose claims overlapped.
    pub pairs: BTreeSet<(VehicleId, VehicleId)>,
    /// Each processed vehicle's outcome, in processing order.
    pub outcomes: Vec<(VehicleId, ReserveOutcome)>,
}

impl PassResult {
    pub fn status_of(&self, id: VehicleId) -> Result<AssignmentStatus, ReservationError> {
        self.statuses.get(&id).copied().ok_or(ReservationError::UnknownVehicle(id.0))
    }

    pub fn in_conflict(&self, a: VehicleId, b: VehicleId) -> bool {
        self.pairs.contains(&(a, b)) || self.pairs.contains(&(b, a))
    }

    pub fn is_conflicted(&self, id: VehicleId) -> bool {
        self.lc.contains(&id)
    }

    pub fn empty(num_points: usize, cfg: &ReservationConfig) -> Self {
        Self {
            table: ReservationTable::new(num_points, cfg),
            lc: BTreeSet::new(),
            statuses: BTreeMap::new(),
            pairs: BTreeSet::new(),
            outcomes: Vec::new(),
        }
    }
}

/// Rebuild the table from scratch for the given requests.
///
/// Status rules, applied in nearest-to-last-conflict-point order:
/// * a clean request is `Assigned`;
/// * a conflicting vehicle that held an assignment last step keeps it
///   (`BeClashed`, `kept_prior`), and the non-holding occupants it overlaps
///   become `Clash`;
/// * a conflicting newcomer becomes `Clash` if it overlaps a holder (which
///   becomes `BeClashed`), otherwise `UnassignedNew`;
/// * a vehicle below the minimum speed is `UnassignedNew`.
pub fn reassignment_pass(num_points: usize, cfg: &ReservationConfig, requests: &[ReservationRequest]) -> PassResult {
    let mut result = PassResult::empty(num_points, cfg);
    let holder: BTreeMap<VehicleId, bool> = requests.iter().map(|r| (r.id, r.previously_assigned)).collect();
    let held = |id: &VehicleId| holder.get(id).copied().unwrap_or(false);

    let mut order: Vec<&ReservationRequest> = Vec::with_capacity(requests.len());
    for r in requests {
        if r.participating {
            order.push(r);
        } else {
            result.statuses.insert(r.id, AssignmentStatus::NEW);
        }
    }
    order.sort_by(|a, b| a.priority.total_cmp(&b.priority).then(a.id.cmp(&b.id)));

    for req in order {
        let outcome =
            try_reserve(&mut result.table, &mut result.lc, req.id, &req.claims, req.speed, req.length, cfg.min_speed);
        for &o in &outcome.conflicting_occupants {
            result.pairs.insert((req.id, o));
        }
        let status = if !outcome.conflicted {
            AssignmentStatus::ASSIGNED
        } else if req.speed < cfg.min_speed {
            AssignmentStatus::NEW
        } else if req.previously_assigned {
            for o in &outcome.conflicting_occupants {
                let s = if held(o) { AssignmentStatus::HELD } else { AssignmentStatus::CLASH };
                result.statuses.insert(*o, s);
            }
            AssignmentStatus::HELD
        } else if outcome.conflicting_occupants.iter().any(held) {
            for o in outcome.conflicting_occupants.iter().filter(|o| held(o)) {
                result.statuses.insert(*o, AssignmentStatus::HELD);
            }
            AssignmentStatus::CLASH
        } else {
            AssignmentStatus::NEW
        };
        result.statuses.insert(req.id, status);
        result.outcomes.push((req.id, outcome));
    }
    result
}

/// Build pass requests from the world. Departed vehicles are left out;
/// vehicles outside the optimization area are present but not participating.
pub fn requests_from_world(world: &World, previous: &BTreeMap<VehicleId, AssignmentStatus>) -> Vec<ReservationRequest> {
    let ix = world.intersection();
    world
        .vehicles()
        .iter()
        .filter(|v| v.zone != Zone::Departed)
        .map(|v| {
            let conn = &ix.connections[v.connection];
            let claims: Vec<(usize, f64)> =
                conn.conflicts.iter().map(|&(p, d)| (p, d - v.s)).filter(|&(_, d)| d + v.length > 0.0).collect();
            let priority = conn.last_conflict_s().map_or(0.0, |d| (d - v.s).max(0.0));
            ReservationRequest {
                id: v.id,
                claims,
                speed: v.v,
                length: v.length,
                priority,
                previously_assigned: previous.get(&v.id).is_some_and(|s| s.holds_assignment()),
                participating: matches!(v.zone, Zone::OptimizationArea | Zone::CrossingZone),
            }
        })
        .collect()
}

/// Convenience: build requests and run the pass.
pub fn reassign_world(
    world: &World,
    cfg: &ReservationConfig,
    previous: &BTreeMap<VehicleId, AssignmentStatus>,
) -> PassResult {
    let requests = requests_from_world(world, previous);
    reassignment_pass(world.intersection().conflict_points.len(), cfg, &requests)
}
