//! Observation encoders.
//!
//! Every vehicle is described by six features: `x / 100`, `y / 100`,
//! `v / v_max`, `heading / pi`, a left-turn flag and a conflict flag, with the
//! position taken at the front bumper in intersection coordinates.
//!
//! * Ego block: one row of six per connection; only the ego's connection
//!   row is filled.
//! * Global observation: ego block, then for every connection the nearest
//!   `k` vehicles to the intersection (`connections x k x 6`, zero-filled).
//!   The conflict flag marks vehicles whose reservation claims overlap the
//!   ego's in the current pass.
//! * Relative observation: ego block, then three `L x L` grids centred on
//!   the ego and aligned with its heading, flattened channel-major then
//!   row (longitudinal, rear to front) then column (lateral, right to
//!   left). Channel 0 holds speeds of non-left-turning neighbours, channel
//!   1 of left-turning ones, channel 2 repeats neighbours in conflict with
//!   the ego. Occupied cells hold the neighbour speed floored at
//!   [`OCCUPIED_FLOOR`] so that stopped vehicles stay visible.
//!
//! Agents driven by a lower policy get the current upper action appended.

use super::HarlConfig;
use crate::geometry::Zone;
use crate::reservation::PassResult;
use crate::rl::SparseVec;
use crate::sim::{Vehicle, VehicleId, World};

pub const FEATURES: usize = 6;
pub const GRID_CHANNELS: usize = 3;
pub const OCCUPIED_FLOOR: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateLayout {
    pub connections: usize,
    pub nearest: usize,
    pub grid: usize,
}

impl StateLayout {
    pub fn new(connections: usize, cfg: &HarlConfig) -> Self {
        Self { connections, nearest: cfg.nearest_per_connection, grid: cfg.grid_cells }
    }

    pub fn ego_len(&self) -> usize {
        self.connections * FEATURES
    }

    pub fn global_len(&self) -> usize {
        self.ego_len() + self.connections * self.nearest * FEATURES
    }

    pub fn relative_len(&self) -> usize {
        self.ego_len() + GRID_CHANNELS * self.grid * self.grid
    }

    /// Input widths of agents 1 to 4.
    pub fn agent_dims(&self) -> [usize; 4] {
        [self.global_len(), self.global_len() + 1, self.relative_len(), self.relative_len() + 1]
    }

    /// Single-agent layout: global block then relative block.
    pub fn flat_len(&self) -> usize {
        self.global_len() + self.relative_len()
    }
}

pub fn vehicle_features(world: &World, v: &Vehicle, conflict: bool) -> [f64; FEATURES] {
    let conn = &world.intersection().connections[v.connection];
    let (p, heading) = conn.pose_at(v.s);
    [
        p.x / 100.0,
        p.y / 100.0,
        v.v / world.config().limits.v_max,
        heading / std::f64::consts::PI,
        if conn.is_left_turn() { 1.0 } else { 0.0 },
        if conflict { 1.0 } else { 0.0 },
    ]
}

fn build(dim: usize, mut entries: Vec<(usize, f64)>) -> SparseVec {
    entries.sort_by_key(|e| e.0);
    let mut out = SparseVec::zeros(dim);
    for (i, v) in entries {
        out.push(i, v);
    }
    out
}

fn ego_block(world: &World, pass: &PassResult, ego: &Vehicle, offset: usize, out: &mut Vec<(usize, f64)>) {
    let f = vehicle_features(world, ego, pass.is_conflicted(ego.id));
    let base = offset + ego.connection * FEATURES;
    out.extend(f.iter().enumerate().map(|(k, &x)| (base + k, x)));
}

fn global_entries(
    world: &World,
    pass: &PassResult,
    ego: &Vehicle,
    layout: &StateLayout,
    offset: usize,
    out: &mut Vec<(usize, f64)>,
) {
    ego_block(world, pass, ego, offset, out);
    let ix = world.intersection();
    let mut per_conn: Vec<Vec<(f64, &Vehicle)>> = vec![Vec::new(); layout.connections];
    for v in world.vehicles() {
        if v.id == ego.id || !matches!(v.zone, Zone::OptimizationArea | Zone::CrossingZone) {
            continue;
        }
        let to_box = (ix.connections[v.connection].stop_line_s - v.s).max(0.0);
        per_conn[v.connection].push((to_box, v));
    }
    let base = offset + layout.ego_len();
    for (c, list) in per_conn.iter_mut().enumerate() {
        list.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.s.total_cmp(&a.1.s)).then(a.1.id.cmp(&b.1.id)));
        for (k, (_, v)) in list.iter().take(layout.nearest).enumerate() {
            let f = vehicle_features(world, v, pass.in_conflict(ego.id, v.id));
            let slot = base + (c * layout.nearest + k) * FEATURES;
            out.extend(f.iter().enumerate().map(|(j, &x)| (slot + j, x)));
        }
    }
}

fn relative_entries(
    world: &World,
    pass: &PassResult,
    ego: &Vehicle,
    layout: &StateLayout,
    cell: f64,
    offset: usize,
    out: &mut Vec<(usize, f64)>,
) {
    ego_block(world, pass, ego, offset, out);
    let n = layout.grid;
    let half = n as f64 * cell / 2.0;
    let centre = world.footprint(ego);
    let (sin, cos) = centre.heading.sin_cos();
    let mut grid = vec![0.0f64; GRID_CHANNELS * n * n];
    for v in world.vehicles() {
        if v.id == ego.id {
            continue;
        }
        let p = world.footprint(v).center;
        let (dx, dy) = (p.x - centre.center.x, p.y - centre.center.y);
        let fwd = dx * cos + dy * sin;
        let lat = -dx * sin + dy * cos;
        if fwd.abs() >= half || lat.abs() >= half {
            continue;
        }
        let row = (((fwd + half) / cell).floor() as usize).min(n - 1);
        let col = (((lat + half) / cell).floor() as usize).min(n - 1);
        let value = v.v.max(OCCUPIED_FLOOR);
        let left = world.intersection().connections[v.connection].is_left_turn();
        let mut mark = |ch: usize| {
            let k = ch * n * n + row * n + col;
            grid[k] = grid[k].max(value);
        };
        mark(if left { 1 } else { 0 });
        if pass.in_conflict(ego.id, v.id) {
            mark(2);
        }
    }
    let base = offset + layout.ego_len();
    out.extend(grid.iter().enumerate().filter(|(_, &x)| x != 0.0).map(|(k, &x)| (base + k, x)));
}

fn ego_of(world: &World, ego: VehicleId) -> &Vehicle {
    world.vehicle(ego).expect("ego vehicle present in world")
}

/// Global observation, with the upper action appended when given.
pub fn encode_global(
    world: &World,
    pass: &PassResult,
    ego: VehicleId,
    layout: &StateLayout,
    upper_action: Option<f64>,
) -> SparseVec {
    let v = ego_of(world, ego);
    let mut e = Vec::new();
    global_entries(world, pass, v, layout, 0, &mut e);
    let mut dim = layout.global_len();
    if let Some(a) = upper_action {
        e.push((dim, a));
        dim += 1;
    }
    build(dim, e)
}

/// Ego-centred observation, with the upper action appended when given.
pub fn encode_relative(
    world: &World,
    pass: &PassResult,
    ego: VehicleId,
    layout: &StateLayout,
    cell_size: f64,
    upper_action: Option<f64>,
) -> SparseVec {
    let v = ego_of(world, ego);
    let mut e = Vec::new();
    relative_entries(world, pass, v, layout, cell_size, 0, &mut e);
    let mut dim = layout.relative_len();
    if let Some(a) = upper_action {
        e.push((dim, a));
        dim += 1;
    }
    build(dim, e)
}

/// Single-agent observation: the block for the ego's zone is filled and
/// the other block left at zero.
pub fn encode_flat(
    world: &World,
    pass: &PassResult,
    ego: VehicleId,
    layout: &StateLayout,
    cell_size: f64,
) -> SparseVec {
    let v = ego_of(world, ego);
    let mut e = Vec::new();
    if v.zone == Zone::CrossingZone {
        relative_entries(world, pass, v, layout, cell_size, layout.global_len(), &mut e);
    } else {
        global_entries(world, pass, v, layout, 0, &mut e);
    }
    build(layout.flat_len(), e)
}
