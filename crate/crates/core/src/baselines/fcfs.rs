//! First-come-first-served scheduling, shown to every vehicle as a virtual
//! traffic light at its stop line, with optional platooning.

use serde::{Deserialize, Serialize};

use super::{min_travel_time, BaselineConfig, StopLineInterlock};
use crate::control::Controller;
use crate::error::RlError;
use crate::sim::{Controls, VehicleId, World};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlatoonGroup {
    /// Front to back; the first member is the leader.
    pub members: Vec<VehicleId>,
    pub connection: usize,
    /// Projected stop-line arrival of the first and last member.
    pub window: (f64, f64),
}

impl PlatoonGroup {
    pub fn leader(&self) -> VehicleId {
        self.members[0]
    }
}

/// Split one lane's queue, front first, into groups: a vehicle joins the
/// group ahead when it shares the connection, its projected arrival is
/// within `gap` of the previous member and the group has room.
pub fn form_platoons(queue: &[(VehicleId, usize, f64)], gap: f64, max: usize) -> Vec<PlatoonGroup> {
    let mut out: Vec<PlatoonGroup> = Vec::new();
    for &(id, connection, arrival) in queue {
        match out.last_mut() {
            Some(g) if g.connection == connection && arrival - g.window.1 <= gap && g.members.len() < max => {
                g.members.push(id);
                g.window.1 = arrival;
            }
            _ => out.push(PlatoonGroup { members: vec![id], connection, window: (arrival, arrival) }),
        }
    }
    out
}

pub struct FcfsController {
    name: &'static str,
    interlock: StopLineInterlock,
    grant_distance: f64,
    platoon_gap: f64,
    platoon_max: usize,
}

impl FcfsController {
    /// Vehicle-by-vehicle scheduling.
    pub fn vtl(world: &World, cfg: &BaselineConfig) -> Self {
        Self::build("fcfs_vtl", world, cfg, 1)
    }

    /// Scheduling of same-connection platoons of up to `platoon_max`.
    pub fn platoon(world: &World, cfg: &BaselineConfig) -> Self {
        Self::build("fcfs_platoon", world, cfg, cfg.platoon_max)
    }

    fn build(name: &'static str, world: &World, cfg: &BaselineConfig, platoon_max: usize) -> Self {
        Self {
            name,
            interlock: StopLineInterlock::new(world.intersection(), world.config().limits.width),
            grant_distance: cfg.fcfs_grant_distance,
            platoon_gap: cfg.platoon_gap,
            platoon_max,
        }
    }

    /// Groups currently at the front of each lane.
    pub fn head_groups(&self, world: &World) -> Vec<PlatoonGroup> {
        let lim = &world.config().limits;
        let ix = world.intersection();
        let t = world.time();
        self.interlock
            .lane_queues(world)
            .iter()
            .filter_map(|lane| {
                let q: Vec<(VehicleId, usize, f64)> = lane
                    .iter()
                    .map(|&i| {
                        let v = &world.vehicles()[i];
                        let d = ix.connections[v.connection].stop_line_s - v.s;
                        (v.id, v.connection, t + min_travel_time(d, v.v, 0.5 * lim.accel_max, lim.v_max))
                    })
                    .collect();
                form_platoons(&q, self.platoon_gap, self.platoon_max).into_iter().next()
            })
            .collect()
    }
}

type Arrival = (f64, VehicleId);

fn arrival(world: &World, id: VehicleId) -> Option<Arrival> {
    world.vehicle(id).and_then(|v| v.entered_optimization_at.map(|t| (t, id)))
}

impl Controller for FcfsController {
    fn name(&self) -> &str {
        self.name
    }

    fn control(&mut self, world: &World) -> Result<Controls, RlError> {
        let mut c = Controls::default();
        self.interlock.refresh(world, &mut c.log, self.name);
        let ix = world.intersection();
        let mut pending: Vec<(Arrival, usize)> = world
            .vehicles()
            .iter()
            .filter(|v| v.s < ix.connections[v.connection].stop_line_s && !self.interlock.is_granted(v.id))
            .filter_map(|v| arrival(world, v.id).map(|a| (a, v.connection)))
            .collect();
        pending.sort_by(|a, b| a.0 .0.total_cmp(&b.0 .0).then(a.0 .1.cmp(&b.0 .1)));
        let mut groups: Vec<(Arrival, PlatoonGroup)> =
            self.head_groups(world).into_iter().filter_map(|g| arrival(world, g.leader()).map(|a| (a, g))).collect();
        groups.sort_by(|a, b| a.0 .0.total_cmp(&b.0 .0).then(a.0 .1.cmp(&b.0 .1)));
        for (key, g) in groups {
            let lead = world.vehicle(g.leader()).unwrap();
            if ix.connections[g.connection].stop_line_s - lead.s > self.grant_distance {
                continue;
            }
            let earlier_conflict = pending
                .iter()
                .take_while(|(a, _)| a.0 < key.0 || (a.0 == key.0 && a.1 < key.1))
                .any(|&(_, conn)| self.interlock.conflicts(g.connection, conn));
            if earlier_conflict || !self.interlock.can_grant(world, g.connection) {
                continue;
            }
            for &m in &g.members {
                self.interlock.grant(m, g.connection, &mut c.log, self.name);
            }
            pending.retain(|(a, _)| !g.members.contains(&a.1));
        }
        c.hold = self.interlock.holds(world);
        Ok(c)
    }
}
