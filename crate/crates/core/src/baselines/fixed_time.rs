//! Fixed-cycle signal control.

use super::{min_travel_time, BaselineConfig, PhasePlan, StopLineInterlock};
use crate::control::Controller;
use crate::error::RlError;
use crate::sim::events::EventKind;
use crate::sim::{Controls, World};

pub struct FixedTimeController {
    plan: PhasePlan,
    interlock: StopLineInterlock,
    last: Option<(usize, bool)>,
}

impl FixedTimeController {
    pub fn new(world: &World, cfg: &BaselineConfig) -> Self {
        let ix = world.intersection();
        Self {
            plan: PhasePlan::four_phase(ix, cfg.cycle, cfg.yellow),
            interlock: StopLineInterlock::new(ix, world.config().limits.width),
            last: None,
        }
    }

    pub fn plan(&self) -> &PhasePlan {
        &self.plan
    }
}

/// Grant lane heads on served connections whose earliest stop-line arrival
/// fits in the remaining green.
pub(crate) fn grant_served(
    world: &World,
    interlock: &mut StopLineInterlock,
    served: &[usize],
    green_left: f64,
    log: &mut Vec<EventKind>,
    name: &str,
) {
    let ix = world.intersection();
    let lim = &world.config().limits;
    for lane in interlock.lane_queues(world) {
        let Some(&head) = lane.first() else { continue };
        let v = &world.vehicles()[head];
        if !served.contains(&v.connection) {
            continue;
        }
        let to_line = ix.connections[v.connection].stop_line_s - v.s;
        if min_travel_time(to_line, v.v, 0.5 * lim.accel_max, lim.v_max) > green_left {
            continue;
        }
        if interlock.can_grant(world, v.connection) {
            interlock.grant(v.id, v.connection, log, name);
        }
    }
}

impl Controller for FixedTimeController {
    fn name(&self) -> &str {
        "fixed_time"
    }

    fn control(&mut self, world: &World) -> Result<Controls, RlError> {
        let mut c = Controls::default();
        let name = "fixed_time";
        self.interlock.refresh(world, &mut c.log, name);
        let st = self.plan.state_at(world.time());
        if self.last != Some((st.phase, st.green)) {
            let action = if st.green { format!("phase {}", st.phase) } else { "yellow".to_string() };
            c.log.push(EventKind::Control { controller: name.into(), vehicle: None, action });
            self.last = Some((st.phase, st.green));
        }
        if st.green {
            grant_served(world, &mut self.interlock, &self.plan.phases[st.phase], st.green_left, &mut c.log, name);
        }
        c.hold = self.interlock.holds(world);
        Ok(c)
    }
}
