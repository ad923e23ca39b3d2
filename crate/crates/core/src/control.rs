//! Controller interface and the closed-loop episode driver.

use crate::error::RlError;
use crate::sim::events::Event;
use crate::sim::idm::{Leader, IDM_ACCEL_FLOOR};
use crate::sim::{ClampAudit, Controls, World};

pub trait Controller {
    fn name(&self) -> &str;

    /// Commands for the next step, computed from the current world.
    fn control(&mut self, world: &World) -> Result<Controls, RlError>;

    /// Called with the events of the step just simulated.
    fn observe(&mut self, _world: &World, _events: &[Event]) -> Result<(), RlError> {
        Ok(())
    }

    /// Called once when the episode horizon is reached.
    fn finish(&mut self, _world: &World) -> Result<(), RlError> {
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct EpisodeLog {
    pub events: Vec<Event>,
    pub duration: f64,
    pub steps: u64,
    pub audit: ClampAudit,
}

/// Run `controller` on `world` until `duration` simulated seconds have elapsed.
pub fn run_episode(world: &mut World, controller: &mut dyn Controller, duration: f64) -> Result<EpisodeLog, RlError> {
    let steps = (duration / world.config().dt).round() as u64;
    let mut events = Vec::new();
    let audit_before = world.audit();
    for _ in 0..steps {
        let controls = controller.control(world)?;
        let ev = world.step(&controls);
        controller.observe(world, &ev)?;
        events.extend(ev);
    }
    controller.finish(world)?;
    let after = world.audit();
    let audit = ClampAudit {
        checked: after.checked - audit_before.checked,
        command_violations: after.command_violations - audit_before.command_violations,
        applied_violations: after.applied_violations - audit_before.applied_violations,
    };
    Ok(EpisodeLog { events, duration: steps as f64 * world.config().dt, steps, audit })
}

/// Largest speed change that keeps a controlled vehicle behind its leader:
/// the interaction part of the standard IDM law, `a_max (1 - (s*/s)^2) dt`.
/// Unbounded when there is no leader.
pub fn following_limit(world: &World, idx: usize) -> f64 {
    let p = &world.config().idm;
    let dt = world.config().dt;
    match world.leader_of(idx, false) {
        None => f64::INFINITY,
        Some(Leader { gap, .. }) if gap <= 0.0 => IDM_ACCEL_FLOOR * dt,
        Some(Leader { gap, speed }) => {
            let v = world.vehicles()[idx].v;
            let q = p.desired_gap(v, speed) / gap;
            (p.a_max * (1.0 - q * q)).max(IDM_ACCEL_FLOOR) * dt
        }
    }
}
