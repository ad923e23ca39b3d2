//! Closed-loop hierarchical control of every CAV in the two control zones.
//!
//! Per step: rebuild the reservation table, let due agents decide, compose
//! the speed change, step the world, then credit rewards. Upper decisions
//! last `multiplier` lower decisions; their experience carries the window
//! sum of step rewards. A vehicle leaving its zone ends both of its open
//! decisions as terminal transitions and hands over to the next pair.

use std::collections::{BTreeMap, BTreeSet};

use super::reward::{lower_reward, upper_case, upper_step_reward};
use super::state::{encode_global, encode_relative, StateLayout};
use super::{compose_action, Group, HarlConfig, Learner};
use crate::control::{following_limit, Controller};
use crate::error::RlError;
use crate::geometry::Zone;
use crate::reservation::{reassign_world, AssignmentStatus, PassResult, ReservationConfig, Status};
use crate::rl::{Experience, SparseVec};
use crate::sim::events::{Event, EventKind};
use crate::sim::{Controls, VehicleId, VehicleKind, World};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Stochastic actions, experiences stored, agents updated.
    Train,
    /// Deterministic actions, nothing stored.
    Eval,
}

#[derive(Debug, Clone)]
struct Decision {
    state: SparseVec,
    action: Vec<f64>,
    reward: f64,
    remaining: u32,
}

#[derive(Debug, Clone)]
struct Slots {
    group: Group,
    upper: Option<Decision>,
    lower: Option<Decision>,
}

pub struct HarlController<'a> {
    cfg: HarlConfig,
    layout: StateLayout,
    reservation: ReservationConfig,
    learner: &'a mut Learner,
    mode: Mode,
    previous: BTreeMap<VehicleId, AssignmentStatus>,
    pass: Option<PassResult>,
    slots: BTreeMap<VehicleId, Slots>,
}

impl<'a> HarlController<'a> {
    pub fn new(
        cfg: &HarlConfig,
        reservation: &ReservationConfig,
        connections: usize,
        learner: &'a mut Learner,
        mode: Mode,
    ) -> Self {
        assert_eq!(learner.agents.len(), 4, "hierarchical control needs four agents");
        Self {
            layout: StateLayout::new(connections, cfg),
            cfg: cfg.clone(),
            reservation: reservation.clone(),
            learner,
            mode,
            previous: BTreeMap::new(),
            pass: None,
            slots: BTreeMap::new(),
        }
    }

    pub fn last_pass(&self) -> Option<&PassResult> {
        self.pass.as_ref()
    }

    fn encode(
        &self,
        world: &World,
        pass: &PassResult,
        id: VehicleId,
        agent: usize,
        upper_action: Option<f64>,
    ) -> SparseVec {
        if agent < 2 {
            encode_global(world, pass, id, &self.layout, upper_action)
        } else {
            encode_relative(world, pass, id, &self.layout, self.cfg.cell_size, upper_action)
        }
    }

    fn push(&mut self, agent: usize, d: Decision, next_state: SparseVec, done: bool) -> Result<(), RlError> {
        if self.mode == Mode::Train {
            self.learner
                .remember(agent, Experience { state: d.state, action: d.action, reward: d.reward, next_state, done })?;
        }
        Ok(())
    }

    /// Close both decisions of a vehicle as terminal transitions.
    fn close_terminal(&mut self, slots: Slots) -> Result<(), RlError> {
        let (u, l) = slots.group.agents();
        if let Some(d) = slots.upper {
            let next = d.state.clone();
            self.push(u, d, next, true)?;
        }
        if let Some(d) = slots.lower {
            let next = d.state.clone();
            self.push(l, d, next, true)?;
        }
        Ok(())
    }
}

impl Controller for HarlController<'_> {
    fn name(&self) -> &str {
        "harl"
    }

    fn control(&mut self, world: &World) -> Result<Controls, RlError> {
        let pass = reassign_world(world, &self.reservation, &self.previous);
        let explore = self.mode == Mode::Train;
        let mut controls = Controls::default();
        let dt = world.config().dt;
        for (idx, v) in world.vehicles().iter().enumerate() {
            if v.kind != VehicleKind::Cav {
                continue;
            }
            let Some(group) = Group::of(v.zone) else { continue };
            if let Some(s) = self.slots.get(&v.id) {
                if s.group != group {
                    let s = self.slots.remove(&v.id).unwrap();
                    self.close_terminal(s)?;
                }
            }
            let (ua, la) = group.agents();
            let mut slots = self.slots.remove(&v.id).unwrap_or(Slots { group, upper: None, lower: None });

            if slots.upper.as_ref().is_none_or(|d| d.remaining == 0) {
                let state = self.encode(world, &pass, v.id, ua, None);
                if let Some(d) = slots.upper.take() {
                    self.push(ua, d, state.clone(), false)?;
                }
                let action = self.learner.act(ua, &state, explore)?;
                slots.upper = Some(Decision { state, action, reward: 0.0, remaining: self.cfg.upper_steps() });
            }
            let a_upper = slots.upper.as_ref().unwrap().action[0];
            if slots.lower.as_ref().is_none_or(|d| d.remaining == 0) {
                let state = self.encode(world, &pass, v.id, la, Some(a_upper));
                if let Some(d) = slots.lower.take() {
                    self.push(la, d, state.clone(), false)?;
                }
                let action = self.learner.act(la, &state, explore)?;
                slots.lower = Some(Decision { state, action, reward: 0.0, remaining: self.cfg.lower_steps });
            }
            let a_lower = slots.lower.as_ref().unwrap().action[0];
            self.slots.insert(v.id, slots);

            let hold = pass.statuses.get(&v.id).is_some_and(|s| s.kept_prior);
            let lim = &world.config().limits;
            let mut dv =
                compose_action(a_upper, a_lower, self.cfg.multiplier, self.cfg.lower_steps, v.v, hold, lim, dt);
            if self.cfg.following_guard {
                dv = lim.clamp_dv(dv.min(following_limit(world, idx)), v.v, dt);
            }
            controls.dv.insert(v.id, dv);
        }
        self.pass = Some(pass);
        Ok(controls)
    }

    fn observe(&mut self, world: &World, events: &[Event]) -> Result<(), RlError> {
        let pass = self.pass.take().expect("control runs before observe");
        let mut entered_crossing = BTreeSet::new();
        let mut departed = BTreeSet::new();
        for e in events {
            match e.kind {
                EventKind::Zone { vehicle, zone: Zone::CrossingZone } => {
                    entered_crossing.insert(vehicle);
                }
                EventKind::Departure { vehicle, .. } => {
                    departed.insert(vehicle);
                }
                _ => {}
            }
        }
        let ids: Vec<VehicleId> = self.slots.keys().copied().collect();
        for id in ids {
            let status = pass.statuses.get(&id).map_or(Status::UnassignedNew, |s| s.status);
            let slots = self.slots.get_mut(&id).unwrap();
            let left_now = match slots.group {
                Group::Approach => entered_crossing.contains(&id) || departed.contains(&id),
                Group::Crossing => departed.contains(&id),
            };
            let r_up = upper_step_reward(&self.cfg.rewards, upper_case(false, left_now, status));
            let r_low = lower_reward(&self.cfg.rewards, status);
            if let Some(d) = slots.upper.as_mut() {
                d.reward += r_up;
                d.remaining = d.remaining.saturating_sub(1);
            }
            if let Some(d) = slots.lower.as_mut() {
                d.reward += r_low;
                d.remaining = d.remaining.saturating_sub(1);
            }
            let gone = world.vehicle(id).is_none_or(|v| Group::of(v.zone) != Some(slots.group));
            if left_now || gone {
                let s = self.slots.remove(&id).unwrap();
                self.close_terminal(s)?;
            }
        }
        self.previous = pass.statuses.clone();
        self.pass = Some(pass);
        self.learner.end_step(self.mode == Mode::Train)
    }

    fn finish(&mut self, world: &World) -> Result<(), RlError> {
        let Some(pass) = self.pass.take() else { return Ok(()) };
        let slots = std::mem::take(&mut self.slots);
        for (id, s) in slots {
            let (u, l) = s.group.agents();
            if let Some(d) = s.upper {
                let next = self.encode(world, &pass, id, u, None);
                let a_upper = d.action[0];
                self.push(u, d, next, false)?;
                if let Some(dl) = s.lower {
                    let next = self.encode(world, &pass, id, l, Some(a_upper));
                    self.push(l, dl, next, false)?;
                }
            }
        }
        Ok(())
    }
}
