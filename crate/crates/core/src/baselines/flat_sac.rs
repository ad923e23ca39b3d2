//! One SAC agent steering every CAV in both control zones, without the
//! hierarchy or the adversarial pairing.

use std::collections::{BTreeMap, BTreeSet};

use crate::control::{following_limit, Controller};
use crate::error::RlError;
use crate::harl::reward::{lower_reward, upper_case, upper_step_reward};
use crate::harl::state::{encode_flat, StateLayout};
use crate::harl::{Group, HarlConfig, Learner, Mode};
use crate::reservation::{reassign_world, AssignmentStatus, PassResult, ReservationConfig, Status};
use crate::rl::{Experience, SparseVec};
use crate::sim::events::{Event, EventKind};
use crate::sim::{Controls, VehicleId, VehicleKind, World};

#[derive(Debug, Clone)]
struct Decision {
    state: SparseVec,
    action: f64,
    reward: f64,
    remaining: u32,
}

pub struct FlatSacController<'a> {
    cfg: HarlConfig,
    layout: StateLayout,
    reservation: ReservationConfig,
    learner: &'a mut Learner,
    mode: Mode,
    previous: BTreeMap<VehicleId, AssignmentStatus>,
    pass: Option<PassResult>,
    open: BTreeMap<VehicleId, Decision>,
}

impl<'a> FlatSacController<'a> {
    pub fn new(
        cfg: &HarlConfig,
        reservation: &ReservationConfig,
        connections: usize,
        learner: &'a mut Learner,
        mode: Mode,
    ) -> Self {
        assert_eq!(learner.agents.len(), 1, "flat control uses a single agent");
        Self {
            layout: StateLayout::new(connections, cfg),
            cfg: cfg.clone(),
            reservation: reservation.clone(),
            learner,
            mode,
            previous: BTreeMap::new(),
            pass: None,
            open: BTreeMap::new(),
        }
    }

    fn push(&mut self, d: Decision, next_state: SparseVec, done: bool) -> Result<(), RlError> {
        if self.mode == Mode::Train {
            self.learner.remember(
                0,
                Experience { state: d.state, action: vec![d.action], reward: d.reward, next_state, done },
            )?;
        }
        Ok(())
    }
}

impl Controller for FlatSacController<'_> {
    fn name(&self) -> &str {
        "flat_sac"
    }

    fn control(&mut self, world: &World) -> Result<Controls, RlError> {
        let pass = reassign_world(world, &self.reservation, &self.previous);
        let explore = self.mode == Mode::Train;
        let mut controls = Controls::default();
        let dt = world.config().dt;
        let lim = &world.config().limits;
        for (idx, v) in world.vehicles().iter().enumerate() {
            if v.kind != VehicleKind::Cav || Group::of(v.zone).is_none() {
                continue;
            }
            let due = self.open.get(&v.id).is_none_or(|d| d.remaining == 0);
            if due {
                let state = encode_flat(world, &pass, v.id, &self.layout, self.cfg.cell_size);
                if let Some(d) = self.open.remove(&v.id) {
                    self.push(d, state.clone(), false)?;
                }
                let action = self.learner.act(0, &state, explore)?[0];
                self.open.insert(v.id, Decision { state, action, reward: 0.0, remaining: self.cfg.lower_steps });
            }
            let mut dv = lim.clamp_dv(self.open[&v.id].action, v.v, dt);
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
        let departed: BTreeSet<VehicleId> = events
            .iter()
            .filter_map(|e| match e.kind {
                EventKind::Departure { vehicle, .. } => Some(vehicle),
                _ => None,
            })
            .collect();
        let ids: Vec<VehicleId> = self.open.keys().copied().collect();
        for id in ids {
            let status = pass.statuses.get(&id).map_or(Status::UnassignedNew, |s| s.status);
            let left = departed.contains(&id);
            let r = upper_step_reward(&self.cfg.rewards, upper_case(false, left, status))
                + lower_reward(&self.cfg.rewards, status);
            let d = self.open.get_mut(&id).unwrap();
            d.reward += r;
            d.remaining = d.remaining.saturating_sub(1);
            let gone = world.vehicle(id).is_none_or(|v| Group::of(v.zone).is_none());
            if left || gone {
                let d = self.open.remove(&id).unwrap();
                let next = d.state.clone();
                self.push(d, next, true)?;
            }
        }
        self.previous = pass.statuses.clone();
        self.pass = Some(pass);
        self.learner.end_step(self.mode == Mode::Train)
    }

    fn finish(&mut self, world: &World) -> Result<(), RlError> {
        let Some(pass) = self.pass.take() else { return Ok(()) };
        for (id, d) in std::mem::take(&mut self.open) {
            let next = encode_flat(world, &pass, id, &self.layout, self.cfg.cell_size);
            self.push(d, next, false)?;
        }
        Ok(())
    }
}
