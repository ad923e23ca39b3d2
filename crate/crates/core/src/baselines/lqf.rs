//! Longest-queue-first signal control.

use super::fixed_time::grant_served;
use super::{BaselineConfig, PhasePlan, StopLineInterlock};
use crate::control::Controller;
use crate::error::RlError;
use crate::geometry::Zone;
use crate::sim::events::EventKind;
use crate::sim::{Controls, World};

/// Phase with the longest queue; ties go to the lowest index. `None` when
/// every queue is empty.
pub fn select_phase(queues: &[usize]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (p, &q) in queues.iter().enumerate() {
        if q > 0 && best.is_none_or(|b| q > queues[b]) {
            best = Some(p);
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Signal {
    Green { phase: usize, since: f64 },
    Yellow { next: usize, until: f64 },
}

pub struct LqfController {
    plan: PhasePlan,
    interlock: StopLineInterlock,
    min_green: f64,
    yellow: f64,
    queue_speed: f64,
    signal: Option<Signal>,
}

impl LqfController {
    pub fn new(world: &World, cfg: &BaselineConfig) -> Self {
        let ix = world.intersection();
        Self {
            plan: PhasePlan::four_phase(ix, cfg.cycle, cfg.yellow),
            interlock: StopLineInterlock::new(ix, world.config().limits.width),
            min_green: cfg.lqf_min_green,
            yellow: cfg.yellow,
            queue_speed: cfg.queue_speed,
            signal: None,
        }
    }

    /// Queued vehicles per phase.
    pub fn queues(&self, world: &World) -> Vec<usize> {
        let mut q = vec![0; self.plan.phases.len()];
        for v in world.vehicles() {
            if v.zone == Zone::OptimizationArea && v.v < self.queue_speed {
                for (p, n) in q.iter_mut().enumerate() {
                    if self.plan.serves(p, v.connection) {
                        *n += 1;
                    }
                }
            }
        }
        q
    }
}

impl Controller for LqfController {
    fn name(&self) -> &str {
        "lqf"
    }

    fn control(&mut self, world: &World) -> Result<Controls, RlError> {
        let mut c = Controls::default();
        let name = "lqf";
        let t = world.time();
        self.interlock.refresh(world, &mut c.log, name);
        let queues = self.queues(world);
        let phase_log =
            |p: usize| EventKind::Control { controller: name.into(), vehicle: None, action: format!("phase {p}") };
        let signal = match self.signal {
            None => {
                let p = select_phase(&queues).unwrap_or(0);
                c.log.push(phase_log(p));
                Signal::Green { phase: p, since: t }
            }
            Some(Signal::Green { phase, since }) if t - since >= self.min_green - 1e-9 => match select_phase(&queues) {
                Some(p) if queues[p] > queues[phase] => {
                    c.log.push(EventKind::Control { controller: name.into(), vehicle: None, action: "yellow".into() });
                    Signal::Yellow { next: p, until: t + self.yellow }
                }
                _ => Signal::Green { phase, since },
            },
            Some(Signal::Yellow { next, until }) if t >= until - 1e-9 => {
                c.log.push(phase_log(next));
                Signal::Green { phase: next, since: t }
            }
            Some(s) => s,
        };
        self.signal = Some(signal);
        if let Signal::Green { phase, .. } = signal {
            grant_served(world, &mut self.interlock, &self.plan.phases[phase], self.min_green, &mut c.log, name);
        }
        c.hold = self.interlock.holds(world);
        Ok(c)
    }
}
