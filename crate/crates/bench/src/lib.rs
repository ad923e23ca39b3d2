//! Fixtures shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use harl_core::baselines::FcfsController;
use harl_core::control::run_episode;
use harl_core::harness::{intersection, new_agents};
use harl_core::rl::{Experience, SacAgent, SparseVec};
use harl_core::{ControllerKind, ScenarioConfig, World};

/// A world that has run `warmup` seconds under FCFS at `flow`, so the
/// approaches are populated.
pub fn busy_world(flow: f64, warmup: f64) -> World {
    let cfg = ScenarioConfig { flow, ..ScenarioConfig::default() };
    let mut w = World::new(intersection(&cfg).expect("intersection"), cfg.world_config(7));
    let mut ctl = FcfsController::vtl(&w, &cfg.baselines);
    run_episode(&mut w, &mut ctl, warmup).expect("warmup");
    w
}

/// The four HARL agents at the default network sizes.
pub fn harl_agents() -> Vec<SacAgent> {
    let cfg = ScenarioConfig { controller: ControllerKind::Harl, ..ScenarioConfig::default() };
    new_agents(&cfg, ControllerKind::Harl, 1).expect("agents")
}

/// A sparse state with roughly `density` of its entries set.
pub fn random_state(dim: usize, density: f64, rng: &mut ChaCha8Rng) -> SparseVec {
    let dense: Vec<f64> =
        (0..dim).map(|_| if rng.random_bool(density) { rng.random_range(-1.0..1.0) } else { 0.0 }).collect();
    SparseVec::from_dense(&dense)
}

/// Random transitions sized for `agent`.
pub fn random_batch(agent: &SacAgent, n: usize, seed: u64) -> Vec<Experience> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let span = agent.span();
    (0..n)
        .map(|_| Experience {
            state: random_state(agent.state_dim(), 0.1, &mut rng),
            action: (0..span.dim()).map(|k| rng.random_range(span.low[k]..=span.high[k])).collect(),
            reward: rng.random_range(-1.0..1.0),
            next_state: random_state(agent.state_dim(), 0.1, &mut rng),
            done: rng.random_bool(0.05),
        })
        .collect()
}
