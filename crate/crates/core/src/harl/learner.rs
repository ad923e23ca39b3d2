//! Agents, their replay memories and training bookkeeping, shared by the
//! hierarchical controller and the single-agent comparison.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::RlError;
use crate::rl::{Experience, LossReport, ReplayMemory, SacAgent, SparseVec};

/// Per-agent reward and loss means over fixed windows of environment steps.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardWindows {
    pub window: u64,
    pub(crate) reward_sum: Vec<f64>,
    pub(crate) reward_count: Vec<u64>,
    pub(crate) loss_sum: Vec<LossReport>,
    pub(crate) loss_count: Vec<u64>,
    pub rows: Vec<WindowRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowRow {
    /// Environment step at which the window closed.
    pub end_step: u64,
    /// Mean experience reward per agent; `None` when no experience landed.
    pub mean_reward: Vec<Option<f64>>,
    pub experiences: Vec<u64>,
    pub mean_loss: Vec<Option<LossReport>>,
}

impl RewardWindows {
    pub fn new(agents: usize, window: u64) -> Self {
        Self {
            window,
            reward_sum: vec![0.0; agents],
            reward_count: vec![0; agents],
            loss_sum: vec![LossReport::default(); agents],
            loss_count: vec![0; agents],
            rows: Vec::new(),
        }
    }

    fn record(&mut self, agent: usize, reward: f64) {
        self.reward_sum[agent] += reward;
        self.reward_count[agent] += 1;
    }

    fn record_loss(&mut self, agent: usize, l: &LossReport) {
        let s = &mut self.loss_sum[agent];
        s.value += l.value;
        s.q += l.q;
        s.policy += l.policy;
        s.alpha += l.alpha;
        s.alpha_value += l.alpha_value;
        s.entropy += l.entropy;
        self.loss_count[agent] += 1;
    }

    fn close(&mut self, end_step: u64) {
        let n = self.reward_sum.len();
        let mean_reward = (0..n)
            .map(|k| (self.reward_count[k] > 0).then(|| self.reward_sum[k] / self.reward_count[k] as f64))
            .collect();
        let mean_loss = (0..n)
            .map(|k| {
                let c = self.loss_count[k] as f64;
                (c > 0.0).then(|| {
                    let s = &self.loss_sum[k];
                    LossReport {
                        value: s.value / c,
                        q: s.q / c,
                        policy: s.policy / c,
                        alpha: s.alpha / c,
                        alpha_value: s.alpha_value / c,
                        entropy: s.entropy / c,
                    }
                })
            })
            .collect();
        self.rows.push(WindowRow { end_step, mean_reward, experiences: self.reward_count.clone(), mean_loss });
        self.reward_sum.iter_mut().for_each(|x| *x = 0.0);
        self.reward_count.iter_mut().for_each(|x| *x = 0);
        self.loss_sum.iter_mut().for_each(|x| *x = LossReport::default());
        self.loss_count.iter_mut().for_each(|x| *x = 0);
    }
}

#[derive(Debug, Clone)]
pub struct Learner {
    pub agents: Vec<SacAgent>,
    pub memories: Vec<ReplayMemory>,
    /// Decisions taken in exploration mode, per agent.
    pub decisions: Vec<u64>,
    pub env_steps: u64,
    pub update_every: u64,
    pub progress: RewardWindows,
    pub(crate) rng: ChaCha8Rng,
}

impl Learner {
    pub fn new(agents: Vec<SacAgent>, update_every: u64, window: u64) -> Self {
        let n = agents.len();
        Self {
            memories: agents.iter().map(SacAgent::new_memory).collect(),
            agents,
            decisions: vec![0; n],
            env_steps: 0,
            update_every,
            progress: RewardWindows::new(n, window),
            rng: ChaCha8Rng::seed_from_u64(0),
        }
    }

    /// Restart the sampling stream; training re-derives it per epoch.
    pub fn reseed(&mut self, seed: u64, stream: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        self.rng.set_stream(stream);
    }

    /// Action for `agent`. Exploration counts toward the warmup horizon;
    /// otherwise the squashed mean is returned.
    pub fn act(&mut self, agent: usize, state: &SparseVec, explore: bool) -> Result<Vec<f64>, RlError> {
        let t = self.decisions[agent];
        let (a, _) = self.agents[agent].sample_action(state, t, &mut self.rng, !explore)?;
        if explore {
            self.decisions[agent] += 1;
        }
        Ok(a)
    }

    pub fn remember(&mut self, agent: usize, e: Experience) -> Result<(), RlError> {
        self.progress.record(agent, e.reward);
        self.memories[agent].push(e)
    }

    /// Close one environment step; in training, update every agent whose
    /// memory can fill a batch on the configured schedule.
    pub fn end_step(&mut self, train: bool) -> Result<(), RlError> {
        self.env_steps += 1;
        if train && self.env_steps.is_multiple_of(self.update_every) {
            for k in 0..self.agents.len() {
                if self.memories[k].len() >= self.agents[k].config().batch_size {
                    let report = self.agents[k].update(&self.memories[k], &mut self.rng)?;
                    self.progress.record_loss(k, &report);
                }
            }
        }
        if self.env_steps.is_multiple_of(self.progress.window) {
            self.progress.close(self.env_steps);
        }
        Ok(())
    }
}
