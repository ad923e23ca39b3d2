//! Run orchestration: training with checkpoints, evaluation, sweeps.
//!
//! A training directory holds:
//!
//! | file                    | content                                          |
//! |-------------------------|--------------------------------------------------|
//! | `config.toml`           | canonical copy of the scenario                   |
//! | `epoch_NNN.ckpt`        | agents after epoch NNN (1-based)                 |
//! | `final.ckpt`            | agents after the last epoch                      |
//! | `train_state.bin`       | agents, replay memories and counters to resume   |
//! | `progress.csv`          | per-agent reward and loss means per step window  |
//! | `epochs.csv`            | one row per training episode                     |
//!
//! Training resumes from `train_state.bin`, which is written together with
//! each checkpoint. Epoch worlds and sampling streams derive from the seed
//! and the epoch index only, so a resumed run repeats an uninterrupted one.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use crate::baselines::{FcfsController, FixedTimeController, FlatSacController, LqfController};
use crate::config::{ControllerKind, ScenarioConfig};
use crate::control::{run_episode, Controller, EpisodeLog};
use crate::error::{HarnessError, RlError};
use crate::geometry::{build_intersection, Intersection};
use crate::harl::learner::{RewardWindows, WindowRow};
use crate::harl::state::StateLayout;
use crate::harl::{HarlController, Learner, Mode};
use crate::metrics::{compute_metrics, MetricsRow, RunMetrics};
use crate::rl::checkpoint::{decode_agent, decode_memory, encode_agent, encode_memory, header, Decoder, Encoder};
use crate::rl::{ActionSpan, LossReport, SacAgent};
use crate::sim::events::Event;
use crate::sim::World;

pub const AGENTS_MAGIC: &[u8; 8] = b"HARLAGTS";
pub const AGENTS_VERSION: u32 = 1;
pub const TRAIN_STATE_MAGIC: &[u8; 8] = b"HARLTRST";
pub const TRAIN_STATE_VERSION: u32 = 1;
/// Environment variable capping parallel sweep cells.
pub const THREADS_ENV: &str = "AIM_HARL_THREADS";

/// SplitMix64 finalizer, used to derive independent seeds.
pub fn mix_seed(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// World seed of training epoch `epoch`; never equal to evaluation seeds
/// in practice.
pub fn epoch_seed(seed: u64, epoch: u32) -> u64 {
    mix_seed(mix_seed(seed) ^ (epoch as u64 + 1))
}

pub fn intersection(cfg: &ScenarioConfig) -> Result<Arc<Intersection>, HarnessError> {
    Ok(Arc::new(build_intersection(&cfg.intersection)?))
}

/// Freshly initialized agents for a learned controller.
pub fn new_agents(cfg: &ScenarioConfig, kind: ControllerKind, seed: u64) -> Result<Vec<SacAgent>, HarnessError> {
    let ix = intersection(cfg)?;
    let layout = StateLayout::new(ix.connections.len(), &cfg.harl);
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed ^ 0xa9e7));
    match kind {
        ControllerKind::Harl => {
            let dims = layout.agent_dims();
            Ok(cfg
                .harl
                .specs()
                .iter()
                .zip(dims)
                .map(|(s, d)| SacAgent::new(cfg.harl.sac.clone(), d, s.span.clone(), &mut rng))
                .collect())
        }
        ControllerKind::FlatSac => {
            let span = ActionSpan::scalar(cfg.harl.flat_span[0], cfg.harl.flat_span[1]);
            Ok(vec![SacAgent::new(cfg.harl.sac.clone(), layout.flat_len(), span, &mut rng)])
        }
        k => Err(HarnessError::Other(format!("controller `{k}` has no agents"))),
    }
}

/// Agents of a learned controller in one file.
pub fn encode_agents(kind: ControllerKind, agents: &[SacAgent]) -> Vec<u8> {
    let mut e = header(AGENTS_MAGIC, AGENTS_VERSION);
    put_kind(&mut e, kind);
    e.u32(agents.len() as u32);
    for a in agents {
        encode_agent(&mut e, a);
    }
    e.finish()
}

pub fn decode_agents(bytes: &[u8]) -> Result<(ControllerKind, Vec<SacAgent>), RlError> {
    let mut d = Decoder::open(bytes, AGENTS_MAGIC, AGENTS_VERSION)?;
    let kind = get_kind(&mut d)?;
    let n = d.u32()? as usize;
    let expect = if kind == ControllerKind::Harl { 4 } else { 1 };
    if n != expect {
        return Err(RlError::Checkpoint(format!("{kind} checkpoint holds {n} agents, expected {expect}")));
    }
    let agents = (0..n).map(|_| decode_agent(&mut d)).collect::<Result<Vec<_>, _>>()?;
    d.finish()?;
    Ok((kind, agents))
}

pub fn load_agents(path: &Path) -> Result<(ControllerKind, Vec<SacAgent>), HarnessError> {
    let bytes = std::fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => HarnessError::MissingCheckpoint(path.display().to_string()),
        _ => HarnessError::Io(e),
    })?;
    Ok(decode_agents(&bytes)?)
}

fn put_kind(e: &mut Encoder, k: ControllerKind) {
    e.u8(ControllerKind::ALL.iter().position(|&x| x == k).unwrap() as u8);
}

fn get_kind(d: &mut Decoder) -> Result<ControllerKind, RlError> {
    let i = d.u8()? as usize;
    ControllerKind::ALL
        .get(i)
        .copied()
        .filter(|k| k.is_learned())
        .ok_or_else(|| RlError::Checkpoint(format!("unknown controller tag {i}")))
}

/// Summary of a checkpoint file.
#[derive(Debug, Clone, Serialize)]
pub struct CheckpointInfo {
    pub controller: ControllerKind,
    pub agents: Vec<AgentInfo>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AgentInfo {
    pub state_dim: usize,
    pub action_low: Vec<f64>,
    pub action_high: Vec<f64>,
    pub hidden: Vec<usize>,
    pub parameters: usize,
    pub updates: u64,
    pub alpha: f64,
}

pub fn inspect_checkpoint(path: &Path) -> Result<CheckpointInfo, HarnessError> {
    let (controller, agents) = load_agents(path)?;
    let agents = agents
        .iter()
        .map(|a| AgentInfo {
            state_dim: a.state_dim(),
            action_low: a.span().low.clone(),
            action_high: a.span().high.clone(),
            hidden: a.config().hidden.clone(),
            parameters: a.value_net().num_params()
                + a.target_net().num_params()
                + a.q_nets().iter().map(|q| q.num_params()).sum::<usize>()
                + a.policy_net().num_params(),
            updates: a.updates(),
            alpha: a.alpha(),
        })
        .collect();
    Ok(CheckpointInfo { controller, agents })
}

fn put_opt_f64(e: &mut Encoder, v: Option<f64>) {
    e.u8(v.is_some() as u8);
    e.f64(v.unwrap_or(0.0));
}

fn get_opt_f64(d: &mut Decoder) -> Result<Option<f64>, RlError> {
    let some = d.u8()? != 0;
    let v = d.f64()?;
    Ok(some.then_some(v))
}

fn put_loss(e: &mut Encoder, l: &LossReport) {
    e.f64s(&[l.value, l.q, l.policy, l.alpha, l.alpha_value, l.entropy]);
}

fn get_loss(d: &mut Decoder) -> Result<LossReport, RlError> {
    let v = d.f64s(6)?;
    Ok(LossReport { value: v[0], q: v[1], policy: v[2], alpha: v[3], alpha_value: v[4], entropy: v[5] })
}

fn put_windows(e: &mut Encoder, w: &RewardWindows) {
    let n = w.reward_sum.len();
    e.u64(w.window);
    e.u32(n as u32);
    for k in 0..n {
        e.f64(w.reward_sum[k]);
        e.u64(w.reward_count[k]);
        put_loss(e, &w.loss_sum[k]);
        e.u64(w.loss_count[k]);
    }
    e.u64(w.rows.len() as u64);
    for r in &w.rows {
        e.u64(r.end_step);
        for k in 0..n {
            put_opt_f64(e, r.mean_reward[k]);
            e.u64(r.experiences[k]);
            e.u8(r.mean_loss[k].is_some() as u8);
            put_loss(e, &r.mean_loss[k].unwrap_or_default());
        }
    }
}

fn get_windows(d: &mut Decoder) -> Result<RewardWindows, RlError> {
    let window = d.u64()?;
    let n = d.u32()? as usize;
    let mut w = RewardWindows::new(n, window.max(1));
    for k in 0..n {
        w.reward_sum[k] = d.f64()?;
        w.reward_count[k] = d.u64()?;
        w.loss_sum[k] = get_loss(d)?;
        w.loss_count[k] = d.u64()?;
    }
    let rows = d.usize()?;
    for _ in 0..rows {
        let end_step = d.u64()?;
        let (mut mean_reward, mut experiences, mut mean_loss) = (Vec::new(), Vec::new(), Vec::new());
        for _ in 0..n {
            mean_reward.push(get_opt_f64(d)?);
            experiences.push(d.u64()?);
            let some = d.u8()? != 0;
            let l = get_loss(d)?;
            mean_loss.push(some.then_some(l));
        }
        w.rows.push(WindowRow { end_step, mean_reward, experiences, mean_loss });
    }
    Ok(w)
}

/// Everything needed to continue training after `epochs_done` epochs.
pub struct TrainState {
    pub kind: ControllerKind,
    pub config_toml: String,
    pub epochs_done: u32,
    pub learner: Learner,
    pub epoch_rows: Vec<EpochRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRow {
    pub epoch: u32,
    pub env_steps: u64,
    pub collisions: u64,
    pub departed: u64,
    pub t_cross: Option<f64>,
}

pub fn encode_train_state(s: &TrainState) -> Vec<u8> {
    let mut e = header(TRAIN_STATE_MAGIC, TRAIN_STATE_VERSION);
    put_kind(&mut e, s.kind);
    e.bytes(s.config_toml.as_bytes());
    e.u32(s.epochs_done);
    let l = &s.learner;
    e.u64(l.env_steps);
    e.u64(l.update_every);
    e.u32(l.agents.len() as u32);
    for k in 0..l.agents.len() {
        encode_agent(&mut e, &l.agents[k]);
        encode_memory(&mut e, &l.memories[k]);
        e.u64(l.decisions[k]);
    }
    put_windows(&mut e, &l.progress);
    e.u64(s.epoch_rows.len() as u64);
    for r in &s.epoch_rows {
        e.u32(r.epoch);
        e.u64(r.env_steps);
        e.u64(r.collisions);
        e.u64(r.departed);
        put_opt_f64(&mut e, r.t_cross);
    }
    e.finish()
}

pub fn decode_train_state(bytes: &[u8]) -> Result<TrainState, RlError> {
    let mut d = Decoder::open(bytes, TRAIN_STATE_MAGIC, TRAIN_STATE_VERSION)?;
    let kind = get_kind(&mut d)?;
    let config_toml =
        String::from_utf8(d.bytes()?.to_vec()).map_err(|_| RlError::Checkpoint("config is not UTF-8".into()))?;
    let epochs_done = d.u32()?;
    let env_steps = d.u64()?;
    let update_every = d.u64()?;
    let n = d.u32()? as usize;
    let (mut agents, mut memories, mut decisions) = (Vec::new(), Vec::new(), Vec::new());
    for _ in 0..n {
        agents.push(decode_agent(&mut d)?);
        memories.push(decode_memory(&mut d)?);
        decisions.push(d.u64()?);
    }
    let progress = get_windows(&mut d)?;
    let rows = d.usize()?;
    let mut epoch_rows = Vec::with_capacity(rows.min(1 << 16));
    for _ in 0..rows {
        epoch_rows.push(EpochRow {
            epoch: d.u32()?,
            env_steps: d.u64()?,
            collisions: d.u64()?,
            departed: d.u64()?,
            t_cross: get_opt_f64(&mut d)?,
        });
    }
    d.finish()?;
    let mut learner = Learner::new(agents, update_every.max(1), progress.window);
    learner.memories = memories;
    learner.decisions = decisions;
    learner.env_steps = env_steps;
    learner.progress = progress;
    Ok(TrainState { kind, config_toml, epochs_done, learner, epoch_rows })
}

/// Build the controller for `cfg.controller`; learned controllers drive
/// the given learner.
pub fn make_controller<'a>(
    cfg: &ScenarioConfig,
    world: &World,
    learner: Option<&'a mut Learner>,
    mode: Mode,
) -> Result<Box<dyn Controller + 'a>, HarnessError> {
    let n = world.intersection().connections.len();
    let need = || HarnessError::Other(format!("controller `{}` needs trained agents", cfg.controller));
    Ok(match cfg.controller {
        ControllerKind::Harl => {
            Box::new(HarlController::new(&cfg.harl, &cfg.reservation, n, learner.ok_or_else(need)?, mode))
        }
        ControllerKind::FlatSac => {
            Box::new(FlatSacController::new(&cfg.harl, &cfg.reservation, n, learner.ok_or_else(need)?, mode))
        }
        ControllerKind::FixedTime => Box::new(FixedTimeController::new(world, &cfg.baselines)),
        ControllerKind::Lqf => Box::new(LqfController::new(world, &cfg.baselines)),
        ControllerKind::FcfsVtl => Box::new(FcfsController::vtl(world, &cfg.baselines)),
        ControllerKind::FcfsPlatoon => Box::new(FcfsController::platoon(world, &cfg.baselines)),
    })
}

/// Result of one evaluation run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub metrics: RunMetrics,
    pub row: MetricsRow,
    pub log: EpisodeLog,
}

impl RunOutput {
    pub fn events(&self) -> &[Event] {
        &self.log.events
    }
}

/// One evaluation run of `cfg.controller` for `cfg.duration` seconds on a
/// world seeded with `cfg.seed`. Learned controllers need `agents`.
pub fn evaluate(cfg: &ScenarioConfig, agents: Option<Vec<SacAgent>>) -> Result<RunOutput, HarnessError> {
    cfg.validate()?;
    let ix = intersection(cfg)?;
    let mut world = World::new(ix, cfg.world_config(cfg.seed));
    let mut learner = match (cfg.controller.is_learned(), agents) {
        (false, _) => None,
        (true, Some(a)) => {
            check_agents(cfg, cfg.controller, &a)?;
            Some(Learner::new(a, 1, u64::MAX))
        }
        (true, None) => {
            return Err(HarnessError::MissingCheckpoint(format!("no agents given for `{}`", cfg.controller)))
        }
    };
    let start = Instant::now();
    let log = {
        let mut ctl = make_controller(cfg, &world, learner.as_mut(), Mode::Eval)?;
        run_episode(&mut world, ctl.as_mut(), cfg.duration)?
    };
    let mut metrics = compute_metrics(&log.events, log.duration)?;
    metrics.wall_time = start.elapsed().as_secs_f64();
    let row = MetricsRow::new(cfg.controller.as_str(), cfg.flow, cfg.hv_fraction, cfg.seed, &metrics);
    Ok(RunOutput { metrics, row, log })
}

/// Agents must match the state layout and spans the scenario implies.
fn check_agents(cfg: &ScenarioConfig, kind: ControllerKind, agents: &[SacAgent]) -> Result<(), HarnessError> {
    let fresh = new_agents(cfg, kind, 0)?;
    if fresh.len() != agents.len() {
        return Err(HarnessError::Other(format!(
            "`{kind}` needs {} agents, checkpoint has {}",
            fresh.len(),
            agents.len()
        )));
    }
    for (k, (f, a)) in fresh.iter().zip(agents).enumerate() {
        if f.state_dim() != a.state_dim() || f.span() != a.span() {
            return Err(HarnessError::Other(format!(
                "agent {} expects state dim {} and span {:?}..{:?}, checkpoint has {} and {:?}..{:?}",
                k + 1,
                f.state_dim(),
                f.span().low,
                f.span().high,
                a.state_dim(),
                a.span().low,
                a.span().high
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Default)]
pub struct TrainOptions {
    /// Stop (after saving state) once this many epochs are complete.
    pub stop_after: Option<u32>,
    /// Suppress per-epoch lines on stderr.
    pub quiet: bool,
}

#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub epochs_done: u32,
    pub env_steps: u64,
    pub resumed_from: Option<u32>,
    pub final_checkpoint: Option<PathBuf>,
    pub progress: Vec<WindowRow>,
    pub epochs: Vec<EpochRow>,
}

pub fn checkpoint_name(epoch: u32) -> String {
    format!("epoch_{epoch:03}.ckpt")
}

/// Train `cfg.controller` into `out`, resuming from `out/train_state.bin`
/// when present.
pub fn train(cfg: &ScenarioConfig, out: &Path, opts: &TrainOptions) -> Result<TrainSummary, HarnessError> {
    cfg.validate()?;
    let kind = cfg.controller;
    if !kind.is_learned() {
        return Err(HarnessError::Other(format!("controller `{kind}` is not trainable")));
    }
    std::fs::create_dir_all(out)?;
    let config_toml = cfg.to_toml();
    let state_path = out.join("train_state.bin");
    let mut state = if state_path.exists() {
        let s = decode_train_state(&std::fs::read(&state_path)?)?;
        if s.config_toml != config_toml || s.kind != kind {
            return Err(HarnessError::Other(format!(
                "{} was written for a different configuration",
                state_path.display()
            )));
        }
        s
    } else {
        let agents = new_agents(cfg, kind, cfg.seed)?;
        let learner = Learner::new(agents, cfg.harl.update_every, cfg.harl.reward_window);
        TrainState { kind, config_toml: config_toml.clone(), epochs_done: 0, learner, epoch_rows: Vec::new() }
    };
    std::fs::write(out.join("config.toml"), &config_toml)?;
    let resumed_from = (state.epochs_done > 0).then_some(state.epochs_done);
    let ix = intersection(cfg)?;
    let total = cfg.training.epochs;
    let mut final_checkpoint = None;

    while state.epochs_done < total {
        if opts.stop_after.is_some_and(|n| state.epochs_done >= n) {
            break;
        }
        let epoch = state.epochs_done;
        let mut world = World::new(ix.clone(), cfg.world_config(epoch_seed(cfg.seed, epoch)));
        state.learner.reseed(mix_seed(cfg.seed), epoch as u64 + 1);
        let log = {
            let mut ctl = make_controller(cfg, &world, Some(&mut state.learner), Mode::Train)?;
            run_episode(&mut world, ctl.as_mut(), cfg.training.episode_duration)?
        };
        let m = compute_metrics(&log.events, log.duration)?;
        state.epochs_done += 1;
        state.epoch_rows.push(EpochRow {
            epoch: state.epochs_done,
            env_steps: state.learner.env_steps,
            collisions: m.collisions,
            departed: m.vehicle_count,
            t_cross: m.t_cross,
        });
        if !opts.quiet {
            eprintln!(
                "epoch {}/{}: steps {} collisions {} departed {}",
                state.epochs_done, total, state.learner.env_steps, m.collisions, m.vehicle_count
            );
        }
        let last = state.epochs_done == total;
        let stopping = opts.stop_after.is_some_and(|n| state.epochs_done >= n);
        if state.epochs_done % cfg.training.checkpoint_every == 0 || last {
            let bytes = encode_agents(kind, &state.learner.agents);
            std::fs::write(out.join(checkpoint_name(state.epochs_done)), &bytes)?;
            if last {
                let p = out.join("final.ckpt");
                std::fs::write(&p, &bytes)?;
                final_checkpoint = Some(p);
            }
        }
        if state.epochs_done % cfg.training.checkpoint_every == 0 || last || stopping {
            std::fs::write(&state_path, encode_train_state(&state))?;
            write_progress(out, &state)?;
        }
    }
    if state.epochs_done == total && final_checkpoint.is_none() {
        let p = out.join("final.ckpt");
        if p.exists() {
            final_checkpoint = Some(p);
        }
    }
    Ok(TrainSummary {
        epochs_done: state.epochs_done,
        env_steps: state.learner.env_steps,
        resumed_from,
        final_checkpoint,
        progress: state.learner.progress.rows.clone(),
        epochs: state.epoch_rows.clone(),
    })
}

#[derive(Serialize)]
struct ProgressLine {
    end_step: u64,
    agent: usize,
    mean_reward: Option<f64>,
    experiences: u64,
    value_loss: Option<f64>,
    q_loss: Option<f64>,
    policy_loss: Option<f64>,
    alpha: Option<f64>,
    entropy: Option<f64>,
}

fn write_progress(out: &Path, s: &TrainState) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(out.join("progress.csv"))?;
    for r in &s.learner.progress.rows {
        for k in 0..r.mean_reward.len() {
            let l = r.mean_loss[k].as_ref();
            w.serialize(ProgressLine {
                end_step: r.end_step,
                agent: k + 1,
                mean_reward: r.mean_reward[k],
                experiences: r.experiences[k],
                value_loss: l.map(|l| l.value),
                q_loss: l.map(|l| l.q),
                policy_loss: l.map(|l| l.policy),
                alpha: l.map(|l| l.alpha_value),
                entropy: l.map(|l| l.entropy),
            })?;
        }
    }
    w.flush()?;
    let mut w = csv::Writer::from_path(out.join("epochs.csv"))?;
    for r in &s.epoch_rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Whether mean reward in the last quarter of the windows exceeds the first
/// quarter, per agent. Windows without experiences are skipped.
pub fn reward_improvement(rows: &[WindowRow], agent: usize) -> Option<(f64, f64)> {
    let vals: Vec<f64> = rows.iter().filter_map(|r| r.mean_reward.get(agent).copied().flatten()).collect();
    let q = vals.len() / 4;
    if q == 0 {
        return None;
    }
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    Some((mean(&vals[..q]), mean(&vals[vals.len() - q..])))
}

#[derive(Debug, Clone)]
pub struct SweepPlan {
    pub controllers: Vec<ControllerKind>,
    pub flows: Vec<f64>,
    pub seeds: Vec<u64>,
    /// Checkpoints for learned controllers; missing ones are trained into
    /// `out/train/<controller>` first.
    pub checkpoints: Vec<(ControllerKind, PathBuf)>,
}

/// Threads for parallel cells: `AIM_HARL_THREADS` when set, else all cores.
pub fn sweep_threads() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Evaluate every (controller, flow, seed) cell. Rows come back sorted by
/// controller, flow and seed regardless of scheduling.
pub fn sweep(
    base: &ScenarioConfig,
    plan: &SweepPlan,
    out: &Path,
    threads: usize,
) -> Result<Vec<MetricsRow>, HarnessError> {
    base.validate()?;
    let mut agents: Vec<(ControllerKind, Vec<SacAgent>)> = Vec::new();
    for &k in plan.controllers.iter().filter(|k| k.is_learned()) {
        let path = match plan.checkpoints.iter().find(|(c, _)| *c == k) {
            Some((_, p)) => p.clone(),
            None => {
                let cfg = ScenarioConfig { controller: k, ..base.clone() };
                let dir = out.join("train").join(k.as_str());
                train(&cfg, &dir, &TrainOptions { quiet: true, ..TrainOptions::default() })?;
                dir.join("final.ckpt")
            }
        };
        let (kind, a) = load_agents(&path)?;
        if kind != k {
            return Err(HarnessError::Other(format!("{} holds `{kind}` agents, not `{k}`", path.display())));
        }
        agents.push((k, a));
    }
    let mut cells = Vec::new();
    for &c in &plan.controllers {
        for &f in &plan.flows {
            for &s in &plan.seeds {
                cells.push((c, f, s));
            }
        }
    }
    let run = |&(c, flow, seed): &(ControllerKind, f64, u64)| {
        let cfg = ScenarioConfig { controller: c, flow, seed, ..base.clone() };
        let a = agents.iter().find(|(k, _)| *k == c).map(|(_, a)| a.clone());
        evaluate(&cfg, a).map(|o| o.row)
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| HarnessError::Other(e.to_string()))?;
    let mut rows: Vec<MetricsRow> = pool.install(|| {
        use rayon::prelude::*;
        cells.par_iter().map(run).collect::<Result<Vec<_>, _>>()
    })?;
    let order = |name: &str| ControllerKind::ALL.iter().position(|k| k.as_str() == name);
    rows.sort_by(|a, b| {
        order(&a.controller).cmp(&order(&b.controller)).then(a.flow.total_cmp(&b.flow)).then(a.seed.cmp(&b.seed))
    });
    Ok(rows)
}
