//! Soft actor-critic agent with a state-value network, its EMA target, twin
//! Q networks and a temperature tuned toward a target entropy.
//!
//! Objectives, averaged over a batch:
//!
//! * value: `0.5 (V(s) - [min Q(s, a~) - alpha log pi(a~|s)])^2`
//! * Q: `0.5 (Q_i(s, a) - [r + gamma (1 - done) V_target(s')])^2`
//! * policy: `alpha log pi(a~|s) - min Q(s, a~)` with `a~` reparameterized
//! * temperature: `-log_alpha (log pi(a~|s) + target_entropy)`

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::mlp::{Mlp, Scratch, Trace};
use super::policy::{log_prob_of, mean_action, squash_backward, squash_sample, ActionSpan};
use super::replay::{Experience, ReplayMemory};
use super::SparseVec;
use crate::error::RlError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SacConfig {
    pub hidden: Vec<usize>,
    pub gamma: f64,
    pub tau: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub replay_capacity: usize,
    pub init_alpha: f64,
    pub auto_alpha: bool,
    /// Defaults to minus the action dimension.
    pub target_entropy: Option<f64>,
    pub twin_q: bool,
    /// Decisions taken uniformly at random before the policy is used.
    pub warmup_decisions: u64,
}

impl Default for SacConfig {
    fn default() -> Self {
        Self {
            hidden: vec![256, 256],
            gamma: 0.99,
            tau: 0.005,
            lr: 3e-4,
            batch_size: 256,
            replay_capacity: 500_000,
            init_alpha: 0.2,
            auto_alpha: true,
            target_entropy: None,
            twin_q: true,
            warmup_decisions: 1000,
        }
    }
}

impl SacConfig {
    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        let bad = |f: &'static str, r: &str| Err((f, r.to_string()));
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return bad("hidden", "needs at least one non-empty hidden layer");
        }
        if !(self.gamma >= 0.0 && self.gamma < 1.0) {
            return bad("gamma", "must be in [0, 1)");
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return bad("tau", "must be in (0, 1]");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("lr", "must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size", "must be positive");
        }
        if self.replay_capacity < self.batch_size {
            return bad("replay_capacity", "must be at least batch_size");
        }
        if !(self.init_alpha > 0.0 && self.init_alpha.is_finite()) {
            return bad("init_alpha", "must be positive");
        }
        if self.target_entropy.is_some_and(|h| !h.is_finite()) {
            return bad("target_entropy", "must be finite");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub value: f64,
    pub q: f64,
    pub policy: f64,
    pub alpha: f64,
    pub alpha_value: f64,
    pub entropy: f64,
}

/// `0.5 * mean (V(s) - target)^2`, adding its parameter gradient into `grad`.
pub fn value_loss(v: &Mlp, states: &[&SparseVec], targets: &[f64], mut grad: Option<&mut [f64]>) -> f64 {
    let n = states.len() as f64;
    let (mut trace, mut scratch) = (Trace::default(), Scratch::default());
    let mut loss = 0.0;
    for (s, &y) in states.iter().zip(targets) {
        v.forward(s, &[], &mut trace);
        let err = trace.output()[0] - y;
        loss += 0.5 * err * err / n;
        if let Some(g) = grad.as_deref_mut() {
            v.backward(s, &[], &trace, &[err / n], Some(g), None, &mut scratch);
        }
    }
    loss
}

/// `0.5 * mean (Q(s, a) - target)^2`.
pub fn q_loss(
    q: &Mlp,
    states: &[&SparseVec],
    actions: &[&[f64]],
    targets: &[f64],
    mut grad: Option<&mut [f64]>,
) -> f64 {
    let n = states.len() as f64;
    let (mut trace, mut scratch) = (Trace::default(), Scratch::default());
    let mut loss = 0.0;
    for ((s, a), &y) in states.iter().zip(actions).zip(targets) {
        q.forward(s, a, &mut trace);
        let err = trace.output()[0] - y;
        loss += 0.5 * err * err / n;
        if let Some(g) = grad.as_deref_mut() {
            q.backward(s, a, &trace, &[err / n], Some(g), None, &mut scratch);
        }
    }
    loss
}

/// Per-sample quantities of a policy pass.
#[derive(Debug, Clone, Default)]
pub struct PolicyPass {
    pub loss: f64,
    pub log_probs: Vec<f64>,
    pub q_min: Vec<f64>,
}

/// `mean [alpha log pi(a~|s) - min_i Q_i(s, a~)]` with `a~` drawn from the
/// fixed `noise`. The gradient flows through the action into the policy
/// parameters only.
pub fn policy_loss(
    pi: &Mlp,
    qs: &[&Mlp],
    states: &[&SparseVec],
    noise: &[Vec<f64>],
    span: &ActionSpan,
    alpha: f64,
    mut grad: Option<&mut [f64]>,
) -> PolicyPass {
    let n = states.len() as f64;
    let d = span.dim();
    let mut pt = Trace::default();
    let mut qts = vec![Trace::default(); qs.len()];
    let mut scratch = Scratch::default();
    let mut out = PolicyPass::default();
    let mut d_out = vec![0.0; 2 * d];
    let mut d_action = vec![0.0; d];
    for (s, eps) in states.iter().zip(noise) {
        pi.forward(s, &[], &mut pt);
        let draw = squash_sample(pt.output(), eps, span);
        let mut best = (f64::INFINITY, 0);
        for (i, (q, qt)) in qs.iter().zip(&mut qts).enumerate() {
            q.forward(s, &draw.action, qt);
            if qt.output()[0] < best.0 {
                best = (qt.output()[0], i);
            }
        }
        out.loss += (alpha * draw.log_prob - best.0) / n;
        out.log_probs.push(draw.log_prob);
        out.q_min.push(best.0);
        if let Some(g) = grad.as_deref_mut() {
            let q = qs[best.1];
            q.backward(s, &draw.action, &qts[best.1], &[-1.0 / n], None, Some(&mut d_action), &mut scratch);
            squash_backward(&draw, span, &d_action, alpha / n, &mut d_out);
            pi.backward(s, &[], &pt, &d_out, Some(g), None, &mut scratch);
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct SacAgent {
    pub(crate) cfg: SacConfig,
    pub(crate) state_dim: usize,
    pub(crate) span: ActionSpan,
    pub(crate) value: Mlp,
    pub(crate) target: Mlp,
    pub(crate) q: Vec<Mlp>,
    pub(crate) policy: Mlp,
    pub(crate) opt_value: Adam,
    pub(crate) opt_q: Vec<Adam>,
    pub(crate) opt_policy: Adam,
    pub(crate) log_alpha: f64,
    pub(crate) opt_alpha: Adam,
    pub(crate) updates: u64,
}

impl SacAgent {
    pub fn new<R: Rng>(cfg: SacConfig, state_dim: usize, span: ActionSpan, rng: &mut R) -> Self {
        let d = span.dim();
        let sizes = |input: usize, output: usize| {
            let mut s = vec![input];
            s.extend(&cfg.hidden);
            s.push(output);
            s
        };
        let value = Mlp::new(&sizes(state_dim, 1), 1.0, rng);
        let target = value.clone();
        let nq = if cfg.twin_q { 2 } else { 1 };
        let q: Vec<Mlp> = (0..nq).map(|_| Mlp::new(&sizes(state_dim + d, 1), 1.0, rng)).collect();
        let policy = Mlp::new(&sizes(state_dim, 2 * d), 1e-2, rng);
        let lr = cfg.lr;
        Self {
            opt_value: Adam::new(value.num_params(), lr),
            opt_q: q.iter().map(|n| Adam::new(n.num_params(), lr)).collect(),
            opt_policy: Adam::new(policy.num_params(), lr),
            opt_alpha: Adam::new(1, lr),
            log_alpha: cfg.init_alpha.ln(),
            value,
            target,
            q,
            policy,
            state_dim,
            span,
            cfg,
            updates: 0,
        }
    }

    pub fn config(&self) -> &SacConfig {
        &self.cfg
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn span(&self) -> &ActionSpan {
        &self.span
    }

    pub fn action_dim(&self) -> usize {
        self.span.dim()
    }

    pub fn alpha(&self) -> f64 {
        self.log_alpha.exp()
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn value_net(&self) -> &Mlp {
        &self.value
    }

    pub fn target_net(&self) -> &Mlp {
        &self.target
    }

    pub fn q_nets(&self) -> &[Mlp] {
        &self.q
    }

    pub fn policy_net(&self) -> &Mlp {
        &self.policy
    }

    pub fn policy_net_mut(&mut self) -> &mut Mlp {
        &mut self.policy
    }

    pub fn value_net_mut(&mut self) -> &mut Mlp {
        &mut self.value
    }

    pub fn target_entropy(&self) -> f64 {
        self.cfg.target_entropy.unwrap_or(-(self.span.dim() as f64))
    }

    pub fn new_memory(&self) -> ReplayMemory {
        ReplayMemory::new(self.cfg.replay_capacity, self.state_dim, self.span.dim())
    }

    fn check_state(&self, s: &SparseVec) -> Result<(), RlError> {
        if s.dim != self.state_dim {
            return Err(RlError::DimMismatch { what: "state", expected: self.state_dim, got: s.dim });
        }
        s.check_finite()
    }

    /// Action and its log-density. Decision `t` below the warmup horizon
    /// draws uniformly from the span unless `deterministic`; deterministic
    /// mode returns the squashed mean.
    pub fn sample_action<R: Rng>(
        &self,
        s: &SparseVec,
        t: u64,
        rng: &mut R,
        deterministic: bool,
    ) -> Result<(Vec<f64>, f64), RlError> {
        self.check_state(s)?;
        if !deterministic && t < self.cfg.warmup_decisions {
            let a: Vec<f64> =
                (0..self.span.dim()).map(|k| rng.random_range(self.span.low[k]..=self.span.high[k])).collect();
            let lp = -(0..self.span.dim()).map(|k| (self.span.high[k] - self.span.low[k]).ln()).sum::<f64>();
            return Ok((a, lp));
        }
        let out = self.policy.eval(s, &[]);
        if deterministic {
            let a = mean_action(&out, &self.span);
            let lp = log_prob_of(&out, &a, &self.span);
            return Ok((a, lp));
        }
        let noise: Vec<f64> = (0..self.span.dim()).map(|_| rng.sample(StandardNormal)).collect();
        let draw = squash_sample(&out, &noise, &self.span);
        Ok((draw.action, draw.log_prob))
    }

    pub fn value_of(&self, s: &SparseVec) -> f64 {
        self.value.eval(s, &[])[0]
    }

    /// One gradient step on every objective from a fresh batch of `memory`.
    pub fn update<R: Rng>(&mut self, memory: &ReplayMemory, rng: &mut R) -> Result<LossReport, RlError> {
        let batch = memory.sample(self.cfg.batch_size, rng)?;
        let noise: Vec<Vec<f64>> =
            batch.iter().map(|_| (0..self.span.dim()).map(|_| rng.sample(StandardNormal)).collect()).collect();
        self.update_with(&batch, &noise)
    }

    /// Update from an explicit batch and policy noise.
    pub fn update_with(&mut self, batch: &[&Experience], noise: &[Vec<f64>]) -> Result<LossReport, RlError> {
        let alpha = self.alpha();
        let states: Vec<&SparseVec> = batch.iter().map(|e| &e.state).collect();
        let actions: Vec<&[f64]> = batch.iter().map(|e| e.action.as_slice()).collect();

        let mut g_pi = vec![0.0; self.policy.num_params()];
        let qs: Vec<&Mlp> = self.q.iter().collect();
        let pass = policy_loss(&self.policy, &qs, &states, noise, &self.span, alpha, Some(&mut g_pi));
        if !pass.loss.is_finite() {
            return Err(RlError::NonFiniteLoss("policy"));
        }

        let v_targets: Vec<f64> = pass.q_min.iter().zip(&pass.log_probs).map(|(q, lp)| q - alpha * lp).collect();
        let mut g_v = vec![0.0; self.value.num_params()];
        let lv = value_loss(&self.value, &states, &v_targets, Some(&mut g_v));
        if !lv.is_finite() {
            return Err(RlError::NonFiniteLoss("value"));
        }

        let mut trace = Trace::default();
        let q_targets: Vec<f64> = batch
            .iter()
            .map(|e| {
                if e.done {
                    e.reward
                } else {
                    self.target.forward(&e.next_state, &[], &mut trace);
                    e.reward + self.cfg.gamma * trace.output()[0]
                }
            })
            .collect();
        let mut g_q: Vec<Vec<f64>> = Vec::with_capacity(self.q.len());
        let mut lq = 0.0;
        for q in &self.q {
            let mut g = vec![0.0; q.num_params()];
            lq += q_loss(q, &states, &actions, &q_targets, Some(&mut g));
            g_q.push(g);
        }
        if !lq.is_finite() {
            return Err(RlError::NonFiniteLoss("q"));
        }

        let n = batch.len() as f64;
        let mean_lp = pass.log_probs.iter().sum::<f64>() / n;
        let h_target = self.target_entropy();
        let alpha_loss = -self.log_alpha * (mean_lp + h_target);

        self.opt_policy.step(self.policy.params_mut(), &g_pi);
        self.opt_value.step(self.value.params_mut(), &g_v);
        for ((q, opt), g) in self.q.iter_mut().zip(&mut self.opt_q).zip(&g_q) {
            opt.step(q.params_mut(), g);
        }
        if self.cfg.auto_alpha {
            let mut la = [self.log_alpha];
            self.opt_alpha.step(&mut la, &[-(mean_lp + h_target)]);
            self.log_alpha = la[0];
        }
        self.target.soft_update(&self.value, self.cfg.tau);
        self.updates += 1;
        Ok(LossReport {
            value: lv,
            q: lq / self.q.len() as f64,
            policy: pass.loss,
            alpha: alpha_loss,
            alpha_value: self.alpha(),
            entropy: -mean_lp,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn agent(cfg: SacConfig, state_dim: usize, span: ActionSpan) -> SacAgent {
        SacAgent::new(cfg, state_dim, span, &mut ChaCha8Rng::seed_from_u64(7))
    }

    fn small() -> SacConfig {
        SacConfig { hidden: vec![8], batch_size: 4, replay_capacity: 64, warmup_decisions: 0, ..Default::default() }
    }

    #[test]
    fn warmup_draws_uniformly_over_span() {
        let cfg = SacConfig { warmup_decisions: 1000, ..small() };
        let a = agent(cfg, 3, ActionSpan::scalar(0.0, 2.0));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = SparseVec::from_dense(&[0.1, 0.2, 0.3]);
        let draws: Vec<f64> =
            (0..20_000).map(|t| a.sample_action(&s, t % 1000, &mut rng, false).unwrap().0[0]).collect();
        assert!(draws.iter().all(|&x| (0.0..=2.0).contains(&x)));
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        let below_half = draws.iter().filter(|&&x| x < 0.5).count() as f64 / draws.len() as f64;
        assert!((mean - 1.0).abs() < 0.02, "{mean}");
        assert!((below_half - 0.25).abs() < 0.01, "{below_half}");
    }

    #[test]
    fn zero_policy_acts_at_midpoint() {
        let mut a = agent(small(), 3, ActionSpan::scalar(-0.55, 0.4));
        a.policy = Mlp::zeros(a.policy.sizes());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for x in [[0.0, 0.0, 0.0], [1.0, -3.0, 2.5]] {
            let (act, _) = a.sample_action(&SparseVec::from_dense(&x), 5000, &mut rng, true).unwrap();
            assert!((act[0] - (-0.075)).abs() < 1e-12);
        }
    }

    #[test]
    fn non_finite_state_is_rejected() {
        let a = agent(small(), 2, ActionSpan::scalar(0.0, 2.0));
        let s = SparseVec::from_dense(&[1.0, f64::NAN]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(matches!(a.sample_action(&s, 0, &mut rng, false), Err(RlError::NonFiniteState(1))));
    }

    #[test]
    fn terminal_batch_regresses_q_onto_reward() {
        let a = agent(small(), 2, ActionSpan::scalar(0.0, 2.0));
        let exps: Vec<Experience> = (0..4)
            .map(|k| Experience {
                state: SparseVec::from_dense(&[k as f64, 1.0]),
                action: vec![1.0],
                reward: k as f64 * 3.0,
                next_state: SparseVec::from_dense(&[100.0, 100.0]),
                done: true,
            })
            .collect();
        // Q target with no bootstrap is the reward itself.
        let states: Vec<&SparseVec> = exps.iter().map(|e| &e.state).collect();
        let actions: Vec<&[f64]> = exps.iter().map(|e| e.action.as_slice()).collect();
        let rewards: Vec<f64> = exps.iter().map(|e| e.reward).collect();
        let expected =
            q_loss(&a.q[0], &states, &actions, &rewards, None) + q_loss(&a.q[1], &states, &actions, &rewards, None);
        let mut a2 = a.clone();
        let refs: Vec<&Experience> = exps.iter().collect();
        let noise = vec![vec![0.0]; 4];
        let report = a2.update_with(&refs, &noise).unwrap();
        assert!((report.q - expected / 2.0).abs() < 1e-12);
    }

    #[test]
    fn unit_tau_copies_value_into_target() {
        let cfg = SacConfig { tau: 1.0, ..small() };
        let mut a = agent(cfg, 2, ActionSpan::scalar(0.0, 2.0));
        let mut mem = a.new_memory();
        for k in 0..8 {
            mem.push(Experience {
                state: SparseVec::from_dense(&[k as f64 * 0.1, 1.0]),
                action: vec![0.5],
                reward: 1.0,
                next_state: SparseVec::from_dense(&[0.3, 0.2]),
                done: false,
            })
            .unwrap();
        }
        a.update(&mem, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a.target, a.value);
    }

    #[test]
    fn ema_distance_never_grows() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let v = Mlp::new(&[3, 5, 1], 1.0, &mut rng);
        let mut t = Mlp::new(&[3, 5, 1], 1.0, &mut rng);
        let mut last = t.distance(&v);
        for _ in 0..200 {
            t.soft_update(&v, 0.05);
            let d = t.distance(&v);
            assert!(d <= last);
            last = d;
        }
    }

    #[test]
    fn temperature_rises_when_entropy_is_below_target() {
        let mut a = agent(SacConfig { target_entropy: Some(5.0), ..small() }, 2, ActionSpan::scalar(0.0, 2.0));
        let before = a.alpha();
        let e = Experience {
            state: SparseVec::from_dense(&[0.5, 0.5]),
            action: vec![1.0],
            reward: 0.0,
            next_state: SparseVec::from_dense(&[0.5, 0.5]),
            done: false,
        };
        let refs = vec![&e; 4];
        a.update_with(&refs, &vec![vec![0.1]; 4]).unwrap();
        assert!(a.alpha() > before);
    }
}
