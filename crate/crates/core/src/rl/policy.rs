//! Tanh-squashed Gaussian rescaled onto a box of actions.
//!
//! The policy network emits `[mean; log_std]` per action dimension. The
//! log-std is clipped to `[LOG_STD_MIN, LOG_STD_MAX]` and the action is
//! `mid + half * tanh(mean + std * eps)`.

use serde::{Deserialize, Serialize};

pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;
const SQUASH_EPS: f64 = 1e-6;
const HALF_LN_2PI: f64 = 0.918_938_533_204_672_7;

/// Per-dimension action bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionSpan {
    pub low: Vec<f64>,
    pub high: Vec<f64>,
}

impl ActionSpan {
    pub fn new(low: Vec<f64>, high: Vec<f64>) -> Self {
        assert_eq!(low.len(), high.len());
        assert!(low.iter().zip(&high).all(|(l, h)| l < h), "empty action span");
        Self { low, high }
    }

    pub fn scalar(low: f64, high: f64) -> Self {
        Self::new(vec![low], vec![high])
    }

    pub fn dim(&self) -> usize {
        self.low.len()
    }

    pub fn mid(&self, k: usize) -> f64 {
        0.5 * (self.low[k] + self.high[k])
    }

    pub fn half(&self, k: usize) -> f64 {
        0.5 * (self.high[k] - self.low[k])
    }

    pub fn contains(&self, a: &[f64]) -> bool {
        a.len() == self.dim() && a.iter().enumerate().all(|(k, &x)| x >= self.low[k] && x <= self.high[k])
    }
}

/// Clipped log-std and its derivative with respect to the raw output.
fn bounded_log_std(raw: f64) -> (f64, f64) {
    if raw < LOG_STD_MIN {
        (LOG_STD_MIN, 0.0)
    } else if raw > LOG_STD_MAX {
        (LOG_STD_MAX, 0.0)
    } else {
        (raw, 1.0)
    }
}

/// One reparameterized draw with everything the backward pass needs.
#[derive(Debug, Clone, PartialEq)]
pub struct SquashedSample {
    pub action: Vec<f64>,
    pub log_prob: f64,
    noise: Vec<f64>,
    std: Vec<f64>,
    squashed: Vec<f64>,
    dlogstd_draw: Vec<f64>,
}

/// Draw `mid + half * tanh(mean + std * noise)` from the network output
/// `[mean; raw_log_std]`.
pub fn squash_sample(out: &[f64], noise: &[f64], span: &ActionSpan) -> SquashedSample {
    let d = span.dim();
    debug_assert_eq!(out.len(), 2 * d);
    let mut s = SquashedSample {
        action: Vec::with_capacity(d),
        log_prob: 0.0,
        noise: noise.to_vec(),
        std: Vec::with_capacity(d),
        squashed: Vec::with_capacity(d),
        dlogstd_draw: Vec::with_capacity(d),
    };
    for k in 0..d {
        let (log_std, dls) = bounded_log_std(out[d + k]);
        let std = log_std.exp();
        let u = out[k] + std * noise[k];
        let t = u.tanh();
        let a = (span.mid(k) + span.half(k) * t).clamp(span.low[k], span.high[k]);
        s.log_prob +=
            -0.5 * noise[k] * noise[k] - log_std - HALF_LN_2PI - (1.0 - t * t + SQUASH_EPS).ln() - span.half(k).ln();
        s.action.push(a);
        s.std.push(std);
        s.squashed.push(t);
        s.dlogstd_draw.push(dls);
    }
    s
}

/// Noise-free action `mid + half * tanh(mean)`.
pub fn mean_action(out: &[f64], span: &ActionSpan) -> Vec<f64> {
    (0..span.dim()).map(|k| span.mid(k) + span.half(k) * out[k].tanh()).collect()
}

/// Log-density of action `a` under the network output, by change of
/// variables through the squash.
pub fn log_prob_of(out: &[f64], a: &[f64], span: &ActionSpan) -> f64 {
    let d = span.dim();
    let mut lp = 0.0;
    for k in 0..d {
        let (log_std, _) = bounded_log_std(out[d + k]);
        let t = ((a[k] - span.mid(k)) / span.half(k)).clamp(-1.0 + 1e-12, 1.0 - 1e-12);
        let u = t.atanh();
        let z = (u - out[k]) / log_std.exp();
        lp += -0.5 * z * z - log_std - HALF_LN_2PI - (1.0 - t * t).ln() - span.half(k).ln();
    }
    lp
}

/// Chain `dL/daction` and `dL/dlog_prob` back to `dL/d[mean; raw_log_std]`
/// with the noise held fixed.
pub fn squash_backward(s: &SquashedSample, span: &ActionSpan, d_action: &[f64], d_logp: f64, d_out: &mut [f64]) {
    let d = span.dim();
    for k in 0..d {
        let t = s.squashed[k];
        let one_m = 1.0 - t * t;
        let du = d_action[k] * span.half(k) * one_m + d_logp * 2.0 * t * one_m / (one_m + SQUASH_EPS);
        let dlogstd = du * s.std[k] * s.noise[k] - d_logp;
        d_out[k] = du;
        d_out[d + k] = dlogstd * s.dlogstd_draw[k];
    }
}
