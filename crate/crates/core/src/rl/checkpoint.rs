//! Binary agent checkpoints.
//!
//! Layout (all integers and reals little-endian):
//!
//! ```text
//! magic       8 bytes  "HARLCKPT"
//! version     u32      CHECKPOINT_VERSION
//! config      u32 n_hidden, u64 hidden[n_hidden], f64 gamma, f64 tau, f64 lr,
//!             u64 batch_size, u64 replay_capacity, f64 init_alpha, u8 auto_alpha,
//!             u8 has_target_entropy, f64 target_entropy, u8 twin_q, u64 warmup
//! span        u64 state_dim, u32 action_dim, f64 low[action_dim], f64 high[action_dim]
//! networks    value, target, q[1 or 2], policy; each: u32 n, u64 sizes[n], f64 params[..]
//! optimizers  value, q[..], policy, temperature; each: f64 lr, beta1, beta2, eps,
//!             u64 t, u64 n, f64 m[n], f64 v[n]
//! tail        f64 log_alpha, u64 updates
//! checksum    u64 FNV-1a over every preceding byte
//! ```

use super::adam::Adam;
use super::mlp::Mlp;
use super::policy::ActionSpan;
use super::replay::{Experience, ReplayMemory};
use super::sac::{SacAgent, SacConfig};
use super::SparseVec;
use crate::error::RlError;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"HARLCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

#[derive(Debug, Default)]
pub struct Encoder {
    buf: Vec<u8>,
}

impl Encoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f32(&mut self, v: f32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f64s(&mut self, v: &[f64]) {
        for &x in v {
            self.f64(x);
        }
    }

    pub fn bytes(&mut self, b: &[u8]) {
        self.u64(b.len() as u64);
        self.buf.extend_from_slice(b);
    }

    /// Append the checksum and return the buffer.
    pub fn finish(mut self) -> Vec<u8> {
        let sum = fnv1a(&self.buf);
        self.u64(sum);
        self.buf
    }
}

pub struct Decoder<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Decoder<'a> {
    /// Verify the trailing checksum and position after the header.
    pub fn open(bytes: &'a [u8], magic: &[u8; 8], version: u32) -> Result<Self, RlError> {
        if bytes.len() < 8 + 4 + 8 {
            return Err(RlError::Checkpoint(format!("truncated: {} bytes", bytes.len())));
        }
        if &bytes[..8] != magic {
            return Err(RlError::Checkpoint("bad magic".into()));
        }
        let found = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if found != version {
            return Err(RlError::Checkpoint(format!("unsupported version {found}, expected {version}")));
        }
        let (body, sum) = bytes.split_at(bytes.len() - 8);
        if fnv1a(body) != u64::from_le_bytes(sum.try_into().unwrap()) {
            return Err(RlError::Checkpoint("checksum mismatch (truncated or corrupted)".into()));
        }
        Ok(Self { buf: body, pos: 12 })
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], RlError> {
        if self.pos + n > self.buf.len() {
            return Err(RlError::Checkpoint(format!("unexpected end of data at byte {}", self.pos)));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn u8(&mut self) -> Result<u8, RlError> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32, RlError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64, RlError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn usize(&mut self) -> Result<usize, RlError> {
        let v = self.u64()?;
        usize::try_from(v).map_err(|_| RlError::Checkpoint(format!("length {v} out of range")))
    }

    pub fn f32(&mut self) -> Result<f32, RlError> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn f64(&mut self) -> Result<f64, RlError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn f64s(&mut self, n: usize) -> Result<Vec<f64>, RlError> {
        if n > (self.buf.len() - self.pos) / 8 {
            return Err(RlError::Checkpoint(format!("array of {n} reals exceeds remaining data")));
        }
        (0..n).map(|_| self.f64()).collect()
    }

    pub fn bytes(&mut self) -> Result<&'a [u8], RlError> {
        let n = self.usize()?;
        self.take(n)
    }

    pub fn finish(self) -> Result<(), RlError> {
        if self.pos != self.buf.len() {
            return Err(RlError::Checkpoint(format!("{} trailing bytes", self.buf.len() - self.pos)));
        }
        Ok(())
    }
}

pub fn header(magic: &[u8; 8], version: u32) -> Encoder {
    let mut e = Encoder::new();
    e.buf.extend_from_slice(magic);
    e.u32(version);
    e
}

fn put_mlp(e: &mut Encoder, m: &Mlp) {
    e.u32(m.sizes().len() as u32);
    for &s in m.sizes() {
        e.u64(s as u64);
    }
    e.f64s(m.params());
}

fn get_mlp(d: &mut Decoder) -> Result<Mlp, RlError> {
    let n = d.u32()? as usize;
    if !(2..=64).contains(&n) {
        return Err(RlError::Checkpoint(format!("implausible layer count {n}")));
    }
    let sizes = (0..n).map(|_| d.usize()).collect::<Result<Vec<_>, _>>()?;
    let params = d.f64s(Mlp::param_count(&sizes))?;
    Mlp::from_params(&sizes, params).ok_or_else(|| RlError::Checkpoint("bad network shape".into()))
}

fn put_adam(e: &mut Encoder, a: &Adam) {
    e.f64(a.lr);
    e.f64(a.beta1);
    e.f64(a.beta2);
    e.f64(a.eps);
    e.u64(a.t);
    e.u64(a.m.len() as u64);
    e.f64s(&a.m);
    e.f64s(&a.v);
}

fn get_adam(d: &mut Decoder, expected: usize) -> Result<Adam, RlError> {
    let (lr, beta1, beta2, eps) = (d.f64()?, d.f64()?, d.f64()?, d.f64()?);
    let t = d.u64()?;
    let n = d.usize()?;
    if n != expected {
        return Err(RlError::Checkpoint(format!("optimizer holds {n} moments for {expected} parameters")));
    }
    let m = d.f64s(n)?;
    let v = d.f64s(n)?;
    Ok(Adam { lr, beta1, beta2, eps, m, v, t })
}

fn put_config(e: &mut Encoder, c: &SacConfig) {
    e.u32(c.hidden.len() as u32);
    for &h in &c.hidden {
        e.u64(h as u64);
    }
    e.f64(c.gamma);
    e.f64(c.tau);
    e.f64(c.lr);
    e.u64(c.batch_size as u64);
    e.u64(c.replay_capacity as u64);
    e.f64(c.init_alpha);
    e.u8(c.auto_alpha as u8);
    e.u8(c.target_entropy.is_some() as u8);
    e.f64(c.target_entropy.unwrap_or(0.0));
    e.u8(c.twin_q as u8);
    e.u64(c.warmup_decisions);
}

fn get_config(d: &mut Decoder) -> Result<SacConfig, RlError> {
    let n = d.u32()? as usize;
    if n > 64 {
        return Err(RlError::Checkpoint(format!("implausible hidden layer count {n}")));
    }
    let hidden = (0..n).map(|_| d.usize()).collect::<Result<Vec<_>, _>>()?;
    let gamma = d.f64()?;
    let tau = d.f64()?;
    let lr = d.f64()?;
    let batch_size = d.usize()?;
    let replay_capacity = d.usize()?;
    let init_alpha = d.f64()?;
    let auto_alpha = d.u8()? != 0;
    let has_te = d.u8()? != 0;
    let te = d.f64()?;
    let twin_q = d.u8()? != 0;
    let warmup_decisions = d.u64()?;
    Ok(SacConfig {
        hidden,
        gamma,
        tau,
        lr,
        batch_size,
        replay_capacity,
        init_alpha,
        auto_alpha,
        target_entropy: has_te.then_some(te),
        twin_q,
        warmup_decisions,
    })
}

pub fn encode_agent(e: &mut Encoder, a: &SacAgent) {
    put_config(e, &a.cfg);
    e.u64(a.state_dim as u64);
    e.u32(a.span.dim() as u32);
    e.f64s(&a.span.low);
    e.f64s(&a.span.high);
    put_mlp(e, &a.value);
    put_mlp(e, &a.target);
    for q in &a.q {
        put_mlp(e, q);
    }
    put_mlp(e, &a.policy);
    put_adam(e, &a.opt_value);
    for o in &a.opt_q {
        put_adam(e, o);
    }
    put_adam(e, &a.opt_policy);
    put_adam(e, &a.opt_alpha);
    e.f64(a.log_alpha);
    e.u64(a.updates);
}

pub fn decode_agent(d: &mut Decoder) -> Result<SacAgent, RlError> {
    let cfg = get_config(d)?;
    let state_dim = d.usize()?;
    let ad = d.u32()? as usize;
    let low = d.f64s(ad)?;
    let high = d.f64s(ad)?;
    if ad == 0 || !low.iter().zip(&high).all(|(l, h)| l < h) {
        return Err(RlError::Checkpoint("invalid action span".into()));
    }
    let span = ActionSpan::new(low, high);
    let value = get_mlp(d)?;
    let target = get_mlp(d)?;
    let nq = if cfg.twin_q { 2 } else { 1 };
    let q = (0..nq).map(|_| get_mlp(d)).collect::<Result<Vec<_>, _>>()?;
    let policy = get_mlp(d)?;
    let shape_ok = value.input_dim() == state_dim
        && value.output_dim() == 1
        && target.sizes() == value.sizes()
        && q.iter().all(|n| n.input_dim() == state_dim + ad && n.output_dim() == 1)
        && policy.input_dim() == state_dim
        && policy.output_dim() == 2 * ad;
    if !shape_ok {
        return Err(RlError::Checkpoint("network shapes disagree with the state/action dimensions".into()));
    }
    let opt_value = get_adam(d, value.num_params())?;
    let opt_q = q.iter().map(|n| get_adam(d, n.num_params())).collect::<Result<Vec<_>, _>>()?;
    let opt_policy = get_adam(d, policy.num_params())?;
    let opt_alpha = get_adam(d, 1)?;
    let log_alpha = d.f64()?;
    let updates = d.u64()?;
    Ok(SacAgent {
        cfg,
        state_dim,
        span,
        value,
        target,
        q,
        policy,
        opt_value,
        opt_q,
        opt_policy,
        log_alpha,
        opt_alpha,
        updates,
    })
}

pub fn save_checkpoint(a: &SacAgent) -> Vec<u8> {
    let mut e = header(CHECKPOINT_MAGIC, CHECKPOINT_VERSION);
    encode_agent(&mut e, a);
    e.finish()
}

pub fn load_checkpoint(bytes: &[u8]) -> Result<SacAgent, RlError> {
    let mut d = Decoder::open(bytes, CHECKPOINT_MAGIC, CHECKPOINT_VERSION)?;
    let a = decode_agent(&mut d)?;
    d.finish()?;
    Ok(a)
}

fn put_sparse(e: &mut Encoder, s: &SparseVec) {
    e.u32(s.idx.len() as u32);
    for &i in &s.idx {
        e.u32(i);
    }
    for &v in &s.val {
        e.f32(v);
    }
}

fn get_sparse(d: &mut Decoder, dim: usize) -> Result<SparseVec, RlError> {
    let n = d.u32()? as usize;
    if n > dim {
        return Err(RlError::Checkpoint(format!("sparse vector with {n} entries exceeds dim {dim}")));
    }
    let idx = (0..n).map(|_| d.u32()).collect::<Result<Vec<_>, _>>()?;
    if idx.iter().any(|&i| i as usize >= dim) || idx.windows(2).any(|w| w[0] >= w[1]) {
        return Err(RlError::Checkpoint("sparse indices out of order or range".into()));
    }
    let val = (0..n).map(|_| d.f32()).collect::<Result<Vec<_>, _>>()?;
    Ok(SparseVec { dim, idx, val })
}

pub fn encode_memory(e: &mut Encoder, m: &ReplayMemory) {
    e.u64(m.capacity() as u64);
    e.u64(m.state_dim() as u64);
    e.u64(m.action_dim() as u64);
    e.u64(m.len() as u64);
    for x in m.iter() {
        put_sparse(e, &x.state);
        e.f64s(&x.action);
        e.f64(x.reward);
        put_sparse(e, &x.next_state);
        e.u8(x.done as u8);
    }
}

pub fn decode_memory(d: &mut Decoder) -> Result<ReplayMemory, RlError> {
    let capacity = d.usize()?;
    let state_dim = d.usize()?;
    let action_dim = d.usize()?;
    let len = d.usize()?;
    if capacity == 0 || len > capacity {
        return Err(RlError::Checkpoint(format!("replay memory of {len} items exceeds capacity {capacity}")));
    }
    let mut m = ReplayMemory::new(capacity, state_dim, action_dim);
    for _ in 0..len {
        let state = get_sparse(d, state_dim)?;
        let action = d.f64s(action_dim)?;
        let reward = d.f64()?;
        let next_state = get_sparse(d, state_dim)?;
        let done = d.u8()? != 0;
        m.push(Experience { state, action, reward, next_state, done })?;
    }
    Ok(m)
}
