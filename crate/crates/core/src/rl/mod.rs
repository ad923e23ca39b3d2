//! Soft actor-critic from scratch: small MLPs with hand-written backprop,
//! Adam, a tanh-squashed Gaussian policy, FIFO replay and the value, Q and
//! policy objectives with an EMA target and temperature tuning.

pub mod adam;
pub mod checkpoint;
pub mod mlp;
pub mod policy;
pub mod replay;
pub mod sac;

pub use adam::Adam;
pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_VERSION};
pub use mlp::Mlp;
pub use policy::{ActionSpan, SquashedSample};
pub use replay::{Experience, ReplayMemory};
pub use sac::{LossReport, SacAgent, SacConfig};

use crate::error::RlError;

/// Sparse state vector. Indices are strictly increasing and below `dim`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseVec {
    pub dim: usize,
    pub idx: Vec<u32>,
    pub val: Vec<f32>,
}

impl SparseVec {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, idx: Vec::new(), val: Vec::new() }
    }

    pub fn from_dense(x: &[f64]) -> Self {
        let mut out = Self::zeros(x.len());
        for (i, &v) in x.iter().enumerate() {
            if v != 0.0 {
                out.idx.push(i as u32);
                out.val.push(v as f32);
            }
        }
        out
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (&i, &v) in self.idx.iter().zip(&self.val) {
            out[i as usize] = v as f64;
        }
        out
    }

    pub fn nnz(&self) -> usize {
        self.idx.len()
    }

    /// Append a value at index `i`; indices must be pushed in increasing order.
    pub fn push(&mut self, i: usize, v: f64) {
        debug_assert!(i < self.dim);
        debug_assert!(self.idx.last().is_none_or(|&l| (l as usize) < i));
        if v != 0.0 {
            self.idx.push(i as u32);
            self.val.push(v as f32);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.idx.iter().zip(&self.val).map(|(&i, &v)| (i as usize, v as f64))
    }

    pub fn check_finite(&self) -> Result<(), RlError> {
        match self.val.iter().position(|v| !v.is_finite()) {
            None => Ok(()),
            Some(k) => Err(RlError::NonFiniteState(self.idx[k] as usize)),
        }
    }
}
