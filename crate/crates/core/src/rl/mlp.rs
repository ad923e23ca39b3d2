//! Fully connected network with tanh hidden layers and a linear output.
//!
//! Parameters live in one flat vector. Layer `l` stores its weights
//! input-major (`w[i * out + j]` connects input `i` to output `j`) followed
//! by its biases. The input is a sparse block followed by a dense tail, so a
//! Q network reads `[state, action]` without densifying the state.

use rand::Rng;

use super::SparseVec;

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    params: Vec<f64>,
}

/// Per-sample activations kept for the backward pass.
#[derive(Debug, Clone, Default)]
pub struct Trace {
    acts: Vec<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.acts.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Scratch buffers for backward passes.
#[derive(Debug, Clone, Default)]
pub struct Scratch {
    delta: Vec<f64>,
    next: Vec<f64>,
}

impl Mlp {
    pub fn param_count(sizes: &[usize]) -> usize {
        sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    pub fn zeros(sizes: &[usize]) -> Self {
        assert!(sizes.len() >= 2, "an MLP needs input and output widths");
        Self { sizes: sizes.to_vec(), params: vec![0.0; Self::param_count(sizes)] }
    }

    /// Uniform fan-in initialization; the output layer is scaled by `out_scale`.
    pub fn new<R: Rng>(sizes: &[usize], out_scale: f64, rng: &mut R) -> Self {
        let mut net = Self::zeros(sizes);
        let layers = net.layers();
        let mut off = 0;
        for (l, (fan_in, fan_out)) in layers.iter().copied().enumerate() {
            let mut bound = 1.0 / (fan_in as f64).sqrt();
            if l + 1 == layers.len() {
                bound *= out_scale;
            }
            for w in &mut net.params[off..off + fan_in * fan_out] {
                *w = rng.random_range(-bound..bound);
            }
            off += fan_in * fan_out + fan_out;
        }
        net
    }

    pub fn from_params(sizes: &[usize], params: Vec<f64>) -> Option<Self> {
        (sizes.len() >= 2 && params.len() == Self::param_count(sizes)).then(|| Self { sizes: sizes.to_vec(), params })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    fn layers(&self) -> Vec<(usize, usize)> {
        self.sizes.windows(2).map(|w| (w[0], w[1])).collect()
    }

    /// Forward pass over `[sparse, dense]`; the output is `trace.output()`.
    pub fn forward(&self, sparse: &SparseVec, dense: &[f64], trace: &mut Trace) {
        debug_assert_eq!(sparse.dim + dense.len(), self.sizes[0]);
        let n = self.sizes.len() - 1;
        trace.acts.resize_with(n, Vec::new);
        let mut off = 0;
        for l in 0..n {
            let (fan_in, fan_out) = (self.sizes[l], self.sizes[l + 1]);
            let w = &self.params[off..off + fan_in * fan_out];
            let b = &self.params[off + fan_in * fan_out..off + fan_in * fan_out + fan_out];
            let (prev, rest) = trace.acts.split_at_mut(l);
            let h = &mut rest[0];
            h.clear();
            h.extend_from_slice(b);
            if l == 0 {
                for (i, x) in sparse.iter() {
                    axpy(x, &w[i * fan_out..(i + 1) * fan_out], h);
                }
                for (k, &x) in dense.iter().enumerate() {
                    let i = sparse.dim + k;
                    axpy(x, &w[i * fan_out..(i + 1) * fan_out], h);
                }
            } else {
                for (i, &x) in prev[l - 1].iter().enumerate() {
                    if x != 0.0 {
                        axpy(x, &w[i * fan_out..(i + 1) * fan_out], h);
                    }
                }
            }
            if l + 1 < n {
                for v in h.iter_mut() {
                    *v = fast_tanh(*v);
                }
            }
            off += fan_in * fan_out + fan_out;
        }
    }

    /// Backpropagate `grad_out` (dL/d output) through a traced forward pass.
    /// Parameter gradients are added into `grad` when given; the gradient
    /// with respect to the dense input tail is written into `dense_grad`.
    pub fn backward(
        &self,
        sparse: &SparseVec,
        dense: &[f64],
        trace: &Trace,
        grad_out: &[f64],
        mut grad: Option<&mut [f64]>,
        dense_grad: Option<&mut [f64]>,
        scratch: &mut Scratch,
    ) {
        let n = self.sizes.len() - 1;
        let mut offsets = Vec::with_capacity(n);
        let mut off = 0;
        for l in 0..n {
            offsets.push(off);
            off += self.sizes[l] * self.sizes[l + 1] + self.sizes[l + 1];
        }
        scratch.delta.clear();
        scratch.delta.extend_from_slice(grad_out);
        for l in (0..n).rev() {
            let (fan_in, fan_out) = (self.sizes[l], self.sizes[l + 1]);
            let off = offsets[l];
            let w = &self.params[off..off + fan_in * fan_out];
            let delta = &scratch.delta;
            if let Some(g) = grad.as_deref_mut() {
                let (gw, gb) = g[off..off + fan_in * fan_out + fan_out].split_at_mut(fan_in * fan_out);
                for (gb, d) in gb.iter_mut().zip(delta) {
                    *gb += d;
                }
                if l == 0 {
                    for (i, x) in sparse.iter() {
                        axpy(x, delta, &mut gw[i * fan_out..(i + 1) * fan_out]);
                    }
                    for (k, &x) in dense.iter().enumerate() {
                        let i = sparse.dim + k;
                        axpy(x, delta, &mut gw[i * fan_out..(i + 1) * fan_out]);
                    }
                } else {
                    for (i, &x) in trace.acts[l - 1].iter().enumerate() {
                        if x != 0.0 {
                            axpy(x, delta, &mut gw[i * fan_out..(i + 1) * fan_out]);
                        }
                    }
                }
            }
            if l == 0 {
                if let Some(dg) = dense_grad {
                    for (k, out) in dg.iter_mut().enumerate() {
                        let i = sparse.dim + k;
                        *out = dot(&w[i * fan_out..(i + 1) * fan_out], delta);
                    }
                }
                break;
            }
            let below = &trace.acts[l - 1];
            scratch.next.clear();
            scratch.next.extend(
                (0..fan_in).map(|i| dot(&w[i * fan_out..(i + 1) * fan_out], delta) * (1.0 - below[i] * below[i])),
            );
            std::mem::swap(&mut scratch.delta, &mut scratch.next);
        }
    }

    /// `self <- tau * src + (1 - tau) * self`.
    pub fn soft_update(&mut self, src: &Mlp, tau: f64) {
        debug_assert_eq!(self.sizes, src.sizes);
        for (t, s) in self.params.iter_mut().zip(&src.params) {
            *t = tau * s + (1.0 - tau) * *t;
        }
    }

    pub fn distance(&self, other: &Mlp) -> f64 {
        self.params.iter().zip(&other.params).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
    }

    /// Convenience forward pass for a single input.
    pub fn eval(&self, sparse: &SparseVec, dense: &[f64]) -> Vec<f64> {
        let mut t = Trace::default();
        self.forward(sparse, dense, &mut t);
        t.output().to_vec()
    }
}

/// `tanh` through one `exp`, several times cheaper than libm's `tanh`;
/// absolute error stays near machine epsilon.
#[inline]
fn fast_tanh(x: f64) -> f64 {
    1.0 - 2.0 / ((2.0 * x).exp() + 1.0)
}

#[inline]
fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (y, x) in y.iter_mut().zip(x) {
        *y += a * x;
    }
}

/// Four independent partial sums so the loop vectorizes.
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}
