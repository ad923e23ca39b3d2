use rand::Rng;
use std::collections::VecDeque;

use super::SparseVec;
use crate::error::RlError;

#[derive(Debug, Clone, PartialEq)]
pub struct Experience {
    pub state: SparseVec,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_state: SparseVec,
    /// Terminal transition: no bootstrap from `next_state`.
    pub done: bool,
}

/// Bounded FIFO of experiences for one agent, shared by every vehicle that
/// agent controls.
#[derive(Debug, Clone)]
pub struct ReplayMemory {
    capacity: usize,
    state_dim: usize,
    action_dim: usize,
    items: VecDeque<Experience>,
}

impl ReplayMemory {
    pub fn new(capacity: usize, state_dim: usize, action_dim: usize) -> Self {
        assert!(capacity > 0);
        Self { capacity, state_dim, action_dim, items: VecDeque::new() }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Experience> {
        self.items.iter()
    }

    pub fn push(&mut self, e: Experience) -> Result<(), RlError> {
        for (what, expected, got) in [
            ("state", self.state_dim, e.state.dim),
            ("next state", self.state_dim, e.next_state.dim),
            ("action", self.action_dim, e.action.len()),
        ] {
            if expected != got {
                return Err(RlError::DimMismatch { what, expected, got });
            }
        }
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(e);
        Ok(())
    }

    /// Uniform sample with replacement.
    pub fn sample<'a, R: Rng>(&'a self, n: usize, rng: &mut R) -> Result<Vec<&'a Experience>, RlError> {
        if self.items.len() < n {
            return Err(RlError::NotEnoughSamples { have: self.items.len(), need: n });
        }
        Ok((0..n).map(|_| &self.items[rng.random_range(0..self.items.len())]).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn exp(tag: f64) -> Experience {
        Experience {
            state: SparseVec::from_dense(&[tag, 0.0]),
            action: vec![0.1],
            reward: tag,
            next_state: SparseVec::zeros(2),
            done: false,
        }
    }

    #[test]
    fn fifo_eviction_at_capacity() {
        let mut m = ReplayMemory::new(3, 2, 1);
        for k in 1..=3 {
            m.push(exp(k as f64)).unwrap();
        }
        assert_eq!(m.len(), 3);
        m.push(exp(4.0)).unwrap();
        assert_eq!(m.len(), 3);
        let rewards: Vec<f64> = m.iter().map(|e| e.reward).collect();
        assert_eq!(rewards, vec![2.0, 3.0, 4.0]);
    }

    #[test]
    fn partial_fill_counts() {
        let mut m = ReplayMemory::new(100, 2, 1);
        for k in 0..7 {
            m.push(exp(k as f64)).unwrap();
        }
        assert_eq!(m.len(), 7);
    }

    #[test]
    fn rejects_wrong_dims() {
        let mut m = ReplayMemory::new(10, 3, 1);
        assert!(matches!(m.push(exp(1.0)), Err(RlError::DimMismatch { what: "state", expected: 3, got: 2 })));
        let mut m = ReplayMemory::new(10, 2, 2);
        assert!(matches!(m.push(exp(1.0)), Err(RlError::DimMismatch { what: "action", .. })));
    }

    #[test]
    fn sampling_needs_enough_items() {
        let mut m = ReplayMemory::new(10, 2, 1);
        m.push(exp(1.0)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(m.sample(2, &mut rng).is_err());
        assert_eq!(m.sample(1, &mut rng).unwrap().len(), 1);
    }
}
