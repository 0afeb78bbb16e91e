use std::collections::VecDeque;

use rand::Rng;

use crate::mdp::Transition;

/// Bounded FIFO experience store with uniform sampling.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    items: VecDeque<Transition>,
    capacity: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            items: VecDeque::with_capacity(capacity.min(1 << 16)),
            capacity,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Appends, evicting the oldest item when full.
    pub fn push(&mut self, t: Transition) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(t);
    }

    pub fn extend<I: IntoIterator<Item = Transition>>(&mut self, items: I) {
        for t in items {
            self.push(t);
        }
    }

    /// `n` items drawn uniformly with replacement. Empty if the buffer is.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<&Transition> {
        if self.items.is_empty() {
            return Vec::new();
        }
        (0..n)
            .map(|_| &self.items[rng.random_range(0..self.items.len())])
            .collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    fn t(i: usize) -> Transition {
        Transition {
            state: vec![i as f64],
            action: vec![],
            next_state: vec![],
            reward: i as f64,
        }
    }

    #[test]
    fn evicts_oldest_first_and_keeps_order() {
        let mut buf = ReplayBuffer::new(5);
        buf.extend((0..8).map(t));
        assert_eq!(buf.len(), 5);
        let kept: Vec<f64> = buf.iter().map(|x| x.reward).collect();
        assert_eq!(kept, vec![3.0, 4.0, 5.0, 6.0, 7.0]);
    }

    #[test]
    fn sampling_covers_contents_uniformly() {
        let mut buf = ReplayBuffer::new(4);
        buf.extend((0..4).map(t));
        let mut counts = [0usize; 4];
        for s in buf.sample(40_000, &mut rng_from_seed(2)) {
            counts[s.reward as usize] += 1;
        }
        for c in counts {
            assert!((c as f64 / 40_000.0 - 0.25).abs() < 0.01, "{counts:?}");
        }
    }

    #[test]
    fn empty_buffer_samples_nothing() {
        let buf = ReplayBuffer::new(3);
        assert!(buf.sample(10, &mut rng_from_seed(1)).is_empty());
    }
}
