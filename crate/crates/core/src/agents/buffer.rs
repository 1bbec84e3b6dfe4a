use std::collections::VecDeque;

use rand::Rng;

use crate::error::{Error, Result};

/// One transition `(s, a, r, s')`. The reward is stored already scaled.
#[derive(Debug, Clone, PartialEq)]
pub struct Experience {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_state: Vec<f64>,
}

/// Bounded FIFO replay memory.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: VecDeque<Experience>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::config("buffer_capacity", "must be at least 1"));
        }
        Ok(ReplayBuffer {
            capacity,
            items: VecDeque::with_capacity(capacity),
        })
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

    pub fn clear(&mut self) {
        self.items.clear();
    }

    /// Appends `e`, evicting the oldest record when full.
    pub fn push(&mut self, e: Experience) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(e);
    }

    pub fn iter(&self) -> impl Iterator<Item = &Experience> {
        self.items.iter()
    }

    /// Indices of `n` uniformly drawn records, with replacement.
    pub fn sample_indices<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Result<Vec<usize>> {
        if self.items.len() < n || self.items.is_empty() {
            return Err(Error::InsufficientData {
                have: self.items.len(),
                need: n.max(1),
            });
        }
        Ok((0..n).map(|_| rng.random_range(0..self.items.len())).collect())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Result<Vec<&Experience>> {
        Ok(self
            .sample_indices(rng, n)?
            .into_iter()
            .map(|i| &self.items[i])
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};

    fn exp(r: f64) -> Experience {
        Experience {
            state: vec![r],
            action: vec![0.0, 0.0],
            reward: r,
            next_state: vec![r],
        }
    }

    #[test]
    fn fifo_eviction() {
        let mut b = ReplayBuffer::new(400).unwrap();
        for i in 0..401 {
            b.push(exp(i as f64));
        }
        assert_eq!(b.len(), 400);
        assert!(b.iter().all(|e| e.reward != 0.0));
        assert_eq!(b.iter().next().unwrap().reward, 1.0);
    }

    #[test]
    fn single_record_sample() {
        let mut b = ReplayBuffer::new(4).unwrap();
        b.push(exp(7.0));
        let mut rng = stream(0, Stream::Policy);
        assert_eq!(b.sample(&mut rng, 1).unwrap(), vec![&exp(7.0)]);
        assert!(matches!(
            b.sample(&mut rng, 4),
            Err(Error::InsufficientData { have: 1, need: 4 })
        ));
        for _ in 0..3 {
            b.push(exp(1.0));
        }
        assert_eq!(b.sample(&mut rng, 4).unwrap().len(), 4);
    }

    #[test]
    fn sampling_is_uniform() {
        let mut b = ReplayBuffer::new(10).unwrap();
        for i in 0..10 {
            b.push(exp(i as f64));
        }
        let mut rng = stream(1, Stream::Policy);
        let n = 100_000;
        let mut counts = [0usize; 10];
        for _ in 0..n / 10 {
            for i in b.sample_indices(&mut rng, 10).unwrap() {
                counts[i] += 1;
            }
        }
        let sd = (n as f64 * 0.1 * 0.9).sqrt();
        for c in counts {
            assert!((c as f64 - n as f64 * 0.1).abs() <= 3.0 * sd, "{counts:?}");
        }
    }
}
