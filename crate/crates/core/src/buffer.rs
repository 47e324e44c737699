//! FIFO replay buffer of trajectory sets.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::trajectory::TrajectorySet;

#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    entries: VecDeque<TrajectorySet>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("replay buffer capacity must be positive".into()));
        }
        Ok(Self {
            capacity,
            entries: VecDeque::with_capacity(capacity.min(4096)),
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = &TrajectorySet> {
        self.entries.iter()
    }

    /// Append a set, evicting the oldest entry when over capacity.
    pub fn push(&mut self, set: TrajectorySet) -> Result<()> {
        if set.is_empty() {
            return Err(Error::EmptySet);
        }
        self.entries.push_back(set);
        while self.entries.len() > self.capacity {
            self.entries.pop_front();
        }
        Ok(())
    }

    /// `count` sets drawn uniformly with replacement.
    pub fn sample_sets(&self, count: usize, rng: &mut Rng) -> Result<Vec<&TrajectorySet>> {
        if self.entries.is_empty() {
            return Err(Error::EmptyBuffer);
        }
        if count == 0 {
            return Err(Error::Config("sample count must be positive".into()));
        }
        Ok((0..count).map(|_| &self.entries[rng.below(self.entries.len())]).collect())
    }
}
