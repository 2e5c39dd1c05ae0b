use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::record::TransitionRecord;
use crate::error::{Error, Result};

/// `β(u) = min(β_max, β₀ + δ·u)` where `u` counts elapsed refresh periods.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BetaSchedule {
    pub beta0: f64,
    pub delta: f64,
    pub beta_max: f64,
}

impl Default for BetaSchedule {
    fn default() -> Self {
        BetaSchedule {
            beta0: 0.2,
            delta: 0.05,
            beta_max: 0.9,
        }
    }
}

impl BetaSchedule {
    pub fn beta(&self, periods: u64) -> f64 {
        (self.beta0 + self.delta * periods as f64).min(self.beta_max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Source {
    Offline,
    Online,
}

/// Fixed offline buffer plus a ring buffer of online transitions.
#[derive(Clone, Debug)]
pub struct ReplayBuffers {
    offline: Vec<TransitionRecord>,
    online: VecDeque<TransitionRecord>,
    online_capacity: usize,
    pub beta: f64,
}

impl ReplayBuffers {
    pub fn new(offline: Vec<TransitionRecord>, online_capacity: usize, beta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&beta) {
            return Err(Error::Config(format!(
                "beta must lie in [0, 1], got {beta}"
            )));
        }
        if online_capacity == 0 {
            return Err(Error::Config(
                "online buffer capacity must be positive".into(),
            ));
        }
        Ok(ReplayBuffers {
            offline,
            online: VecDeque::with_capacity(online_capacity.min(1 << 16)),
            online_capacity,
            beta,
        })
    }

    pub fn offline(&self) -> &[TransitionRecord] {
        &self.offline
    }

    pub fn online(&self) -> impl ExactSizeIterator<Item = &TransitionRecord> {
        self.online.iter()
    }

    pub fn online_len(&self) -> usize {
        self.online.len()
    }

    pub fn push_online(&mut self, record: TransitionRecord) {
        if self.online.len() == self.online_capacity {
            self.online.pop_front();
        }
        self.online.push_back(record);
    }

    /// One Bernoulli(β) draw picks the buffer for the whole minibatch; records
    /// are then drawn uniformly with replacement. An empty online buffer
    /// always yields the offline one, and vice versa.
    pub fn mixed_sample<R: Rng + ?Sized>(
        &self,
        m: usize,
        rng: &mut R,
    ) -> Result<(Source, Vec<&TransitionRecord>)> {
        if self.offline.is_empty() && self.online.is_empty() {
            return Err(Error::Empty("replay buffers"));
        }
        let coin = rng.random::<f64>() < self.beta;
        let source = if self.online.is_empty() {
            Source::Offline
        } else if self.offline.is_empty() || coin {
            Source::Online
        } else {
            Source::Offline
        };
        let batch = match source {
            Source::Offline => (0..m)
                .map(|_| &self.offline[rng.random_range(0..self.offline.len())])
                .collect(),
            Source::Online => (0..m)
                .map(|_| &self.online[rng.random_range(0..self.online.len())])
                .collect(),
        };
        Ok((source, batch))
    }
}
