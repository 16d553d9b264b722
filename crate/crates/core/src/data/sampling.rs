//! Uniform and mixed batch sampling.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_chacha::ChaCha12Rng;

use super::{ReplayBuffer, Transition, TransitionDataset};
use crate::error::{Error, Result};

/// Anything transitions can be drawn from by index.
pub trait SampleSource {
    fn len(&self) -> usize;
    fn get(&self, idx: usize) -> &Transition;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl SampleSource for TransitionDataset {
    fn len(&self) -> usize {
        self.transitions.len()
    }
    fn get(&self, idx: usize) -> &Transition {
        &self.transitions[idx]
    }
}

impl SampleSource for ReplayBuffer {
    fn len(&self) -> usize {
        ReplayBuffer::len(self)
    }
    fn get(&self, idx: usize) -> &Transition {
        ReplayBuffer::get(self, idx)
    }
}

/// Uniform with-replacement sample of `n` transitions.
pub fn sample_batch<'a, S: SampleSource + ?Sized>(
    src: &'a S,
    n: usize,
    rng: &mut ChaCha12Rng,
) -> Result<Vec<&'a Transition>> {
    if src.is_empty() {
        return Err(Error::EmptySource("sample_batch"));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("batch size must be >= 1".into()));
    }
    let len = src.len();
    Ok((0..n).map(|_| src.get(rng.random_range(0..len))).collect())
}

/// Draw `round(n * offline_fraction)` transitions from the offline dataset
/// and the remainder from the online buffer. The per-source counts are
/// exact, not stochastic.
pub fn mixed_sample<'a>(
    offline: &'a TransitionDataset,
    online: &'a ReplayBuffer,
    offline_fraction: f64,
    n: usize,
    rng: &mut ChaCha12Rng,
) -> Result<Vec<&'a Transition>> {
    if !(0.0..=1.0).contains(&offline_fraction) {
        return Err(Error::InvalidArgument(format!(
            "offline_fraction must be in [0, 1], got {offline_fraction}"
        )));
    }
    let n_offline = ((n as f64 * offline_fraction).round() as usize).min(n);
    let n_online = n - n_offline;
    if n_offline > 0 && offline.is_empty() {
        return Err(Error::EmptySource("mixed_sample offline dataset"));
    }
    if n_online > 0 && online.is_empty() {
        return Err(Error::EmptySource("mixed_sample online buffer"));
    }
    let mut batch = Vec::with_capacity(n);
    if n_offline > 0 {
        batch.extend(sample_batch(offline, n_offline, rng)?);
    }
    if n_online > 0 {
        batch.extend(sample_batch(online, n_online, rng)?);
    }
    Ok(batch)
}

/// Stack a batch into the dense arrays the trainers consume.
pub struct Batch {
    pub states: Array2<f64>,
    pub actions: Array2<f64>,
    pub rewards: Array1<f64>,
    pub next_states: Array2<f64>,
    pub done: Array1<f64>,
}

pub fn stack_batch(batch: &[&Transition]) -> Batch {
    let b = batch.len();
    let sd = batch[0].s.len();
    let ad = batch[0].a.len();
    let mut states = Array2::zeros((b, sd));
    let mut actions = Array2::zeros((b, ad));
    let mut rewards = Array1::zeros(b);
    let mut next_states = Array2::zeros((b, sd));
    let mut done = Array1::zeros(b);
    for (i, t) in batch.iter().enumerate() {
        for j in 0..sd {
            states[(i, j)] = t.s[j];
            next_states[(i, j)] = t.s_next[j];
        }
        for j in 0..ad {
            actions[(i, j)] = t.a[j];
        }
        rewards[i] = t.r;
        done[i] = if t.done { 1.0 } else { 0.0 };
    }
    Batch {
        states,
        actions,
        rewards,
        next_states,
        done,
    }
}
