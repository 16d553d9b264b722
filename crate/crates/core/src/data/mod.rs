//! Transition records, persisted datasets, and replay buffers.

use crate::error::{Error, Result};

pub mod io;
pub mod sampling;

pub use sampling::{mixed_sample, sample_batch, SampleSource};

/// One environment step. Rewards are stored unscaled; reward scaling is
/// applied inside the trainer so a single dataset stays valid across scales.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub s: Vec<f64>,
    pub a: Vec<f64>,
    pub r: f64,
    pub s_next: Vec<f64>,
    pub done: bool,
}

/// An offline dataset: header metadata plus transitions in rollout order
/// (episode boundaries are marked by `done`; a non-`done` record whose
/// successor does not continue it is a horizon truncation).
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionDataset {
    pub env_id: String,
    pub state_dim: usize,
    pub action_dim: usize,
    pub feasible_low: Vec<f64>,
    pub feasible_high: Vec<f64>,
    pub transitions: Vec<Transition>,
}

impl TransitionDataset {
    pub fn new(
        env_id: impl Into<String>,
        state_dim: usize,
        action_dim: usize,
        feasible_low: Vec<f64>,
        feasible_high: Vec<f64>,
    ) -> TransitionDataset {
        TransitionDataset {
            env_id: env_id.into(),
            state_dim,
            action_dim,
            feasible_low,
            feasible_high,
            transitions: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    /// Check dimensional consistency of every record; `line_offset` shifts
    /// reported indices so file loading can cite real line numbers.
    pub fn validate(&self) -> Result<()> {
        if self.feasible_low.len() != self.action_dim || self.feasible_high.len() != self.action_dim {
            return Err(Error::Schema {
                line: 1,
                message: "feasible bounds length must equal action_dim".into(),
            });
        }
        for (i, t) in self.transitions.iter().enumerate() {
            let line = i + 2; // header is line 1
            if t.s.len() != self.state_dim || t.s_next.len() != self.state_dim {
                return Err(Error::Schema {
                    line,
                    message: format!(
                        "state_dim mismatch: expected {}, got {}/{}",
                        self.state_dim,
                        t.s.len(),
                        t.s_next.len()
                    ),
                });
            }
            if t.a.len() != self.action_dim {
                return Err(Error::Schema {
                    line,
                    message: format!("action_dim mismatch: expected {}, got {}", self.action_dim, t.a.len()),
                });
            }
            if !t.r.is_finite() {
                return Err(Error::Schema {
                    line,
                    message: "non-finite reward".into(),
                });
            }
        }
        Ok(())
    }
}

/// Summary statistics used for `Q_min` estimation and the action-norm probes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetStats {
    pub r_min: f64,
    pub r_max: f64,
    /// mean of ||a||_2 over the dataset, divided by `max_possible_norm`
    pub mean_action_norm: f64,
    /// largest attainable ||a||_2 inside the feasible box
    pub max_possible_norm: f64,
}

pub fn dataset_stats(ds: &TransitionDataset) -> Result<DatasetStats> {
    if ds.is_empty() {
        return Err(Error::EmptySource("dataset_stats on empty dataset"));
    }
    let mut r_min = f64::INFINITY;
    let mut r_max = f64::NEG_INFINITY;
    let mut norm_sum = 0.0;
    let max_possible_norm = ds
        .feasible_low
        .iter()
        .zip(&ds.feasible_high)
        .map(|(&lo, &hi)| lo.abs().max(hi.abs()).powi(2))
        .sum::<f64>()
        .sqrt();
    for t in &ds.transitions {
        r_min = r_min.min(t.r);
        r_max = r_max.max(t.r);
        norm_sum += t.a.iter().map(|&x| x * x).sum::<f64>().sqrt();
    }
    Ok(DatasetStats {
        r_min,
        r_max,
        mean_action_norm: norm_sum / ds.len() as f64 / max_possible_norm,
        max_possible_norm,
    })
}

/// Bounded FIFO ring of transitions for the online phase.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    storage: Vec<Transition>,
    capacity: usize,
    cursor: usize,
    inserted: u64,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> ReplayBuffer {
        assert!(capacity > 0, "replay buffer capacity must be positive");
        ReplayBuffer {
            storage: Vec::with_capacity(capacity.min(4096)),
            capacity,
            cursor: 0,
            inserted: 0,
        }
    }

    pub fn push(&mut self, t: Transition) {
        if self.storage.len() < self.capacity {
            self.storage.push(t);
        } else {
            self.storage[self.cursor] = t;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
        self.inserted += 1;
    }

    pub fn len(&self) -> usize {
        self.storage.len()
    }

    pub fn is_empty(&self) -> bool {
        self.storage.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn inserted(&self) -> u64 {
        self.inserted
    }

    pub fn get(&self, idx: usize) -> &Transition {
        &self.storage[idx]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.storage.iter()
    }
}
