//! Behavior policies and offline dataset generation.
//!
//! The clustered policy snaps a scripted expert action onto a small set of
//! cluster centers and perturbs it, so the emitted action distribution has
//! well-separated modes: the gaps between them are exactly the
//! inside-the-hull holes the diagnostics are built to detect.

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};

use super::{Env, Policy};
use crate::data::{Transition, TransitionDataset};
use crate::error::{Error, Result};
use crate::rng;

pub trait BehaviorPolicy: Send + Sync {
    fn name(&self) -> &'static str;
    fn action(&self, env: &dyn Env, state: &[f64], rng: &mut ChaCha12Rng) -> Vec<f64>;
}

/// Config-level description of a behavior policy.
#[derive(Debug, Clone, PartialEq)]
pub struct BehaviorBuild {
    pub kind: String,
    pub centers: Vec<Vec<f64>>,
    pub noise: f64,
    pub episodes: usize,
    pub mixture_random_prob: f64,
}

impl Default for BehaviorBuild {
    fn default() -> Self {
        BehaviorBuild {
            kind: "clustered_noisy_expert".into(),
            // eight compass directions at norm 0.6
            centers: compass_centers(0.6),
            noise: 0.2,
            episodes: 200,
            mixture_random_prob: 0.5,
        }
    }
}

pub fn compass_centers(radius: f64) -> Vec<Vec<f64>> {
    let diag = radius / 2.0f64.sqrt();
    vec![
        vec![radius, 0.0],
        vec![diag, diag],
        vec![0.0, radius],
        vec![-diag, diag],
        vec![-radius, 0.0],
        vec![-diag, -diag],
        vec![0.0, -radius],
        vec![diag, -diag],
    ]
}

pub const KNOWN_BEHAVIOR_KINDS: [&str; 3] = ["clustered_noisy_expert", "random", "mixture"];

pub fn build_behavior(b: &BehaviorBuild) -> Result<Box<dyn BehaviorPolicy>> {
    match b.kind.as_str() {
        "clustered_noisy_expert" => Ok(Box::new(ClusteredNoisyExpert {
            centers: b.centers.clone(),
            noise: b.noise,
        })),
        "random" => Ok(Box::new(RandomPolicy)),
        "mixture" => Ok(Box::new(MixturePolicy {
            random_prob: b.mixture_random_prob,
            clustered: ClusteredNoisyExpert {
                centers: b.centers.clone(),
                noise: b.noise,
            },
        })),
        other => Err(Error::InvalidArgument(format!(
            "unknown behavior kind `{other}` (known: {})",
            KNOWN_BEHAVIOR_KINDS.join(", ")
        ))),
    }
}

fn clip_to_box(env: &dyn Env, mut a: Vec<f64>) -> Vec<f64> {
    let spec = env.spec();
    for i in 0..a.len() {
        a[i] = a[i].clamp(spec.feasible_low[i], spec.feasible_high[i]);
    }
    a
}

/// Uniform over the feasible box.
pub struct RandomPolicy;

impl BehaviorPolicy for RandomPolicy {
    fn name(&self) -> &'static str {
        "random"
    }
    fn action(&self, env: &dyn Env, _state: &[f64], rng: &mut ChaCha12Rng) -> Vec<f64> {
        let spec = env.spec();
        (0..spec.action_dim)
            .map(|i| rng.random_range(spec.feasible_low[i]..spec.feasible_high[i]))
            .collect()
    }
}

/// Snap the expert action to its nearest cluster center, add Gaussian noise,
/// clip to the box.
pub struct ClusteredNoisyExpert {
    pub centers: Vec<Vec<f64>>,
    pub noise: f64,
}

impl ClusteredNoisyExpert {
    fn nearest_center(&self, target: &[f64]) -> &[f64] {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, c) in self.centers.iter().enumerate() {
            let d: f64 = c.iter().zip(target).map(|(a, b)| (a - b) * (a - b)).sum();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        &self.centers[best]
    }
}

impl BehaviorPolicy for ClusteredNoisyExpert {
    fn name(&self) -> &'static str {
        "clustered_noisy_expert"
    }
    fn action(&self, env: &dyn Env, state: &[f64], rng: &mut ChaCha12Rng) -> Vec<f64> {
        let expert = env.expert_action(state);
        let center = self.nearest_center(&expert);
        let normal = Normal::new(0.0, self.noise.max(1e-12)).expect("valid sigma");
        let a: Vec<f64> = center.iter().map(|&c| c + normal.sample(rng)).collect();
        clip_to_box(env, a)
    }
}

/// With probability `random_prob` act uniformly, otherwise like the
/// clustered expert.
pub struct MixturePolicy {
    pub random_prob: f64,
    pub clustered: ClusteredNoisyExpert,
}

impl BehaviorPolicy for MixturePolicy {
    fn name(&self) -> &'static str {
        "mixture"
    }
    fn action(&self, env: &dyn Env, state: &[f64], rng: &mut ChaCha12Rng) -> Vec<f64> {
        if rng.random::<f64>() < self.random_prob {
            RandomPolicy.action(env, state, rng)
        } else {
            self.clustered.action(env, state, rng)
        }
    }
}

/// Roll out the behavior policy and record every transition in episodic
/// order, so consecutive records within an episode satisfy
/// `s_next[i] == s[i+1]` (which is what the SARSA probe needs).
pub fn generate_offline_dataset(
    env: &dyn Env,
    behavior: &dyn BehaviorPolicy,
    episodes: usize,
    seed: u64,
) -> Result<TransitionDataset> {
    let spec = env.spec();
    let mut ds = TransitionDataset::new(
        spec.env_id.clone(),
        spec.state_dim,
        spec.action_dim,
        spec.feasible_low.clone(),
        spec.feasible_high.clone(),
    );
    for ep in 0..episodes {
        let mut state = env.reset(rng::derive_seed(seed, "episode_reset", ep as u64));
        let mut noise = rng::stream_indexed(seed, "behavior", ep as u64);
        for _ in 0..spec.max_episode_steps {
            let a = behavior.action(env, &state, &mut noise);
            let res = env.step(&state, &a)?;
            ds.transitions.push(Transition {
                s: state.clone(),
                a,
                r: res.r,
                s_next: res.s_next.clone(),
                done: res.done,
            });
            state = res.s_next;
            if res.done {
                break;
            }
        }
    }
    Ok(ds)
}

/// Rollout helper for deterministic policies (evaluation, probes).
pub fn rollout_policy(env: &dyn Env, policy: &dyn Policy, seed: u64) -> Result<Vec<Transition>> {
    let spec = env.spec();
    let mut out = Vec::new();
    let mut state = env.reset(seed);
    for _ in 0..spec.max_episode_steps {
        let a = policy.act(&state);
        let res = env.step(&state, &a)?;
        out.push(Transition {
            s: state.clone(),
            a,
            r: res.r,
            s_next: res.s_next.clone(),
            done: res.done,
        });
        state = res.s_next;
        if res.done {
            break;
        }
    }
    Ok(out)
}
