//! Deterministic policy evaluation.

use super::Env;
use crate::error::{Error, Result};
use crate::rng;

/// A deterministic state -> feasible-action map.
pub trait Policy {
    fn act(&self, state: &[f64]) -> Vec<f64>;
}

/// The environment's scripted expert as a policy.
pub struct ExpertPolicy<'a>(pub &'a dyn Env);

impl Policy for ExpertPolicy<'_> {
    fn act(&self, state: &[f64]) -> Vec<f64> {
        self.0.expert_action(state)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalReport {
    /// mean undiscounted return over the evaluation episodes
    pub mean_return: f64,
    /// fraction of episodes that touched the goal at least once
    pub goal_rate: f64,
}

pub fn evaluate_policy(
    env: &dyn Env,
    policy: &dyn Policy,
    episodes: usize,
    seed: u64,
) -> Result<EvalReport> {
    if episodes == 0 {
        return Err(Error::InvalidArgument("evaluation needs at least one episode".into()));
    }
    let mut total_return = 0.0;
    let mut goals = 0usize;
    for ep in 0..episodes {
        let mut state = env.reset(rng::derive_seed(seed, "eval_episode", ep as u64));
        let mut reached = env.reached_goal(&state);
        for _ in 0..env.spec().max_episode_steps {
            let a = policy.act(&state);
            let res = env.step(&state, &a)?;
            total_return += res.r;
            state = res.s_next;
            reached |= env.reached_goal(&state);
            if res.done {
                break;
            }
        }
        if reached {
            goals += 1;
        }
    }
    Ok(EvalReport {
        mean_return: total_return / episodes as f64,
        goal_rate: goals as f64 / episodes as f64,
    })
}
