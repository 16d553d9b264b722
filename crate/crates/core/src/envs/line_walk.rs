//! 1-D walk on [0, 1] with a shaped reward.
//!
//! The action hull is an interval here, so every region statistic downstream
//! is exactly computable.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

use super::{check_action_in_box, Env, EnvBuild, EnvSpec, RewardKind, StepResult};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct LineWalk {
    spec: EnvSpec,
    goal: f64,
    goal_radius: f64,
    step_scale: f64,
}

impl LineWalk {
    pub fn from_build(b: &EnvBuild) -> Result<LineWalk> {
        if b.goal.len() != 1 {
            return Err(Error::InvalidArgument("line_walk_1d needs a 1-dimensional goal".into()));
        }
        if !(b.goal_radius > 0.0) || !(b.step_scale > 0.0) {
            return Err(Error::InvalidArgument(
                "goal_radius and step_scale must be positive".into(),
            ));
        }
        Ok(LineWalk {
            spec: EnvSpec {
                env_id: "line_walk_1d".into(),
                state_dim: 1,
                action_dim: 1,
                feasible_low: vec![-1.0],
                feasible_high: vec![1.0],
                max_episode_steps: b.max_episode_steps,
                reward: b.reward,
            },
            goal: b.goal[0],
            goal_radius: b.goal_radius,
            step_scale: b.step_scale,
        })
    }
}

impl Env for LineWalk {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&self, seed: u64) -> Vec<f64> {
        // random start covers the whole line across episodes
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        vec![rng.random::<f64>()]
    }

    fn step(&self, state: &[f64], action: &[f64]) -> Result<StepResult> {
        check_action_in_box(&self.spec, action)?;
        let x = (state[0] + self.step_scale * action[0]).clamp(0.0, 1.0);
        let dist = (x - self.goal).abs();
        let reached = dist <= self.goal_radius;
        let (r, done) = match self.spec.reward {
            RewardKind::SparseGoal => (if reached { 1.0 } else { 0.0 }, reached),
            RewardKind::Shaped => (-dist, false),
        };
        Ok(StepResult {
            s_next: vec![x],
            r,
            done,
            truncated: false,
        })
    }

    fn reached_goal(&self, state: &[f64]) -> bool {
        (state[0] - self.goal).abs() <= self.goal_radius
    }

    fn expert_action(&self, state: &[f64]) -> Vec<f64> {
        vec![((self.goal - state[0]) / self.step_scale).clamp(-1.0, 1.0)]
    }

    fn known_r_min(&self) -> f64 {
        match self.spec.reward {
            RewardKind::SparseGoal => 0.0,
            RewardKind::Shaped => -1.0,
        }
    }
}
