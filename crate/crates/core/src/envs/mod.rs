//! Deterministic toy continuous-action environments.
//!
//! Every environment sits behind the [`Env`] trait and is selected by id at
//! runtime ([`build_env`]), so trainers, evaluators, and dataset generators
//! never name a concrete environment. Environments are value-semantic and
//! stateless: `step` is a pure function of (state, action), and parallel
//! rollouts just use independent instances and RNG streams.

use crate::error::{Error, Result};

pub mod behavior;
pub mod eval;
pub mod line_walk;
pub mod point_maze;

pub use behavior::{build_behavior, compass_centers, generate_offline_dataset, BehaviorBuild, BehaviorPolicy};
pub use eval::{evaluate_policy, EvalReport, ExpertPolicy, Policy};
pub use line_walk::LineWalk;
pub use point_maze::PointMaze;

/// Axis-aligned wall rectangle in the unit square.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x0 && x <= self.x1 && y >= self.y0 && y <= self.y1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RewardKind {
    /// 0 everywhere, 1 on entering the goal disc (which also terminates)
    SparseGoal,
    /// negative distance to the goal every step
    Shaped,
}

impl RewardKind {
    pub fn name(self) -> &'static str {
        match self {
            RewardKind::SparseGoal => "sparse_goal",
            RewardKind::Shaped => "shaped",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "sparse_goal" => Ok(RewardKind::SparseGoal),
            "shaped" => Ok(RewardKind::Shaped),
            other => Err(Error::InvalidArgument(format!(
                "unknown reward kind `{other}` (expected sparse_goal|shaped)"
            ))),
        }
    }
}

/// Static description of an environment: dimensions, feasible box, horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvSpec {
    pub env_id: String,
    pub state_dim: usize,
    pub action_dim: usize,
    pub feasible_low: Vec<f64>,
    pub feasible_high: Vec<f64>,
    pub max_episode_steps: usize,
    pub reward: RewardKind,
}

/// Result of one step. `truncated` is never set by `step` itself (the step
/// function is stateless); rollout loops set it when the horizon runs out.
#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub s_next: Vec<f64>,
    pub r: f64,
    pub done: bool,
    pub truncated: bool,
}

pub trait Env: Send + Sync {
    fn spec(&self) -> &EnvSpec;

    /// Initial state for one episode; deterministic per seed.
    fn reset(&self, seed: u64) -> Vec<f64>;

    /// Pure transition. The action must already lie in the feasible box;
    /// clipping is the caller's job, mirroring actor tanh/clip.
    fn step(&self, state: &[f64], action: &[f64]) -> Result<StepResult>;

    fn reached_goal(&self, state: &[f64]) -> bool;

    /// Scripted reference action used by the clustered behavior policy and
    /// by evaluator sanity checks.
    fn expert_action(&self, state: &[f64]) -> Vec<f64>;

    /// Smallest reward the task can emit, when known analytically.
    fn known_r_min(&self) -> f64;
}

/// Everything the run config provides to instantiate an environment.
/// Geometry lives here, not in code.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvBuild {
    pub id: String,
    pub max_episode_steps: usize,
    pub step_scale: f64,
    pub goal: Vec<f64>,
    pub goal_radius: f64,
    pub start: Vec<f64>,
    pub walls: Vec<Rect>,
    pub reward: RewardKind,
}

impl Default for EnvBuild {
    fn default() -> Self {
        EnvBuild {
            id: "point_maze_2d".into(),
            max_episode_steps: 300,
            step_scale: 0.05,
            goal: vec![0.1, 0.9],
            goal_radius: 0.1,
            start: vec![0.1, 0.1],
            // one horizontal bar anchored to the left wall: the open space
            // forms a U that forces a detour around x = 0.7
            walls: vec![Rect {
                x0: 0.0,
                y0: 0.45,
                x1: 0.7,
                y1: 0.55,
            }],
            reward: RewardKind::SparseGoal,
        }
    }
}

pub const KNOWN_ENV_IDS: [&str; 2] = ["point_maze_2d", "line_walk_1d"];

/// Instantiate an environment by id.
pub fn build_env(build: &EnvBuild) -> Result<Box<dyn Env>> {
    match build.id.as_str() {
        "point_maze_2d" => Ok(Box::new(PointMaze::from_build(build)?)),
        "line_walk_1d" => Ok(Box::new(LineWalk::from_build(build)?)),
        other => Err(Error::InvalidArgument(format!(
            "unknown env id `{other}` (known: {})",
            KNOWN_ENV_IDS.join(", ")
        ))),
    }
}

pub(crate) fn check_action_in_box(spec: &EnvSpec, action: &[f64]) -> Result<()> {
    if action.len() != spec.action_dim {
        return Err(Error::ShapeMismatch {
            context: "env action",
            expected: spec.action_dim.to_string(),
            got: action.len().to_string(),
        });
    }
    for (i, &a) in action.iter().enumerate() {
        if a < spec.feasible_low[i] || a > spec.feasible_high[i] || !a.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "action component {i} = {a} outside feasible box [{}, {}]",
                spec.feasible_low[i], spec.feasible_high[i]
            )));
        }
    }
    Ok(())
}
