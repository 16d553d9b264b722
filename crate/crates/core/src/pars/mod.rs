//! The trainer: a TD3+BC-style actor-critic with reward scaling, optional
//! layer-normalized critics, an ensemble, and a squared penalty pinning
//! Q-values of far-infeasible actions to `Q_min`.

use std::path::Path;

use ndarray::{Array1, Array2};

use crate::envs::Policy;
use crate::error::{Error, Result};
use crate::nn::{self, checkpoint, Activation, MlpParams, MlpSpec};

pub mod trainer;

pub use trainer::{
    actor_loss_and_grad, compute_q_min, critic_loss_and_grad, finetune_online, infeasible_component,
    sample_infeasible, td_target, train_offline, Phase, TrainOutput,
};

/// How `r_min` (and thus `Q_min = c_reward * r_min / (1 - gamma)`) is
/// resolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RMinSource {
    /// use `r_min_known` supplied by the task
    Known,
    /// estimate from the dataset's minimum reward
    Dataset,
}

impl RMinSource {
    pub fn name(self) -> &'static str {
        match self {
            RMinSource::Known => "known",
            RMinSource::Dataset => "dataset",
        }
    }
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "known" => Ok(RMinSource::Known),
            "dataset" => Ok(RMinSource::Dataset),
            other => Err(Error::InvalidArgument(format!(
                "unknown r_min_source `{other}` (expected known|dataset)"
            ))),
        }
    }
}

/// Every tunable of the trainer. All defaults are documented here and in the
/// run-config reference; the config file overrides them key by key.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsConfig {
    /// reward scaling factor applied inside the losses (datasets stay unscaled)
    pub c_reward: f64,
    /// weight of the infeasible-action penalty; 0 disables it
    pub alpha: f64,
    /// weight of the behavior-cloning term in the actor loss; 0 drops it
    pub beta: f64,
    pub gamma: f64,
    pub tau: f64,
    pub n_critics: usize,
    /// size of the random target-critic subset whose min forms the TD target
    pub target_subset: usize,
    /// size of the critic subset averaged for policy improvement online
    pub actor_subset: usize,
    pub policy_noise: f64,
    pub noise_clip: f64,
    pub policy_delay: usize,
    pub exploration_noise: f64,
    pub utd_ratio: usize,
    pub offline_fraction: f64,
    /// half-width multiplier m of the penalized region: samples land in
    /// [-2m, -m) u [m, 2m) per action component
    pub guard_multiplier: f64,
    pub r_min_source: RMinSource,
    /// task-level minimum reward, consulted when `r_min_source = known`
    pub r_min_known: Option<f64>,
    pub batch_size: usize,
    pub max_gradient_steps: usize,
    /// critic architecture; the actor shares hidden dims but always runs
    /// un-normalized ReLU (normalization questions only concern the critic)
    pub hidden_dims: Vec<usize>,
    pub use_ln: bool,
    pub activation: Activation,
    pub ln_eps: f64,
    pub learning_rate: f64,
    /// divide the actor's Q-term by the detached batch mean |Q| so that
    /// `beta` weights the BC term on a scale-free axis; switchable because
    /// the unnormalized convention is also in circulation
    pub actor_q_normalization: bool,
    /// resample the target-critic subset per sample instead of per batch
    pub subset_per_sample: bool,
    /// penalty weight during online fine-tuning (0 switches the penalty off)
    pub alpha_online: f64,
    pub beta_online: f64,
    /// offline: gradient steps between log rows; online: env steps between rows
    pub log_interval: usize,
    pub eval_episodes: usize,
    pub buffer_capacity: usize,
    pub online_steps: usize,
    /// number of dataset rows used for the dormant-unit log column
    pub dormant_eval_batch: usize,
}

impl Default for ParsConfig {
    fn default() -> Self {
        ParsConfig {
            c_reward: 1.0,
            alpha: 0.01,
            beta: 0.05,
            gamma: 0.99,
            tau: 5e-3,
            n_critics: 2,
            target_subset: 2,
            actor_subset: 2,
            policy_noise: 0.2,
            noise_clip: 0.5,
            policy_delay: 2,
            exploration_noise: 0.05,
            utd_ratio: 20,
            offline_fraction: 0.5,
            guard_multiplier: 100.0,
            r_min_source: RMinSource::Dataset,
            r_min_known: None,
            batch_size: 256,
            max_gradient_steps: 20_000,
            hidden_dims: vec![256, 256],
            use_ln: true,
            activation: Activation::Relu,
            ln_eps: 1e-5,
            learning_rate: 3e-4,
            actor_q_normalization: true,
            subset_per_sample: false,
            alpha_online: 0.01,
            beta_online: 0.05,
            log_interval: 500,
            eval_episodes: 10,
            buffer_capacity: 1_000_000,
            online_steps: 2_000,
            dormant_eval_batch: 512,
        }
    }
}

impl ParsConfig {
    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, msg: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::config(msg))
            }
        };
        check(self.c_reward > 0.0, "c_reward must be positive")?;
        check(self.alpha >= 0.0 && self.alpha_online >= 0.0, "alpha must be non-negative")?;
        check(self.beta >= 0.0 && self.beta_online >= 0.0, "beta must be non-negative")?;
        check(self.gamma > 0.0 && self.gamma < 1.0, "gamma must lie in (0, 1)")?;
        check((0.0..=1.0).contains(&self.tau), "tau must lie in [0, 1]")?;
        check(self.n_critics >= 2, "n_critics must be >= 2")?;
        check(
            self.target_subset >= 1 && self.target_subset <= self.n_critics,
            "target_subset must lie in [1, n_critics]",
        )?;
        check(
            self.actor_subset >= 1 && self.actor_subset <= self.n_critics,
            "actor_subset must lie in [1, n_critics]",
        )?;
        check(self.policy_noise >= 0.0 && self.noise_clip >= 0.0, "noise must be non-negative")?;
        check(self.policy_delay >= 1, "policy_delay must be >= 1")?;
        check(self.exploration_noise >= 0.0, "exploration_noise must be non-negative")?;
        check(self.utd_ratio >= 1, "utd_ratio must be >= 1")?;
        check(
            (0.0..=1.0).contains(&self.offline_fraction),
            "offline_fraction must lie in [0, 1]",
        )?;
        check(self.guard_multiplier >= 1.0, "guard_multiplier must be >= 1")?;
        check(self.batch_size >= 1, "batch_size must be >= 1")?;
        check(!self.hidden_dims.is_empty(), "hidden_dims must be non-empty")?;
        check(self.learning_rate > 0.0, "learning_rate must be positive")?;
        check(self.log_interval >= 1, "log_interval must be >= 1")?;
        check(self.eval_episodes >= 1, "eval_episodes must be >= 1")?;
        check(self.buffer_capacity >= 1, "buffer_capacity must be >= 1")?;
        check(self.dormant_eval_batch >= 1, "dormant_eval_batch must be >= 1")?;
        Ok(())
    }

    pub fn critic_spec(&self, state_dim: usize, action_dim: usize) -> Result<MlpSpec> {
        MlpSpec::new(
            state_dim + action_dim,
            self.hidden_dims.clone(),
            1,
            self.activation,
            self.use_ln,
        )?
        .with_ln_eps(self.ln_eps)
    }

    pub fn actor_spec(&self, state_dim: usize, action_dim: usize) -> Result<MlpSpec> {
        MlpSpec::new(
            state_dim,
            self.hidden_dims.clone(),
            action_dim,
            Activation::Relu,
            false,
        )
    }
}

/// Online and target critics; all share one spec, targets start as copies.
#[derive(Debug, Clone)]
pub struct CriticEnsemble {
    pub online: Vec<MlpParams>,
    pub target: Vec<MlpParams>,
}

impl CriticEnsemble {
    pub fn init(spec: &MlpSpec, n_critics: usize, seed: u64) -> CriticEnsemble {
        let online: Vec<MlpParams> = (0..n_critics)
            .map(|i| nn::mlp_init(spec, crate::rng::derive_seed(seed, "critic_init", i as u64)))
            .collect();
        CriticEnsemble {
            target: online.clone(),
            online,
        }
    }

    pub fn len(&self) -> usize {
        self.online.len()
    }

    pub fn is_empty(&self) -> bool {
        self.online.is_empty()
    }
}

/// Deterministic policy: tanh of an MLP, so actions always land in the unit
/// box.
#[derive(Debug, Clone)]
pub struct ActorNet {
    pub mlp: MlpParams,
}

impl ActorNet {
    pub fn init(spec: &MlpSpec, seed: u64) -> ActorNet {
        ActorNet {
            mlp: nn::mlp_init(spec, seed),
        }
    }

    /// Pre-squash output and squashed action for a batch of states.
    pub fn forward_batch(&self, states: &Array2<f64>) -> Result<(Array2<f64>, Array2<f64>)> {
        let (z, _) = nn::mlp_forward_batch(&self.mlp, states, false)?;
        let a = z.mapv(f64::tanh);
        Ok((z, a))
    }
}

impl Policy for ActorNet {
    fn act(&self, state: &[f64]) -> Vec<f64> {
        let x = Array1::from_vec(state.to_vec());
        let (z, _) = nn::mlp_forward(&self.mlp, &x, false).expect("state dim matches actor spec");
        z.iter().map(|&v| v.tanh()).collect()
    }
}

/// One row per logging interval; fixed column order, append-only.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub step: usize,
    pub env_steps: usize,
    pub critic_loss: f64,
    pub pa_loss: f64,
    pub mean_q_data: f64,
    pub mean_q_infeasible: f64,
    pub actor_loss: f64,
    pub eval_return: f64,
    pub eval_goal_rate: f64,
    pub dormant_ratio: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub rows: Vec<LogRow>,
}

impl TrainLog {
    pub const COLUMNS: [&'static str; 10] = [
        "step",
        "env_steps",
        "critic_loss",
        "pa_loss",
        "mean_q_data",
        "mean_q_infeasible",
        "actor_loss",
        "eval_return",
        "eval_goal_rate",
        "dormant_ratio",
    ];

    pub fn push(&mut self, row: LogRow) {
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        s.push_str(&Self::COLUMNS.join(","));
        s.push('\n');
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                r.step,
                r.env_steps,
                r.critic_loss,
                r.pa_loss,
                r.mean_q_data,
                r.mean_q_infeasible,
                r.actor_loss,
                r.eval_return,
                r.eval_goal_rate,
                r.dormant_ratio
            ));
        }
        s
    }
}

/// Network bundle written by offline training and consumed by fine-tuning.
/// Serialized as one checkpoint file per network in a directory.
#[derive(Debug, Clone)]
pub struct CheckpointNets {
    pub actor: ActorNet,
    pub actor_target: ActorNet,
    pub critics: CriticEnsemble,
}

impl CheckpointNets {
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        checkpoint::save_mlp(&self.actor.mlp, &dir.join("actor.txt"))?;
        checkpoint::save_mlp(&self.actor_target.mlp, &dir.join("actor_target.txt"))?;
        for (i, (online, target)) in self
            .critics
            .online
            .iter()
            .zip(&self.critics.target)
            .enumerate()
        {
            checkpoint::save_mlp(online, &dir.join(format!("critic_{i:02}.txt")))?;
            checkpoint::save_mlp(target, &dir.join(format!("critic_target_{i:02}.txt")))?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<CheckpointNets> {
        let actor = ActorNet {
            mlp: checkpoint::load_mlp(&dir.join("actor.txt"))?,
        };
        let actor_target = ActorNet {
            mlp: checkpoint::load_mlp(&dir.join("actor_target.txt"))?,
        };
        let mut online = Vec::new();
        let mut target = Vec::new();
        for i in 0.. {
            let path = dir.join(format!("critic_{i:02}.txt"));
            if !path.exists() {
                break;
            }
            online.push(checkpoint::load_mlp(&path)?);
            target.push(checkpoint::load_mlp(&dir.join(format!("critic_target_{i:02}.txt")))?);
        }
        if online.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "no critic checkpoints found in {}",
                dir.display()
            )));
        }
        Ok(CheckpointNets {
            actor,
            actor_target,
            critics: CriticEnsemble { online, target },
        })
    }
}
