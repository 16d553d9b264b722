//! Training loops and loss plumbing.

use ndarray::{concatenate, Array1, Array2, Axis};
use rand::seq::index::sample as index_sample;
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};

use super::{ActorNet, CheckpointNets, CriticEnsemble, LogRow, ParsConfig, RMinSource, TrainLog};
use crate::data::sampling::{mixed_sample, sample_batch, stack_batch, Batch};
use crate::data::{dataset_stats, DatasetStats, ReplayBuffer, Transition, TransitionDataset};
use crate::diagnostics::dormant_ratio;
use crate::envs::{evaluate_policy, Env, Policy};
use crate::error::{Error, Result};
use crate::nn::{
    adam_step_in_place, grad, mlp_forward_batch, soft_update_in_place, AdamState, MlpParams,
};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Offline,
    Online,
}

/// `Q_min = c_reward * r_min / (1 - gamma)`, with `r_min` taken from the
/// task or from the dataset according to the config.
pub fn compute_q_min(cfg: &ParsConfig, stats: &DatasetStats) -> Result<f64> {
    if cfg.gamma >= 1.0 {
        return Err(Error::config("gamma must be < 1 for Q_min to exist"));
    }
    let r_min = match cfg.r_min_source {
        RMinSource::Known => cfg.r_min_known.ok_or_else(|| {
            Error::config("r_min_source = known but no known r_min was provided")
        })?,
        RMinSource::Dataset => stats.r_min,
    };
    if !r_min.is_finite() {
        return Err(Error::InvalidArgument("r_min must be finite".into()));
    }
    Ok(cfg.c_reward * r_min / (1.0 - cfg.gamma))
}

/// One component of an infeasible action: maps u in [-1, 1) to
/// `(u - 1) * m` when negative and `(u + 1) * m` otherwise, so the image is
/// exactly [-2m, -m) u [m, 2m).
pub fn infeasible_component(u: f64, m: f64) -> f64 {
    if u < 0.0 {
        (u - 1.0) * m
    } else {
        (u + 1.0) * m
    }
}

/// Batch of actions drawn uniformly from the penalized region, one draw per
/// component.
pub fn sample_infeasible(action_dim: usize, m: f64, batch: usize, rng: &mut ChaCha12Rng) -> Array2<f64> {
    let mut data = Vec::with_capacity(batch * action_dim);
    for _ in 0..batch * action_dim {
        let u = rng.random::<f64>() * 2.0 - 1.0;
        data.push(infeasible_component(u, m));
    }
    Array2::from_shape_vec((batch, action_dim), data).expect("dims agree")
}

fn gaussian_noise(shape: (usize, usize), sigma: f64, clip: f64, rng: &mut ChaCha12Rng) -> Array2<f64> {
    if sigma == 0.0 {
        return Array2::zeros(shape);
    }
    let normal = Normal::new(0.0, sigma).expect("positive sigma");
    let mut data = Vec::with_capacity(shape.0 * shape.1);
    for _ in 0..shape.0 * shape.1 {
        data.push(normal.sample(rng).clamp(-clip, clip));
    }
    Array2::from_shape_vec(shape, data).expect("dims agree")
}

fn sorted_subset(n: usize, k: usize, rng: &mut ChaCha12Rng) -> Vec<usize> {
    let mut idx = index_sample(rng, n, k).into_vec();
    idx.sort_unstable();
    idx
}

/// Sum that does not depend on the order of its inputs: sort first. Used
/// for every reduction across the critic ensemble so that permuting critic
/// order cannot change a logged scalar even at the last ulp.
fn ordered_sum(vals: &[f64]) -> f64 {
    let mut v = vals.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite ensemble scalars"));
    v.iter().sum()
}

fn concat_sa(states: &Array2<f64>, actions: &Array2<f64>) -> Array2<f64> {
    concatenate(Axis(1), &[states.view(), actions.view()]).expect("row counts agree")
}

/// TD target: next action from the target actor plus clipped smoothing
/// noise, value from the min over a random subset of target critics,
/// discounted and cut at terminals:
/// `y = c r + (1 - done) gamma min_{i in S} Q_i(s', a')`.
pub fn td_target(
    cfg: &ParsConfig,
    critics: &CriticEnsemble,
    actor_target: &ActorNet,
    batch: &Batch,
    low: &[f64],
    high: &[f64],
    rng: &mut ChaCha12Rng,
) -> Result<Array1<f64>> {
    let b = batch.states.nrows();
    let (_, mut a_next) = actor_target.forward_batch(&batch.next_states)?;
    let noise = gaussian_noise(a_next.dim(), cfg.policy_noise, cfg.noise_clip, rng);
    a_next += &noise;
    for mut row in a_next.rows_mut() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = v.clamp(low[j], high[j]);
        }
    }
    let x_next = concat_sa(&batch.next_states, &a_next);

    let q_all: Vec<Array2<f64>> = critics
        .target
        .iter()
        .map(|c| mlp_forward_batch(c, &x_next, false).map(|(q, _)| q))
        .collect::<Result<_>>()?;

    let min_over = |subset: &[usize], row: usize| -> f64 {
        subset
            .iter()
            .map(|&i| q_all[i][(row, 0)])
            .fold(f64::INFINITY, f64::min)
    };

    let mut q_next = Array1::zeros(b);
    if cfg.subset_per_sample {
        for r in 0..b {
            let subset = sorted_subset(critics.len(), cfg.target_subset, rng);
            q_next[r] = min_over(&subset, r);
        }
    } else {
        let subset = sorted_subset(critics.len(), cfg.target_subset, rng);
        for r in 0..b {
            q_next[r] = min_over(&subset, r);
        }
    }

    let mut y = Array1::zeros(b);
    for r in 0..b {
        y[r] = cfg.c_reward * batch.rewards[r] + (1.0 - batch.done[r]) * cfg.gamma * q_next[r];
    }
    Ok(y)
}

/// Per-critic loss components for one gradient step.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticLosses {
    /// mean squared TD error per critic
    pub td: Vec<f64>,
    /// mean squared distance of infeasible-action values from `Q_min`, per critic
    pub pa: Vec<f64>,
    /// mean Q over (critics x batch) at dataset actions
    pub mean_q_data: f64,
    /// mean Q over (critics x batch) at the sampled infeasible actions
    pub mean_q_infeasible: f64,
}

/// Loss and gradients for every critic: squared TD error plus
/// `alpha * (Q(s, a_inf) - Q_min)^2`, infeasible actions paired with dataset
/// states. The penalty term contributes gradients only when `alpha > 0`,
/// but its value is always reported.
pub fn critic_loss_and_grad(
    critics: &CriticEnsemble,
    targets: &Array1<f64>,
    batch: &Batch,
    infeasible: &Array2<f64>,
    q_min: f64,
    alpha: f64,
) -> Result<(CriticLosses, Vec<MlpParams>)> {
    let b = batch.states.nrows();
    let x_data = concat_sa(&batch.states, &batch.actions);
    let x_inf = concat_sa(&batch.states, infeasible);

    let mut td = Vec::with_capacity(critics.len());
    let mut pa = Vec::with_capacity(critics.len());
    let mut grads_out = Vec::with_capacity(critics.len());
    let mut q_data_means = Vec::with_capacity(critics.len());
    let mut q_inf_means = Vec::with_capacity(critics.len());

    for critic in &critics.online {
        let (q, trace) = mlp_forward_batch(critic, &x_data, true)?;
        let trace = trace.expect("trace requested");
        let mut td_loss = 0.0;
        let mut q_sum = 0.0;
        let mut gout = Array2::zeros((b, 1));
        for r in 0..b {
            let diff = q[(r, 0)] - targets[r];
            td_loss += diff * diff;
            gout[(r, 0)] = 2.0 * diff / b as f64;
            q_sum += q[(r, 0)];
        }
        td_loss /= b as f64;
        let (mut grads, _) = grad::backward_sum(critic, &trace, &gout);

        let (q_inf, trace_inf) = mlp_forward_batch(critic, &x_inf, true)?;
        let trace_inf = trace_inf.expect("trace requested");
        let mut pa_loss = 0.0;
        let mut q_inf_sum = 0.0;
        for r in 0..b {
            let diff = q_inf[(r, 0)] - q_min;
            pa_loss += diff * diff;
            q_inf_sum += q_inf[(r, 0)];
        }
        pa_loss /= b as f64;
        if alpha > 0.0 {
            let mut gout_inf = Array2::zeros((b, 1));
            for r in 0..b {
                gout_inf[(r, 0)] = 2.0 * alpha * (q_inf[(r, 0)] - q_min) / b as f64;
            }
            let (pa_grads, _) = grad::backward_sum(critic, &trace_inf, &gout_inf);
            grad::axpy_params(&mut grads, 1.0, &pa_grads);
        }

        td.push(td_loss);
        pa.push(pa_loss);
        q_data_means.push(q_sum / b as f64);
        q_inf_means.push(q_inf_sum / b as f64);
        grads_out.push(grads);
    }

    let n = critics.len() as f64;
    Ok((
        CriticLosses {
            td,
            pa,
            mean_q_data: ordered_sum(&q_data_means) / n,
            mean_q_infeasible: ordered_sum(&q_inf_means) / n,
        },
        grads_out,
    ))
}

/// Actor loss and gradient.
///
/// The policy value is the min over all critics offline and the mean over a
/// random subset online; the loss is `-mean(Q_pi) / Z + beta mean ||pi(s) - a||^2`
/// with `Z` the detached batch mean |Q_pi| (when normalization is enabled).
pub fn actor_loss_and_grad(
    cfg: &ParsConfig,
    critics: &CriticEnsemble,
    actor: &ActorNet,
    batch: &Batch,
    phase: Phase,
    rng: &mut ChaCha12Rng,
) -> Result<(f64, MlpParams)> {
    let b = batch.states.nrows();
    let ad = batch.actions.ncols();
    let beta = match phase {
        Phase::Offline => cfg.beta,
        Phase::Online => cfg.beta_online,
    };

    let (_, actor_trace) = mlp_forward_batch(&actor.mlp, &batch.states, true)?;
    let actor_trace = actor_trace.expect("trace requested");
    let a_pi = actor_trace.output.mapv(f64::tanh);
    let x = concat_sa(&batch.states, &a_pi);

    // which critics contribute, and with what weight per sample
    let selected: Vec<usize> = match phase {
        Phase::Offline => (0..critics.len()).collect(),
        Phase::Online => sorted_subset(critics.len(), cfg.actor_subset, rng),
    };
    let mut q_sel = Vec::with_capacity(selected.len());
    let mut traces = Vec::with_capacity(selected.len());
    for &i in &selected {
        let (q, trace) = mlp_forward_batch(&critics.online[i], &x, true)?;
        q_sel.push(q);
        traces.push(trace.expect("trace requested"));
    }

    // per-sample policy value and per-(critic, sample) route weights
    let mut q_pi = Array1::zeros(b);
    let mut weights = Array2::zeros((selected.len(), b));
    match phase {
        Phase::Offline => {
            for r in 0..b {
                let mut best = 0usize;
                let mut best_q = q_sel[0][(r, 0)];
                for (k, q) in q_sel.iter().enumerate().skip(1) {
                    if q[(r, 0)] < best_q {
                        best_q = q[(r, 0)];
                        best = k;
                    }
                }
                q_pi[r] = best_q;
                weights[(best, r)] = 1.0;
            }
        }
        Phase::Online => {
            let k_inv = 1.0 / selected.len() as f64;
            for r in 0..b {
                let mean: f64 = q_sel.iter().map(|q| q[(r, 0)]).sum::<f64>() * k_inv;
                q_pi[r] = mean;
                for k in 0..selected.len() {
                    weights[(k, r)] = k_inv;
                }
            }
        }
    }

    let z_norm = if cfg.actor_q_normalization {
        (q_pi.iter().map(|v| v.abs()).sum::<f64>() / b as f64).max(1e-12)
    } else {
        1.0
    };

    // loss value
    let q_term = -q_pi.sum() / b as f64 / z_norm;
    let mut bc_term = 0.0;
    for r in 0..b {
        for c in 0..ad {
            let d = a_pi[(r, c)] - batch.actions[(r, c)];
            bc_term += d * d;
        }
    }
    bc_term = beta * bc_term / b as f64;
    let loss = q_term + bc_term;

    // dL/da_pi: critic route gradients (critic params frozen) + BC pull
    let coef = -1.0 / (b as f64 * z_norm);
    let mut d_api = Array2::zeros((b, ad));
    for (k, &i) in selected.iter().enumerate() {
        let mut gout = Array2::zeros((b, 1));
        let mut any = false;
        for r in 0..b {
            if weights[(k, r)] != 0.0 {
                gout[(r, 0)] = coef * weights[(k, r)];
                any = true;
            }
        }
        if !any {
            continue;
        }
        let (_, dinput) = grad::backward_sum(&critics.online[i], &traces[k], &gout);
        let sd = batch.states.ncols();
        for r in 0..b {
            for c in 0..ad {
                d_api[(r, c)] += dinput[(r, sd + c)];
            }
        }
    }
    if beta > 0.0 {
        let scale = 2.0 * beta / b as f64;
        for r in 0..b {
            for c in 0..ad {
                d_api[(r, c)] += scale * (a_pi[(r, c)] - batch.actions[(r, c)]);
            }
        }
    }

    // through the tanh squash
    let mut d_z = d_api;
    d_z.zip_mut_with(&a_pi, |g, &a| *g *= 1.0 - a * a);
    let (grads, _) = grad::backward_sum(&actor.mlp, &actor_trace, &d_z);
    Ok((loss, grads))
}

/// Everything a finished run hands back.
#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub nets: CheckpointNets,
    pub log: TrainLog,
}

struct Trainer<'a> {
    cfg: &'a ParsConfig,
    q_min: f64,
    guard_threshold: f64,
    low: Vec<f64>,
    high: Vec<f64>,
    actor: ActorNet,
    actor_target: ActorNet,
    critics: CriticEnsemble,
    actor_opt: AdamState,
    critic_opts: Vec<AdamState>,
    rng_target: ChaCha12Rng,
    rng_infeasible: ChaCha12Rng,
    rng_actor_subset: ChaCha12Rng,
    updates: usize,
    last_actor_loss: f64,
    last_losses: Option<CriticLosses>,
}

impl<'a> Trainer<'a> {
    fn update(&mut self, batch: &[&Transition], phase: Phase) -> Result<()> {
        let cfg = self.cfg;
        let stacked = stack_batch(batch);
        let alpha = match phase {
            Phase::Offline => cfg.alpha,
            Phase::Online => cfg.alpha_online,
        };
        let targets = td_target(
            cfg,
            &self.critics,
            &self.actor_target,
            &stacked,
            &self.low,
            &self.high,
            &mut self.rng_target,
        )?;
        let infeasible = sample_infeasible(
            stacked.actions.ncols(),
            cfg.guard_multiplier,
            stacked.states.nrows(),
            &mut self.rng_infeasible,
        );
        let (losses, grads) =
            critic_loss_and_grad(&self.critics, &targets, &stacked, &infeasible, self.q_min, alpha)?;
        for ((critic, g), opt) in self
            .critics
            .online
            .iter_mut()
            .zip(&grads)
            .zip(&mut self.critic_opts)
        {
            adam_step_in_place(critic, g, opt);
        }
        for (target, online) in self.critics.target.iter_mut().zip(&self.critics.online) {
            soft_update_in_place(target, online, cfg.tau);
        }

        self.updates += 1;
        if self.updates % cfg.policy_delay == 0 {
            let (actor_loss, agrads) = actor_loss_and_grad(
                cfg,
                &self.critics,
                &self.actor,
                &stacked,
                phase,
                &mut self.rng_actor_subset,
            )?;
            adam_step_in_place(&mut self.actor.mlp, &agrads, &mut self.actor_opt);
            soft_update_in_place(&mut self.actor_target.mlp, &self.actor.mlp, cfg.tau);
            self.last_actor_loss = actor_loss;
        }

        if self.guard_threshold.is_finite() && losses.mean_q_data.abs() > self.guard_threshold {
            return Err(Error::Divergence {
                step: self.updates,
                mean_abs_q: losses.mean_q_data.abs(),
                threshold: self.guard_threshold,
            });
        }
        self.last_losses = Some(losses);
        Ok(())
    }

    fn log_row(
        &self,
        step: usize,
        env_steps: usize,
        eval_env: Option<&dyn Env>,
        dormant_inputs: &Array2<f64>,
        seed: u64,
    ) -> Result<LogRow> {
        let losses = self.last_losses.as_ref();
        let n = self.critics.len() as f64;
        let (eval_return, eval_goal_rate) = match eval_env {
            Some(env) => {
                let rep = evaluate_policy(
                    env,
                    &self.actor,
                    self.cfg.eval_episodes,
                    rng::derive_seed(seed, "eval", step as u64),
                )?;
                (rep.mean_return, rep.goal_rate)
            }
            None => (f64::NAN, f64::NAN),
        };
        // averaged over the ensemble with order-independent reductions so
        // critic order cannot leak into logs
        let mut dorm = Vec::with_capacity(self.critics.len());
        for critic in &self.critics.online {
            dorm.push(dormant_ratio(critic, dormant_inputs, 0.0)?.dormant_ratio);
        }
        Ok(LogRow {
            step,
            env_steps,
            critic_loss: losses.map_or(f64::NAN, |l| ordered_sum(&l.td) / n),
            pa_loss: losses.map_or(f64::NAN, |l| ordered_sum(&l.pa) / n),
            mean_q_data: losses.map_or(f64::NAN, |l| l.mean_q_data),
            mean_q_infeasible: losses.map_or(f64::NAN, |l| l.mean_q_infeasible),
            actor_loss: self.last_actor_loss,
            eval_return,
            eval_goal_rate,
            dormant_ratio: ordered_sum(&dorm) / n,
        })
    }
}

/// Divergence guard: training aborts when the batch-mean |Q| exceeds
/// `1e3 * c_reward * max(|r_min|, |r_max|) / (1 - gamma)`. Tasks whose
/// rewards are identically zero get an infinite (disabled) guard.
fn divergence_threshold(cfg: &ParsConfig, stats: &DatasetStats) -> f64 {
    let max_abs_r = stats.r_min.abs().max(stats.r_max.abs());
    if max_abs_r == 0.0 {
        return f64::INFINITY;
    }
    1e3 * (cfg.c_reward * max_abs_r) / (1.0 - cfg.gamma)
}

fn dormant_input_matrix(ds: &TransitionDataset, n: usize) -> Array2<f64> {
    let rows = n.min(ds.len());
    let cols = ds.state_dim + ds.action_dim;
    let mut x = Array2::zeros((rows, cols));
    for r in 0..rows {
        let t = &ds.transitions[r];
        for (c, &v) in t.s.iter().chain(&t.a).enumerate() {
            x[(r, c)] = v;
        }
    }
    x
}

fn build_trainer<'a>(
    cfg: &'a ParsConfig,
    dataset: &TransitionDataset,
    nets: Option<CheckpointNets>,
    seed: u64,
    stream_prefix: &str,
) -> Result<(Trainer<'a>, Array2<f64>)> {
    cfg.validate()?;
    dataset.validate()?;
    if dataset.is_empty() {
        return Err(Error::EmptySource("training dataset"));
    }
    let stats = dataset_stats(dataset)?;
    let q_min = compute_q_min(cfg, &stats)?;
    let guard_threshold = divergence_threshold(cfg, &stats);
    let (sd, ad) = (dataset.state_dim, dataset.action_dim);

    let nets = match nets {
        Some(n) => n,
        None => {
            let critic_spec = cfg.critic_spec(sd, ad)?;
            let actor_spec = cfg.actor_spec(sd, ad)?;
            let actor = ActorNet::init(&actor_spec, rng::derive_seed(seed, "actor_init", 0));
            CheckpointNets {
                actor_target: actor.clone(),
                actor,
                critics: CriticEnsemble::init(&critic_spec, cfg.n_critics, seed),
            }
        }
    };
    if nets.critics.len() != cfg.n_critics {
        return Err(Error::config(format!(
            "checkpoint has {} critics but the config asks for {}",
            nets.critics.len(),
            cfg.n_critics
        )));
    }

    let critic_opts = nets
        .critics
        .online
        .iter()
        .map(|c| AdamState::new(&c.spec, cfg.learning_rate))
        .collect();
    let actor_opt = AdamState::new(&nets.actor.mlp.spec, cfg.learning_rate);
    let dormant_inputs = dormant_input_matrix(dataset, cfg.dormant_eval_batch);

    Ok((
        Trainer {
            cfg,
            q_min,
            guard_threshold,
            low: dataset.feasible_low.clone(),
            high: dataset.feasible_high.clone(),
            actor: nets.actor,
            actor_target: nets.actor_target,
            critics: nets.critics,
            actor_opt,
            critic_opts,
            rng_target: rng::stream(seed, &format!("{stream_prefix}_target")),
            rng_infeasible: rng::stream(seed, &format!("{stream_prefix}_infeasible")),
            rng_actor_subset: rng::stream(seed, &format!("{stream_prefix}_actor_subset")),
            updates: 0,
            last_actor_loss: f64::NAN,
            last_losses: None,
        },
        dormant_inputs,
    ))
}

/// Offline training: `max_gradient_steps` critic updates on uniform batches,
/// an actor update every `policy_delay` steps, target soft updates every
/// step, one log row per `log_interval`.
pub fn train_offline(
    cfg: &ParsConfig,
    dataset: &TransitionDataset,
    eval_env: Option<&dyn Env>,
    seed: u64,
) -> Result<TrainOutput> {
    let (mut trainer, dormant_inputs) = build_trainer(cfg, dataset, None, seed, "offline")?;
    let mut rng_batch = rng::stream(seed, "offline_batch");
    let mut log = TrainLog::default();

    for step in 0..cfg.max_gradient_steps {
        let batch = sample_batch(dataset, cfg.batch_size, &mut rng_batch)?;
        trainer.update(&batch, Phase::Offline)?;
        let last = step + 1 == cfg.max_gradient_steps;
        if (step + 1) % cfg.log_interval == 0 || last {
            log.push(trainer.log_row(step + 1, 0, eval_env, &dormant_inputs, seed)?);
        }
    }

    Ok(TrainOutput {
        nets: CheckpointNets {
            actor: trainer.actor,
            actor_target: trainer.actor_target,
            critics: trainer.critics,
        },
        log,
    })
}

/// Online fine-tuning from a checkpoint: act with exploration noise, store
/// the transition, then run `utd_ratio` gradient updates on mixed
/// offline/online batches. The penalty stays active iff `alpha_online > 0`.
pub fn finetune_online(
    cfg: &ParsConfig,
    nets: CheckpointNets,
    env: &dyn Env,
    dataset: &TransitionDataset,
    seed: u64,
) -> Result<TrainOutput> {
    let (mut trainer, dormant_inputs) = build_trainer(cfg, dataset, Some(nets), seed, "online")?;
    let mut rng_batch = rng::stream(seed, "online_batch");
    let mut rng_explore = rng::stream(seed, "online_explore");
    let mut buffer = ReplayBuffer::new(cfg.buffer_capacity);
    let mut log = TrainLog::default();

    let mut episode: u64 = 0;
    let mut ep_steps = 0usize;
    let mut state = env.reset(rng::derive_seed(seed, "online_reset", episode));
    let explore = if cfg.exploration_noise > 0.0 {
        Some(Normal::new(0.0, cfg.exploration_noise).expect("positive sigma"))
    } else {
        None
    };

    for env_step in 0..cfg.online_steps {
        let mut action = trainer.actor.act(&state);
        if let Some(n) = &explore {
            for (j, a) in action.iter_mut().enumerate() {
                *a = (*a + n.sample(&mut rng_explore)).clamp(trainer.low[j], trainer.high[j]);
            }
        }
        let res = env.step(&state, &action)?;
        buffer.push(Transition {
            s: state.clone(),
            a: action,
            r: res.r,
            s_next: res.s_next.clone(),
            done: res.done,
        });
        ep_steps += 1;
        if res.done || ep_steps >= env.spec().max_episode_steps {
            episode += 1;
            ep_steps = 0;
            state = env.reset(rng::derive_seed(seed, "online_reset", episode));
        } else {
            state = res.s_next;
        }

        for _ in 0..cfg.utd_ratio {
            let batch = mixed_sample(
                dataset,
                &buffer,
                cfg.offline_fraction,
                cfg.batch_size,
                &mut rng_batch,
            )?;
            trainer.update(&batch, Phase::Online)?;
        }

        let last = env_step + 1 == cfg.online_steps;
        if (env_step + 1) % cfg.log_interval == 0 || last {
            log.push(trainer.log_row(trainer.updates, env_step + 1, Some(env), &dormant_inputs, seed)?);
        }
    }

    Ok(TrainOutput {
        nets: CheckpointNets {
            actor: trainer.actor,
            actor_target: trainer.actor_target,
            critics: trainer.critics,
        },
        log,
    })
}
