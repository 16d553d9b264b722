//! Scratch calibration harness (ignored by default). Run individual probes
//! with `cargo test -p pars-core --test calibrate -- --ignored --nocapture <name>`.

use ndarray::Array2;
use pars_core::data::{dataset_stats, TransitionDataset};
use pars_core::diagnostics::{max_q_probe, train_sarsa_q, MinEnsembleCritic, MlpCritic};
use pars_core::envs::{build_behavior, build_env, generate_offline_dataset, BehaviorBuild, Env, EnvBuild, RewardKind};
use pars_core::nn::{mlp_forward_batch, Activation, MlpSpec};
use pars_core::pars::{sample_infeasible, train_offline, ParsConfig};
use pars_core::rng;

fn line_build(reward: RewardKind) -> EnvBuild {
    let mut b = EnvBuild::default();
    b.id = "line_walk_1d".into();
    b.goal = vec![0.8];
    b.step_scale = match reward {
        RewardKind::SparseGoal => 0.1,
        RewardKind::Shaped => 1.0,
    };
    b.max_episode_steps = match reward {
        RewardKind::SparseGoal => 60,
        RewardKind::Shaped => 50,
    };
    b.reward = reward;
    b
}

fn line_dataset(reward: RewardKind, episodes: usize, seed: u64) -> (Box<dyn Env>, TransitionDataset) {
    let env = build_env(&line_build(reward)).unwrap();
    let behavior = build_behavior(&BehaviorBuild {
        kind: "clustered_noisy_expert".into(),
        centers: vec![vec![-0.6], vec![0.6]],
        noise: 0.05,
        episodes,
        mixture_random_prob: 0.5,
    })
    .unwrap();
    let ds = generate_offline_dataset(env.as_ref(), behavior.as_ref(), episodes, seed).unwrap();
    (env, ds)
}

fn pars_small() -> ParsConfig {
    ParsConfig {
        hidden_dims: vec![64, 64],
        batch_size: 128,
        max_gradient_steps: 4000,
        log_interval: 1000,
        eval_episodes: 5,
        alpha: 1.0,
        beta: 0.05,
        gamma: 0.99,
        guard_multiplier: 100.0,
        ..ParsConfig::default()
    }
}

#[test]
#[ignore]
fn cal_pa_pull() {
    for seed in 0..3u64 {
        let (env, ds) = line_dataset(RewardKind::Shaped, 60, seed);
        let cfg = pars_small();
        let t0 = std::time::Instant::now();
        let out = train_offline(&cfg, &ds, Some(env.as_ref()), seed).unwrap();
        let stats = dataset_stats(&ds).unwrap();
        let q_min = cfg.c_reward * stats.r_min / (1.0 - cfg.gamma);

        // fresh infeasible probes at dataset states
        let mut rng_probe = rng::stream(seed + 777, "probe");
        let n = 10_000;
        let a_inf = sample_infeasible(1, cfg.guard_multiplier, n, &mut rng_probe);
        let mut x = Array2::zeros((n, 2));
        for r in 0..n {
            x[(r, 0)] = ds.transitions[r % ds.len()].s[0];
            x[(r, 1)] = a_inf[(r, 0)];
        }
        let mut mean_dev = 0.0;
        for critic in &out.nets.critics.online {
            let (q, _) = mlp_forward_batch(critic, &x, false).unwrap();
            mean_dev += q.iter().map(|v| (v - q_min).abs()).sum::<f64>() / n as f64;
        }
        mean_dev /= out.nets.critics.online.len() as f64;

        // max data-action Q under the ensemble min
        let mut xd = Array2::zeros((ds.len(), 2));
        for (r, t) in ds.transitions.iter().enumerate() {
            xd[(r, 0)] = t.s[0];
            xd[(r, 1)] = t.a[0];
        }
        let mut max_q = f64::NEG_INFINITY;
        let per: Vec<_> = out
            .nets
            .critics
            .online
            .iter()
            .map(|c| mlp_forward_batch(c, &xd, false).unwrap().0)
            .collect();
        for r in 0..ds.len() {
            let qmin_r = per.iter().map(|q| q[(r, 0)]).fold(f64::INFINITY, f64::min);
            max_q = max_q.max(qmin_r);
        }
        let denom = max_q - q_min;
        println!(
            "seed {seed}: q_min {q_min:.3} max_data_q {max_q:.3} mean_dev {mean_dev:.4} ratio {:.4} (budget 0.05) [{:.1?}]",
            mean_dev / denom,
            t0.elapsed()
        );
    }
}

#[test]
#[ignore]
fn cal_maxq_probe() {
    for reward in [RewardKind::SparseGoal, RewardKind::Shaped] {
        for seed in 0..5u64 {
            let (_env, ds) = line_dataset(reward, 80, seed);
            let stats = dataset_stats(&ds).unwrap();
            let spec = MlpSpec::new(2, vec![64, 64], 1, Activation::Relu, false).unwrap();
            let t0 = std::time::Instant::now();
            let sarsa = train_sarsa_q(&ds, &spec, 0.9, 4000, seed).unwrap();
            let rep = max_q_probe(&MlpCritic(&sarsa), &ds, &[64, 64], 2000, seed).unwrap();
            println!(
                "{reward:?} seed {seed}: data_norm {:.3} sarsa_maxq_norm {:.3} [{:.1?}]",
                rep.mean_data_norm,
                rep.mean_maxq_norm,
                t0.elapsed()
            );
        }
    }
}

#[test]
#[ignore]
fn cal_maxq_pars_critic() {
    for seed in 0..5u64 {
        let (env, ds) = line_dataset(RewardKind::SparseGoal, 80, seed);
        let mut cfg = pars_small();
        cfg.c_reward = 100.0;
        cfg.gamma = 0.9;
        let out = train_offline(&cfg, &ds, Some(env.as_ref()), seed).unwrap();
        let rep = max_q_probe(
            &MinEnsembleCritic(&out.nets.critics.online),
            &ds,
            &[64, 64],
            2000,
            seed,
        )
        .unwrap();
        println!(
            "seed {seed}: data_norm {:.3} pars_maxq_norm {:.3}",
            rep.mean_data_norm, rep.mean_maxq_norm
        );
    }
}

#[test]
#[ignore]
fn cal_didactic() {
    use pars_core::didactic::{fit_regressor, region_stats, RegressionTask};
    use pars_core::diagnostics::ntk_similarity;

    let spec = |use_ln: bool| MlpSpec::new(2, vec![128, 128], 1, Activation::Relu, use_ln).unwrap();
    let steps = 4000;
    let grid_res = 41;

    let mut grid = Vec::new();
    let res = 21;
    for iy in 0..res {
        for ix in 0..res {
            grid.push(vec![
                -1.0 + 2.0 * ix as f64 / (res - 1) as f64,
                -1.0 + 2.0 * iy as f64 / (res - 1) as f64,
            ]);
        }
    }
    let ood_out = |p: &[f64]| p[0] * p[0] + p[1] * p[1] > 0.25;

    for seed in 0..5u64 {
        let t0 = std::time::Instant::now();
        let base = RegressionTask {
            batch_size: 128,
            ..RegressionTask::default()
        };
        let mut noln1 = base.clone();
        noln1.use_ln = false;
        let p_noln1 = fit_regressor(&noln1, &spec(false), steps, seed).unwrap();
        let s_noln1 = region_stats(&p_noln1, &noln1, grid_res).unwrap();

        let ln1 = base.clone();
        let p_ln1 = fit_regressor(&ln1, &spec(true), steps, seed).unwrap();
        let s_ln1 = region_stats(&p_ln1, &ln1, grid_res).unwrap();

        let mut ln100 = base.clone();
        ln100.c_reward = 100.0;
        let p_ln100 = fit_regressor(&ln100, &spec(true), steps, seed).unwrap();
        let s_ln100 = region_stats(&p_ln100, &ln100, grid_res).unwrap();

        let mut lnpa100 = ln100.clone();
        lnpa100.pa = true;
        let p_lnpa100 = fit_regressor(&lnpa100, &spec(true), steps, seed).unwrap();
        let s_lnpa100 = region_stats(&p_lnpa100, &lnpa100, grid_res).unwrap();

        let ntk1 = ntk_similarity(&p_ln1, &[0.32, -0.38], &grid).unwrap().mean_over(ood_out);
        let ntk100 = ntk_similarity(&p_ln100, &[0.32, -0.38], &grid).unwrap().mean_over(ood_out);

        println!(
            "seed {seed}: (a) noln max_ood {:.3} vs max_id {:.3} -> {} | (b) ln mean_ood c1 {:.3} c100 {:.3} -> {} | (c) lnpa {:.3} -> {} | ntk c1 {:.3} c100 {:.3} -> {} [{:.0?}]",
            s_noln1.max_ood_out, s_noln1.max_id, s_noln1.max_ood_out > s_noln1.max_id,
            s_ln1.mean_ood_out, s_ln100.mean_ood_out, s_ln100.mean_ood_out < s_ln1.mean_ood_out,
            s_lnpa100.mean_ood_out, s_lnpa100.mean_ood_out < s_ln100.mean_ood_out,
            ntk1, ntk100, ntk100 < ntk1,
            t0.elapsed()
        );
    }
}

fn maze_dataset(noise: f64, episodes: usize, seed: u64) -> (Box<dyn Env>, TransitionDataset) {
    let env = build_env(&EnvBuild::default()).unwrap();
    let behavior = build_behavior(&BehaviorBuild {
        noise,
        episodes,
        ..BehaviorBuild::default()
    })
    .unwrap();
    let ds = generate_offline_dataset(env.as_ref(), behavior.as_ref(), episodes, seed).unwrap();
    (env, ds)
}

fn maze_cfg(c: f64, ln: bool, pa: bool) -> ParsConfig {
    ParsConfig {
        c_reward: c,
        use_ln: ln,
        alpha: if pa { 0.1 } else { 0.0 },
        beta: 0.05,
        gamma: 0.995,
        hidden_dims: vec![64, 64],
        batch_size: 128,
        max_gradient_steps: 8000,
        log_interval: 2000,
        eval_episodes: 10,
        guard_multiplier: 100.0,
        ..ParsConfig::default()
    }
}

#[test]
#[ignore]
fn cal_maze_ablation() {
    for seed in 0..2u64 {
        let (env, ds) = maze_dataset(0.3, 150, seed);
        println!("seed {seed}: dataset {} transitions", ds.len());
        for (name, c, ln, pa) in [
            ("none_c1000", 1000.0, false, false),
            ("ln_c1000", 1000.0, true, false),
            ("lnpa_c1000", 1000.0, true, true),
            ("lnpa_c1", 1.0, true, true),
            ("ln_c1", 1.0, true, false),
        ] {
            let cfg = maze_cfg(c, ln, pa);
            let t0 = std::time::Instant::now();
            match train_offline(&cfg, &ds, Some(env.as_ref()), seed) {
                Ok(out) => {
                    let last = out.log.rows.last().unwrap();
                    println!(
                        "  {name}: goal {:.2} return {:.2} q {:.1} dormant {:.3} [{:.0?}]",
                        last.eval_goal_rate,
                        last.eval_return,
                        last.mean_q_data,
                        last.dormant_ratio,
                        t0.elapsed()
                    );
                }
                Err(e) => println!("  {name}: {e} [{:.0?}]", t0.elapsed()),
            }
        }
    }
}

#[test]
#[ignore]
fn cal_maze_bc_debug() {
    use pars_core::envs::{evaluate_policy, ExpertPolicy, Policy};
    let (env, ds) = maze_dataset(0.3, 150, 0);
    // how good is the data itself?
    let successes = ds.transitions.iter().filter(|t| t.done).count();
    println!("dataset: {} transitions, {} terminal (of 150 episodes)", ds.len(), successes);
    let expert = evaluate_policy(env.as_ref(), &ExpertPolicy(env.as_ref()), 10, 0).unwrap();
    println!("scripted expert goal rate {:.2}", expert.goal_rate);

    // BC-dominant training
    let mut cfg = maze_cfg(1.0, true, false);
    cfg.beta = 5.0;
    cfg.max_gradient_steps = 4000;
    let out = train_offline(&cfg, &ds, Some(env.as_ref()), 0).unwrap();
    let last = out.log.rows.last().unwrap();
    println!("bc-heavy: goal {:.2} return {:.2} actor_loss {:.3}", last.eval_goal_rate, last.eval_return, last.actor_loss);

    // trace one eval episode
    let mut s = env.reset(123);
    for step in 0..40 {
        let a = out.nets.actor.act(&s);
        let res = env.step(&s, &a).unwrap();
        if step % 5 == 0 {
            println!("  step {step}: s ({:.2},{:.2}) a ({:.2},{:.2})", s[0], s[1], a[0], a[1]);
        }
        s = res.s_next;
        if res.done {
            println!("  reached at {step}");
            break;
        }
    }
}

#[test]
#[ignore]
fn cal_maze_beta_sweep() {
    for (mix, noise) in [(0.3, 0.3)] {
        for seed in 0..2u64 {
            let env = build_env(&EnvBuild::default()).unwrap();
            let behavior = build_behavior(&BehaviorBuild {
                kind: "mixture".into(),
                noise,
                episodes: 150,
                mixture_random_prob: mix,
                ..BehaviorBuild::default()
            })
            .unwrap();
            let ds = generate_offline_dataset(env.as_ref(), behavior.as_ref(), 150, seed).unwrap();
            let done = ds.transitions.iter().filter(|t| t.done).count();
            println!("mix {mix} noise {noise} seed {seed}: {} transitions, {done}/150 success", ds.len());
            for beta in [0.2, 0.5] {
                for (name, c, ln, pa) in [
                    ("none_c1000", 1000.0, false, false),
                    ("ln_c1000", 1000.0, true, false),
                    ("lnpa_c1000", 1000.0, true, true),
                    ("lnpa_c1", 1.0, true, true),
                ] {
                    let mut cfg = maze_cfg(c, ln, pa);
                    cfg.beta = beta;
                    match train_offline(&cfg, &ds, Some(env.as_ref()), seed) {
                        Ok(out) => {
                            let last = out.log.rows.last().unwrap();
                            println!(
                                "  beta {beta} {name}: goal {:.2} dormant {:.3}",
                                last.eval_goal_rate, last.dormant_ratio
                            );
                        }
                        Err(e) => println!("  beta {beta} {name}: {e}"),
                    }
                }
            }
        }
    }
}

#[test]
#[ignore]
fn cal_actor_gradient_direction() {
    use pars_core::nn::{adam_step_in_place, AdamState, MlpParams};
    use pars_core::pars::{actor_loss_and_grad, ActorNet, CriticEnsemble, Phase};
    use pars_core::data::sampling::stack_batch;
    use pars_core::data::Transition;

    // critic Q(s, a) = a (picks out the action input); ascent must push the
    // actor's outputs toward +1
    let cfg = ParsConfig {
        beta: 0.0,
        hidden_dims: vec![8],
        use_ln: false,
        ..ParsConfig::default()
    };
    let critic_spec = cfg.critic_spec(1, 1).unwrap();
    let mut lin = MlpParams::zeros_like(&critic_spec);
    // hidden: pass-through of input 1 (the action) via relu with +bias trick:
    // unit 0 = relu(a + 2) ~ a + 2 for |a|<=1, output = unit0 - 2
    lin.layers[0].w[(0, 1)] = 1.0;
    lin.layers[0].b[0] = 2.0;
    lin.layers[1].w[(0, 0)] = 1.0;
    lin.layers[1].b[0] = -2.0;
    let critics = CriticEnsemble {
        online: vec![lin.clone(), lin.clone()],
        target: vec![lin.clone(), lin],
    };
    let actor_spec = cfg.actor_spec(1, 1).unwrap();
    let mut actor = ActorNet::init(&actor_spec, 0);
    let mut opt = AdamState::new(&actor_spec, 1e-2);
    let batch: Vec<Transition> = (0..16)
        .map(|i| Transition {
            s: vec![i as f64 / 16.0],
            a: vec![0.0],
            r: 0.0,
            s_next: vec![0.0],
            done: false,
        })
        .collect();
    let refs: Vec<&Transition> = batch.iter().collect();
    let stacked = stack_batch(&refs);
    let (_, before) = actor.forward_batch(&stacked.states).unwrap();
    for _ in 0..200 {
        let (_, grads) = actor_loss_and_grad(&cfg, &critics, &actor, &stacked, Phase::Offline, &mut rng::stream(0, "x")).unwrap();
        adam_step_in_place(&mut actor.mlp, &grads, &mut opt);
    }
    let (_, after) = actor.forward_batch(&stacked.states).unwrap();
    println!("mean action before {:.3} after {:.3} (should rise toward 1)", before.mean().unwrap(), after.mean().unwrap());
}

fn maze_build_v2() -> EnvBuild {
    let mut b = EnvBuild::default();
    b.step_scale = 0.08;
    b.goal_radius = 0.15;
    b.max_episode_steps = 150;
    b
}

#[test]
#[ignore]
fn cal_maze_v2() {
    for seed in 0..2u64 {
        let env = build_env(&maze_build_v2()).unwrap();
        let behavior = build_behavior(&BehaviorBuild {
            kind: "mixture".into(),
            noise: 0.3,
            episodes: 150,
            mixture_random_prob: 0.3,
            ..BehaviorBuild::default()
        })
        .unwrap();
        let ds = generate_offline_dataset(env.as_ref(), behavior.as_ref(), 150, seed).unwrap();
        let done = ds.transitions.iter().filter(|t| t.done).count();
        println!("seed {seed}: {} transitions, {done}/150 success", ds.len());
        for beta in [0.3, 1.0] {
            for (name, c, ln, pa) in [
                ("none_c1000", 1000.0, false, false),
                ("ln_c1000", 1000.0, true, false),
                ("lnpa_c1000", 1000.0, true, true),
                ("lnpa_c1", 1.0, true, true),
                ("ln_c1", 1.0, true, false),
            ] {
                let mut cfg = maze_cfg(c, ln, pa);
                cfg.gamma = 0.99;
                cfg.beta = beta;
                cfg.max_gradient_steps = 8000;
                let t0 = std::time::Instant::now();
                match train_offline(&cfg, &ds, Some(env.as_ref()), seed) {
                    Ok(out) => {
                        let last = out.log.rows.last().unwrap();
                        println!(
                            "  beta {beta} {name}: goal {:.2} q {:.1} dormant {:.3} [{:.0?}]",
                            last.eval_goal_rate, last.mean_q_data, last.dormant_ratio, t0.elapsed()
                        );
                    }
                    Err(e) => println!("  beta {beta} {name}: {e} [{:.0?}]", t0.elapsed()),
                }
            }
        }
    }
}
