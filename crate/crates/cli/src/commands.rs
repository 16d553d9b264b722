//! Subcommand bodies. Every artifact is deterministic given the resolved
//! config; wall-clock time only ever lands in the manifest.

use anyhow::{Context, Result};
use ndarray::Array2;
use rayon::prelude::*;

use pars_core::config::RunConfig;
use pars_core::data::{dataset_stats, io as data_io, TransitionDataset};
use pars_core::diagnostics::{
    classify_ood, dormant_ratio, max_q_probe, ntk_similarity, train_sarsa_q, MaxQReport,
    MinEnsembleCritic, MlpCritic, RegionLabel,
};
use pars_core::didactic::{
    self, fit_regressor, grid_predictions, region_stats, training_mse, RegressionTask,
};
use pars_core::envs::{build_behavior, build_env, generate_offline_dataset, Env};
use pars_core::error::Error as CoreError;
use pars_core::nn::{Activation, MlpSpec};
use pars_core::pars::{finetune_online, train_offline as core_train_offline, CheckpointNets, ParsConfig, RMinSource, TrainOutput};
use pars_core::report::{fmt_f64, write_csv, write_heatmap_svg};
use pars_core::rng;
use pars_core::tabular::{build_random_mdp, fixed_point_iterate, verify_contraction};

use crate::runner::RunContext;

fn load_dataset(ctx: &RunContext) -> Result<TransitionDataset> {
    let path = ctx.data_path()?;
    data_io::load_dataset(path).with_context(|| format!("loading dataset {}", path.display()))
}

fn build_eval_env(cfg: &RunConfig) -> Result<Box<dyn Env>> {
    Ok(build_env(&cfg.env)?)
}

/// Fill `r_min_known` from the environment when the config asks for the
/// known source but does not state the value.
fn resolve_r_min(pars: &mut ParsConfig, env: &dyn Env) {
    if pars.r_min_source == RMinSource::Known && pars.r_min_known.is_none() {
        pars.r_min_known = Some(env.known_r_min());
    }
}

fn write_stats_csv(ctx: &mut RunContext, name: &str, ds: &TransitionDataset) -> Result<()> {
    let stats = dataset_stats(ds)?;
    let rows = vec![
        vec!["r_min".into(), fmt_f64(stats.r_min)],
        vec!["r_max".into(), fmt_f64(stats.r_max)],
        vec!["mean_action_norm".into(), fmt_f64(stats.mean_action_norm)],
        vec!["max_possible_norm".into(), fmt_f64(stats.max_possible_norm)],
        vec!["transitions".into(), ds.len().to_string()],
    ];
    write_csv(&ctx.artifact(name), &["metric", "value"], &rows)?;
    Ok(())
}

pub fn gen_data(ctx: &mut RunContext) -> Result<()> {
    let env = build_eval_env(&ctx.cfg)?;
    let behavior = build_behavior(&ctx.cfg.behavior)?;
    let ds = generate_offline_dataset(
        env.as_ref(),
        behavior.as_ref(),
        ctx.cfg.behavior.episodes,
        ctx.cfg.seed,
    )?;
    let stats = dataset_stats(&ds)?;
    data_io::save_dataset(&ds, &ctx.artifact("dataset.txt"))?;
    write_stats_csv(ctx, "dataset_stats.csv", &ds)?;
    ctx.note(format!(
        "{} transitions, mean normalized action norm {:.3}",
        ds.len(),
        stats.mean_action_norm
    ));
    Ok(())
}

fn write_train_outputs(ctx: &mut RunContext, out: &TrainOutput) -> Result<()> {
    std::fs::write(ctx.artifact("train_log.csv"), out.log.to_csv())?;
    let ckpt_dir = ctx.path("checkpoint");
    out.nets.save(&ckpt_dir)?;
    ctx.artifact("checkpoint/actor.txt");
    ctx.artifact("checkpoint/actor_target.txt");
    for i in 0..out.nets.critics.len() {
        ctx.artifact(&format!("checkpoint/critic_{i:02}.txt"));
        ctx.artifact(&format!("checkpoint/critic_target_{i:02}.txt"));
    }
    Ok(())
}

pub fn train_offline(ctx: &mut RunContext) -> Result<()> {
    let ds = load_dataset(ctx)?;
    let env = build_eval_env(&ctx.cfg)?;
    let mut pars = ctx.cfg.pars.clone();
    resolve_r_min(&mut pars, env.as_ref());
    let out = core_train_offline(&pars, &ds, Some(env.as_ref()), ctx.cfg.seed)?;
    write_train_outputs(ctx, &out)?;
    if let Some(last) = out.log.rows.last() {
        ctx.note(format!(
            "final eval return {:.3}, goal rate {:.2}",
            last.eval_return, last.eval_goal_rate
        ));
    }
    Ok(())
}

pub fn finetune(ctx: &mut RunContext) -> Result<()> {
    let ds = load_dataset(ctx)?;
    let env = build_eval_env(&ctx.cfg)?;
    let ckpt_dir = ctx.checkpoint.clone().context("finetune needs --checkpoint")?;
    let nets = CheckpointNets::load(&ckpt_dir)?;
    let mut pars = ctx.cfg.pars.clone();
    resolve_r_min(&mut pars, env.as_ref());
    let out = finetune_online(&pars, nets, env.as_ref(), &ds, ctx.cfg.seed)?;
    write_train_outputs(ctx, &out)?;
    if let Some(last) = out.log.rows.last() {
        ctx.note(format!(
            "final eval return {:.3}, goal rate {:.2}",
            last.eval_return, last.eval_goal_rate
        ));
    }
    Ok(())
}

fn region_scan(ctx: &mut RunContext, ds: &TransitionDataset) -> Result<()> {
    if ds.action_dim > 2 {
        // the exact 3-d test enumerates planes and is capped to small sets;
        // whole-dataset scans stay 1-d/2-d
        return Ok(());
    }
    let action_set: Vec<Vec<f64>> = ds.transitions.iter().map(|t| t.a.clone()).collect();
    let diag: f64 = ds
        .feasible_low
        .iter()
        .zip(&ds.feasible_high)
        .map(|(lo, hi)| (hi - lo) * (hi - lo))
        .sum::<f64>()
        .sqrt();
    let eps_id = ctx.cfg.diagnostics.eps_id_fraction * diag;
    let res = ctx.cfg.diagnostics.ood_grid_res;
    let mut queries = Vec::new();
    match ds.action_dim {
        1 => {
            for i in 0..res {
                let x = ds.feasible_low[0]
                    + (ds.feasible_high[0] - ds.feasible_low[0]) * i as f64 / (res - 1) as f64;
                queries.push(vec![x]);
            }
        }
        _ => {
            for iy in 0..res {
                for ix in 0..res {
                    let x = ds.feasible_low[0]
                        + (ds.feasible_high[0] - ds.feasible_low[0]) * ix as f64 / (res - 1) as f64;
                    let y = ds.feasible_low[1]
                        + (ds.feasible_high[1] - ds.feasible_low[1]) * iy as f64 / (res - 1) as f64;
                    queries.push(vec![x, y]);
                }
            }
        }
    }
    let labels = classify_ood(&action_set, &queries, eps_id)?;
    let mut rows = Vec::with_capacity(queries.len());
    for (q, l) in queries.iter().zip(&labels) {
        let mut row: Vec<String> = q.iter().map(|v| fmt_f64(*v)).collect();
        while row.len() < 2 {
            row.push(String::new());
        }
        row.push(l.name().to_string());
        rows.push(row);
    }
    write_csv(&ctx.artifact("ood_regions.csv"), &["a0", "a1", "label"], &rows)?;
    let count = |want: RegionLabel| labels.iter().filter(|&&l| l == want).count();
    let summary = vec![
        vec!["id".into(), count(RegionLabel::Id).to_string()],
        vec!["ood_in".into(), count(RegionLabel::OodIn).to_string()],
        vec!["ood_out".into(), count(RegionLabel::OodOut).to_string()],
    ];
    write_csv(&ctx.artifact("ood_summary.csv"), &["label", "count"], &summary)?;
    Ok(())
}

fn write_maxq_csv(ctx: &mut RunContext, name: &str, rep: &MaxQReport) -> Result<()> {
    let rows = vec![
        vec!["mean_data_norm".into(), fmt_f64(rep.mean_data_norm)],
        vec!["mean_maxq_norm".into(), fmt_f64(rep.mean_maxq_norm)],
        vec!["max_possible_norm".into(), fmt_f64(rep.max_possible_norm)],
    ];
    write_csv(&ctx.artifact(name), &["metric", "value"], &rows)?;
    Ok(())
}

pub fn diagnose(ctx: &mut RunContext) -> Result<()> {
    let ds = load_dataset(ctx)?;
    write_stats_csv(ctx, "dataset_stats.csv", &ds)?;
    region_scan(ctx, &ds)?;

    let d = ctx.cfg.diagnostics.clone();
    let spec = MlpSpec::new(
        ds.state_dim + ds.action_dim,
        d.probe_hidden.clone(),
        1,
        Activation::Relu,
        false,
    )?;
    let sarsa = train_sarsa_q(&ds, &spec, d.sarsa_gamma, d.sarsa_steps, ctx.cfg.seed)?;
    let rep = max_q_probe(&MlpCritic(&sarsa), &ds, &d.probe_hidden, d.maxq_steps, ctx.cfg.seed)?;
    write_maxq_csv(ctx, "maxq_sarsa.csv", &rep)?;
    ctx.note(format!(
        "sarsa probe: data norm {:.3}, max-Q norm {:.3}",
        rep.mean_data_norm, rep.mean_maxq_norm
    ));

    // dormant statistics of the probe critic on dataset inputs
    let n = d.dormant_batch.min(ds.len());
    let mut inputs = Array2::zeros((n, ds.state_dim + ds.action_dim));
    for r in 0..n {
        let t = &ds.transitions[r];
        for (c, &v) in t.s.iter().chain(&t.a).enumerate() {
            inputs[(r, c)] = v;
        }
    }
    let dorm = dormant_ratio(&sarsa, &inputs, d.dormant_threshold)?;
    let mut rows: Vec<Vec<String>> = dorm
        .per_layer
        .iter()
        .enumerate()
        .map(|(i, (dormant, total))| vec![format!("layer_{i}"), dormant.to_string(), total.to_string()])
        .collect();
    rows.push(vec![
        "ratio".into(),
        fmt_f64(dorm.dormant_ratio),
        String::new(),
    ]);
    write_csv(&ctx.artifact("dormant_sarsa.csv"), &["layer", "dormant", "total"], &rows)?;

    if let Some(ckpt) = ctx.checkpoint.clone() {
        let nets = CheckpointNets::load(&ckpt)?;
        let rep = max_q_probe(
            &MinEnsembleCritic(&nets.critics.online),
            &ds,
            &d.probe_hidden,
            d.maxq_steps,
            ctx.cfg.seed,
        )?;
        write_maxq_csv(ctx, "maxq_checkpoint.csv", &rep)?;
        ctx.note(format!("checkpoint probe: max-Q norm {:.3}", rep.mean_maxq_norm));
    }
    Ok(())
}

/// Panel file stem: dataset kind, normalization, activation, reward scale,
/// seed.
fn panel_stem(task: &RegressionTask, seed: u64) -> String {
    format!(
        "{}_{}_{}_c{}_s{}",
        task.kind.name(),
        if task.use_ln { if task.pa { "ln_pa" } else { "ln" } } else if task.pa { "pa" } else { "noln" },
        task.activation.name(),
        fmt_f64(task.c_reward),
        seed
    )
}

fn emit_panel(ctx: &mut RunContext, task: &RegressionTask, params: &pars_core::nn::MlpParams, grid_res: usize, seed: u64) -> Result<()> {
    let stem = panel_stem(task, seed);
    let (points, values) = grid_predictions(params, task.extent, grid_res)?;
    let mut rows = Vec::with_capacity(points.len());
    for (p, v) in points.iter().zip(&values) {
        let region = if p[0].abs() > 1.0 || p[1].abs() > 1.0 {
            "outside"
        } else if task.in_data_region(*p) {
            "id"
        } else {
            "ood_out"
        };
        rows.push(vec![fmt_f64(p[0]), fmt_f64(p[1]), fmt_f64(*v), region.to_string()]);
    }
    write_csv(&ctx.artifact(&format!("panel_{stem}.csv")), &["x0", "x1", "prediction", "region"], &rows)?;
    write_heatmap_svg(&ctx.artifact(&format!("panel_{stem}.svg")), &values, grid_res, grid_res, None)?;
    Ok(())
}

pub fn didactic(ctx: &mut RunContext) -> Result<()> {
    let di = ctx.cfg.didactic.clone();
    let seed = ctx.cfg.seed;
    let mut summary_rows = Vec::new();
    for &c in &di.c_rewards {
        let mut task = di.task.clone();
        task.c_reward = c;
        let spec = MlpSpec::new(2, di.hidden_dims.clone(), 1, task.activation, task.use_ln)?;
        let params = fit_regressor(&task, &spec, di.steps, seed)?;
        emit_panel(ctx, &task, &params, di.grid_res, seed)?;
        let stats = region_stats(&params, &task, di.grid_res)?;
        let mse = training_mse(&params, &didactic::make_dataset(&task, seed)?)?;
        summary_rows.push(vec![
            task.kind.name().to_string(),
            task.use_ln.to_string(),
            task.activation.name().to_string(),
            task.pa.to_string(),
            fmt_f64(c),
            seed.to_string(),
            fmt_f64(stats.max_id),
            fmt_f64(stats.mean_id),
            fmt_f64(stats.max_ood_out),
            fmt_f64(stats.mean_ood_out),
            fmt_f64(mse),
        ]);
        ctx.note(format!(
            "c = {c}: mean ood-out / c = {:.4}, mse = {:.4}",
            stats.mean_ood_out, mse
        ));

        if di.emit_ntk {
            let res = ctx.cfg.diagnostics.ntk_grid_res;
            let mut grid = Vec::with_capacity(res * res);
            for iy in 0..res {
                for ix in 0..res {
                    grid.push(vec![
                        -1.0 + 2.0 * ix as f64 / (res - 1) as f64,
                        -1.0 + 2.0 * iy as f64 / (res - 1) as f64,
                    ]);
                }
            }
            let map = ntk_similarity(&params, &ctx.cfg.diagnostics.ntk_ref, &grid)?;
            let stem = panel_stem(&task, seed);
            let rows: Vec<Vec<String>> = map
                .points
                .iter()
                .zip(&map.values)
                .map(|(p, v)| vec![fmt_f64(p[0]), fmt_f64(p[1]), fmt_f64(*v)])
                .collect();
            write_csv(&ctx.artifact(&format!("ntk_{stem}.csv")), &["x0", "x1", "similarity"], &rows)?;
            write_heatmap_svg(
                &ctx.artifact(&format!("ntk_{stem}.svg")),
                &map.values,
                res,
                res,
                Some((-1.0, 1.0)),
            )?;
        }
    }
    write_csv(
        &ctx.artifact("region_stats.csv"),
        &[
            "kind",
            "use_ln",
            "activation",
            "pa",
            "c_reward",
            "seed",
            "max_id",
            "mean_id",
            "max_ood_out",
            "mean_ood_out",
            "train_mse",
        ],
        &summary_rows,
    )?;

    if di.run_activation_sweep {
        let mut task = di.task.clone();
        task.c_reward = *di.c_rewards.last().expect("validated non-empty");
        let spec = MlpSpec::new(2, di.hidden_dims.clone(), 1, task.activation, task.use_ln)?;
        let sweep = didactic::activation_sweep(&task, &spec, &Activation::ALL, di.steps, seed, di.grid_res)?;
        let rows: Vec<Vec<String>> = sweep
            .iter()
            .map(|(act, st)| {
                vec![
                    act.name().to_string(),
                    fmt_f64(st.max_id),
                    fmt_f64(st.mean_id),
                    fmt_f64(st.max_ood_out),
                    fmt_f64(st.mean_ood_out),
                ]
            })
            .collect();
        write_csv(
            &ctx.artifact("activation_sweep.csv"),
            &["activation", "max_id", "mean_id", "max_ood_out", "mean_ood_out"],
            &rows,
        )?;
    }
    Ok(())
}

pub fn tabular_check(ctx: &mut RunContext) -> Result<()> {
    let t = ctx.cfg.tabular.clone();
    let seed = ctx.cfg.seed;
    let mut rows = Vec::with_capacity(t.instances);
    let mut all_ok = true;
    let mut worst: f64 = 0.0;
    for i in 0..t.instances {
        let instance_seed = rng::derive_seed(seed, "tabular_instance", i as u64);
        let (mut mdp, labels) = build_random_mdp(t.n_states, t.n_actions, t.support_density, instance_seed)?;
        mdp.gamma = t.gamma;
        let ratio = verify_contraction(&mdp, &labels, t.k, t.trials, t.q_range, instance_seed)?;
        let (_, iterations, residuals) = fixed_point_iterate(&mdp, &labels, t.k, t.tol)?;
        all_ok &= ratio <= t.gamma + 1e-12;
        worst = worst.max(ratio);
        let residual_list = residuals.iter().map(|r| fmt_f64(*r)).collect::<Vec<_>>().join(";");
        rows.push(vec![
            instance_seed.to_string(),
            fmt_f64(t.gamma),
            fmt_f64(ratio),
            iterations.to_string(),
            fmt_f64(*residuals.last().expect("at least one iteration")),
            residual_list,
        ]);
    }
    write_csv(
        &ctx.artifact("certification.csv"),
        &["instance_seed", "gamma", "max_ratio", "iterations", "final_residual", "residuals"],
        &rows,
    )?;
    ctx.note(format!(
        "{} instances, worst contraction ratio {worst:.12} (gamma {})",
        t.instances, t.gamma
    ));
    if !all_ok {
        return Err(CoreError::InvalidArgument(format!(
            "contraction certification failed: observed ratio {worst} exceeds gamma {}",
            t.gamma
        ))
        .into());
    }
    Ok(())
}

struct AblateCell {
    variant: String,
    c_reward: f64,
    seed_index: usize,
}

struct AblateResult {
    rows: Vec<String>,
    log_csv: String,
    cell_name: String,
}

pub fn ablate(ctx: &mut RunContext) -> Result<()> {
    let ab = ctx.cfg.ablate.clone();
    let seed = ctx.cfg.seed;
    let env = build_eval_env(&ctx.cfg)?;
    let behavior = build_behavior(&ctx.cfg.behavior)?;

    // one dataset per seed index, shared across variants and scales
    let mut datasets = Vec::with_capacity(ab.seeds);
    for s in 0..ab.seeds {
        let ds_seed = rng::derive_seed(seed, "ablate_dataset", s as u64);
        datasets.push(generate_offline_dataset(
            env.as_ref(),
            behavior.as_ref(),
            ctx.cfg.behavior.episodes,
            ds_seed,
        )?);
    }

    let mut cells = Vec::new();
    for variant in &ab.variants {
        for &c in &ab.c_rewards {
            for s in 0..ab.seeds {
                cells.push(AblateCell {
                    variant: variant.clone(),
                    c_reward: c,
                    seed_index: s,
                });
            }
        }
    }

    let base_pars = {
        let mut p = ctx.cfg.pars.clone();
        resolve_r_min(&mut p, env.as_ref());
        p
    };
    let env_build = ctx.cfg.env.clone();

    let results: Vec<AblateResult> = cells
        .par_iter()
        .map(|cell| -> Result<AblateResult> {
            let mut pars = base_pars.clone();
            pars.c_reward = cell.c_reward;
            pars.use_ln = cell.variant.contains("ln");
            if !cell.variant.contains("pa") {
                pars.alpha = 0.0;
            }
            let cell_env = build_env(&env_build)?;
            let run_seed = rng::derive_seed(seed, "ablate_run", cell.seed_index as u64);
            let ds = &datasets[cell.seed_index];
            let cell_name = format!(
                "cell_{}_c{}_s{}",
                cell.variant,
                fmt_f64(cell.c_reward),
                cell.seed_index
            );
            let (status, goal_rate, eval_return, mean_q, dormant, log_csv) =
                match core_train_offline(&pars, ds, Some(cell_env.as_ref()), run_seed) {
                    Ok(out) => {
                        let last = out.log.rows.last().cloned();
                        (
                            "ok".to_string(),
                            last.as_ref().map_or(f64::NAN, |r| r.eval_goal_rate),
                            last.as_ref().map_or(f64::NAN, |r| r.eval_return),
                            last.as_ref().map_or(f64::NAN, |r| r.mean_q_data),
                            last.as_ref().map_or(f64::NAN, |r| r.dormant_ratio),
                            out.log.to_csv(),
                        )
                    }
                    Err(CoreError::Divergence { step, .. }) => (
                        format!("diverged_at_{step}"),
                        0.0,
                        f64::NAN,
                        f64::NAN,
                        f64::NAN,
                        String::new(),
                    ),
                    Err(e) => return Err(e.into()),
                };
            Ok(AblateResult {
                rows: vec![
                    cell.variant.clone(),
                    fmt_f64(cell.c_reward),
                    cell.seed_index.to_string(),
                    status,
                    fmt_f64(goal_rate),
                    fmt_f64(eval_return),
                    fmt_f64(mean_q),
                    fmt_f64(dormant),
                ],
                log_csv,
                cell_name,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::with_capacity(results.len());
    for res in &results {
        if !res.log_csv.is_empty() {
            let dir = ctx.path(&res.cell_name);
            std::fs::create_dir_all(&dir)?;
            std::fs::write(ctx.artifact(&format!("{}/train_log.csv", res.cell_name)), &res.log_csv)?;
        }
        rows.push(res.rows.clone());
    }
    write_csv(
        &ctx.artifact("ablation_summary.csv"),
        &[
            "variant",
            "c_reward",
            "seed_index",
            "status",
            "final_goal_rate",
            "final_eval_return",
            "final_mean_q_data",
            "final_dormant_ratio",
        ],
        &rows,
    )?;
    Ok(())
}
