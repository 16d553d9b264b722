//! Run configuration: a `[section]`-grouped `key = value` text format.
//!
//! Every key has a documented default (an empty file parses to the default
//! config), unknown sections or keys are rejected with their line number,
//! and `serialize_config` writes the canonical form whose re-parse is
//! value-identical.

use std::fs;
use std::path::Path;

use crate::didactic::{ConeKind, RegressionTask};
use crate::envs::{BehaviorBuild, EnvBuild, Rect, RewardKind};
use crate::error::{Error, Result};
use crate::nn::Activation;
use crate::pars::{ParsConfig, RMinSource};
use crate::report::fmt_f64;

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsConfig {
    pub dormant_threshold: f64,
    pub dormant_batch: usize,
    pub ntk_ref: Vec<f64>,
    pub ntk_grid_res: usize,
    /// ID radius as a fraction of the feasible-box diagonal
    pub eps_id_fraction: f64,
    pub sarsa_steps: usize,
    pub sarsa_gamma: f64,
    pub maxq_steps: usize,
    pub probe_hidden: Vec<usize>,
    pub ood_grid_res: usize,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        DiagnosticsConfig {
            dormant_threshold: 0.0,
            dormant_batch: 512,
            ntk_ref: vec![0.32, -0.38],
            ntk_grid_res: 21,
            eps_id_fraction: 0.01,
            sarsa_steps: 4000,
            sarsa_gamma: 0.99,
            maxq_steps: 2000,
            probe_hidden: vec![64, 64],
            ood_grid_res: 41,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DidacticConfig {
    pub task: RegressionTask,
    pub c_rewards: Vec<f64>,
    pub steps: usize,
    pub grid_res: usize,
    pub hidden_dims: Vec<usize>,
    pub emit_ntk: bool,
    pub run_activation_sweep: bool,
}

impl Default for DidacticConfig {
    fn default() -> Self {
        DidacticConfig {
            task: RegressionTask::default(),
            c_rewards: vec![1.0, 100.0],
            steps: 20_000,
            grid_res: 41,
            hidden_dims: vec![256, 256],
            emit_ntk: true,
            run_activation_sweep: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TabularConfig {
    pub n_states: usize,
    pub n_actions: usize,
    pub support_density: f64,
    pub gamma: f64,
    pub k: usize,
    pub trials: usize,
    pub instances: usize,
    pub tol: f64,
    pub q_range: f64,
}

impl Default for TabularConfig {
    fn default() -> Self {
        TabularConfig {
            n_states: 6,
            n_actions: 5,
            support_density: 0.5,
            gamma: 0.9,
            k: 3,
            trials: 100,
            instances: 100,
            tol: 1e-10,
            q_range: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblateConfig {
    pub c_rewards: Vec<f64>,
    /// subsets of {layer norm, penalty}: none | ln | pa | ln_pa
    pub variants: Vec<String>,
    pub seeds: usize,
}

impl Default for AblateConfig {
    fn default() -> Self {
        AblateConfig {
            c_rewards: vec![1.0, 10.0, 100.0, 1000.0],
            variants: vec!["none".into(), "ln".into(), "pa".into(), "ln_pa".into()],
            seeds: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub quiet: bool,
    pub env: EnvBuild,
    pub behavior: BehaviorBuild,
    pub pars: ParsConfig,
    pub diagnostics: DiagnosticsConfig,
    pub didactic: DidacticConfig,
    pub tabular: TabularConfig,
    pub ablate: AblateConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            quiet: false,
            env: EnvBuild::default(),
            behavior: BehaviorBuild::default(),
            pars: ParsConfig::default(),
            diagnostics: DiagnosticsConfig::default(),
            didactic: DidacticConfig::default(),
            tabular: TabularConfig::default(),
            ablate: AblateConfig::default(),
        }
    }
}

pub fn parse_config_file(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path)?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    let mut section = String::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name.strip_suffix(']').ok_or_else(|| {
                Error::config_key(line.to_string(), line_no, "malformed section header")
            })?;
            section = name.trim().to_string();
            let known = ["run", "env", "behavior", "pars", "diagnostics", "didactic", "tabular", "ablate"];
            if !known.contains(&section.as_str()) {
                return Err(Error::config_key(
                    section.clone(),
                    line_no,
                    format!("unknown section (known: {})", known.join(", ")),
                ));
            }
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::config_key(line.to_string(), line_no, "expected `key = value`")
        })?;
        let key = key.trim();
        let value = value.trim();
        apply_key(&mut cfg, &section, key, value, line_no)?;
    }
    validate(&cfg)?;
    Ok(cfg)
}

fn validate(cfg: &RunConfig) -> Result<()> {
    cfg.pars.validate()?;
    cfg.didactic.task.validate()?;
    let t = &cfg.tabular;
    if t.n_states < 2 || t.n_actions < 2 {
        return Err(Error::config("tabular n_states and n_actions must be >= 2"));
    }
    if !(t.support_density > 0.0 && t.support_density <= 1.0) {
        return Err(Error::config("tabular support_density must lie in (0, 1]"));
    }
    if !(t.gamma > 0.0 && t.gamma < 1.0) {
        return Err(Error::config("tabular gamma must lie in (0, 1)"));
    }
    if t.k == 0 || t.trials == 0 || t.instances == 0 || !(t.tol > 0.0) || !(t.q_range > 0.0) {
        return Err(Error::config("tabular k/trials/instances/tol/q_range must be positive"));
    }
    let d = &cfg.diagnostics;
    if d.dormant_threshold < 0.0 || d.eps_id_fraction < 0.0 {
        return Err(Error::config("diagnostics thresholds must be non-negative"));
    }
    if !(d.sarsa_gamma >= 0.0 && d.sarsa_gamma < 1.0) {
        return Err(Error::config("diagnostics sarsa_gamma must lie in [0, 1)"));
    }
    if d.ntk_grid_res < 2 || d.ood_grid_res < 2 || cfg.didactic.grid_res < 2 {
        return Err(Error::config("grid resolutions must be >= 2"));
    }
    if cfg.ablate.seeds == 0 || cfg.ablate.c_rewards.is_empty() || cfg.ablate.variants.is_empty() {
        return Err(Error::config("ablate needs at least one seed, scale, and variant"));
    }
    for v in &cfg.ablate.variants {
        if !["none", "ln", "pa", "ln_pa"].contains(&v.as_str()) {
            return Err(Error::config(format!("unknown ablate variant `{v}`")));
        }
    }
    Ok(())
}

fn apply_key(cfg: &mut RunConfig, section: &str, key: &str, value: &str, line: usize) -> Result<()> {
    let bad = |what: &str| Error::config_key(key.to_string(), line, format!("expected {what}, got `{value}`"));
    let f = || value.parse::<f64>().map_err(|_| bad("a real number"));
    let u = || value.parse::<usize>().map_err(|_| bad("a non-negative integer"));
    let u64v = || value.parse::<u64>().map_err(|_| bad("a non-negative integer"));
    let b = || match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(bad("true or false")),
    };
    let f_list = || -> Result<Vec<f64>> {
        value
            .split(',')
            .map(|p| p.trim().parse::<f64>().map_err(|_| bad("a comma-separated list of reals")))
            .collect()
    };
    let u_list = || -> Result<Vec<usize>> {
        value
            .split(',')
            .map(|p| p.trim().parse::<usize>().map_err(|_| bad("a comma-separated list of integers")))
            .collect()
    };
    let s_list = || -> Vec<String> { value.split(',').map(|p| p.trim().to_string()).collect() };
    let vec_list = || -> Result<Vec<Vec<f64>>> {
        if value == "none" || value.is_empty() {
            return Ok(Vec::new());
        }
        value
            .split(';')
            .map(|group| {
                group
                    .trim()
                    .split(',')
                    .map(|p| p.trim().parse::<f64>().map_err(|_| bad("`x,y ; x,y` vector groups")))
                    .collect()
            })
            .collect()
    };

    match (section, key) {
        ("run", "seed") => cfg.seed = u64v()?,
        ("run", "quiet") => cfg.quiet = b()?,

        ("env", "id") => cfg.env.id = value.to_string(),
        ("env", "max_episode_steps") => cfg.env.max_episode_steps = u()?,
        ("env", "step_scale") => cfg.env.step_scale = f()?,
        ("env", "goal") => cfg.env.goal = f_list()?,
        ("env", "goal_radius") => cfg.env.goal_radius = f()?,
        ("env", "start") => cfg.env.start = f_list()?,
        ("env", "walls") => {
            let groups = vec_list()?;
            let mut walls = Vec::with_capacity(groups.len());
            for g in groups {
                if g.len() != 4 {
                    return Err(bad("rects as `x0,y0,x1,y1 ; ...` or `none`"));
                }
                walls.push(Rect {
                    x0: g[0],
                    y0: g[1],
                    x1: g[2],
                    y1: g[3],
                });
            }
            cfg.env.walls = walls;
        }
        ("env", "reward") => cfg.env.reward = RewardKind::parse(value).map_err(|e| Error::config_key(key.to_string(), line, e.to_string()))?,

        ("behavior", "kind") => cfg.behavior.kind = value.to_string(),
        ("behavior", "centers") => cfg.behavior.centers = vec_list()?,
        ("behavior", "noise") => cfg.behavior.noise = f()?,
        ("behavior", "episodes") => cfg.behavior.episodes = u()?,
        ("behavior", "mixture_random_prob") => cfg.behavior.mixture_random_prob = f()?,

        ("pars", "c_reward") => cfg.pars.c_reward = f()?,
        ("pars", "alpha") => cfg.pars.alpha = f()?,
        ("pars", "beta") => cfg.pars.beta = f()?,
        ("pars", "gamma") => cfg.pars.gamma = f()?,
        ("pars", "tau") => cfg.pars.tau = f()?,
        ("pars", "n_critics") => cfg.pars.n_critics = u()?,
        ("pars", "target_subset") => cfg.pars.target_subset = u()?,
        ("pars", "actor_subset") => cfg.pars.actor_subset = u()?,
        ("pars", "policy_noise") => cfg.pars.policy_noise = f()?,
        ("pars", "noise_clip") => cfg.pars.noise_clip = f()?,
        ("pars", "policy_delay") => cfg.pars.policy_delay = u()?,
        ("pars", "exploration_noise") => cfg.pars.exploration_noise = f()?,
        ("pars", "utd_ratio") => cfg.pars.utd_ratio = u()?,
        ("pars", "offline_fraction") => cfg.pars.offline_fraction = f()?,
        ("pars", "guard_multiplier") => cfg.pars.guard_multiplier = f()?,
        ("pars", "r_min_source") => {
            cfg.pars.r_min_source = RMinSource::parse(value)
                .map_err(|e| Error::config_key(key.to_string(), line, e.to_string()))?
        }
        ("pars", "r_min_known") => cfg.pars.r_min_known = Some(f()?),
        ("pars", "batch_size") => cfg.pars.batch_size = u()?,
        ("pars", "max_gradient_steps") => cfg.pars.max_gradient_steps = u()?,
        ("pars", "hidden_dims") => cfg.pars.hidden_dims = u_list()?,
        ("pars", "use_ln") => cfg.pars.use_ln = b()?,
        ("pars", "activation") => {
            cfg.pars.activation = Activation::parse(value)
                .map_err(|e| Error::config_key(key.to_string(), line, e.to_string()))?
        }
        ("pars", "ln_eps") => cfg.pars.ln_eps = f()?,
        ("pars", "learning_rate") => cfg.pars.learning_rate = f()?,
        ("pars", "actor_q_normalization") => cfg.pars.actor_q_normalization = b()?,
        ("pars", "subset_per_sample") => cfg.pars.subset_per_sample = b()?,
        ("pars", "alpha_online") => cfg.pars.alpha_online = f()?,
        ("pars", "beta_online") => cfg.pars.beta_online = f()?,
        ("pars", "log_interval") => cfg.pars.log_interval = u()?,
        ("pars", "eval_episodes") => cfg.pars.eval_episodes = u()?,
        ("pars", "buffer_capacity") => cfg.pars.buffer_capacity = u()?,
        ("pars", "online_steps") => cfg.pars.online_steps = u()?,
        ("pars", "dormant_eval_batch") => cfg.pars.dormant_eval_batch = u()?,

        ("diagnostics", "dormant_threshold") => cfg.diagnostics.dormant_threshold = f()?,
        ("diagnostics", "dormant_batch") => cfg.diagnostics.dormant_batch = u()?,
        ("diagnostics", "ntk_ref") => cfg.diagnostics.ntk_ref = f_list()?,
        ("diagnostics", "ntk_grid_res") => cfg.diagnostics.ntk_grid_res = u()?,
        ("diagnostics", "eps_id_fraction") => cfg.diagnostics.eps_id_fraction = f()?,
        ("diagnostics", "sarsa_steps") => cfg.diagnostics.sarsa_steps = u()?,
        ("diagnostics", "sarsa_gamma") => cfg.diagnostics.sarsa_gamma = f()?,
        ("diagnostics", "maxq_steps") => cfg.diagnostics.maxq_steps = u()?,
        ("diagnostics", "probe_hidden") => cfg.diagnostics.probe_hidden = u_list()?,
        ("diagnostics", "ood_grid_res") => cfg.diagnostics.ood_grid_res = u()?,

        ("didactic", "kind") => {
            cfg.didactic.task.kind = ConeKind::parse(value)
                .map_err(|e| Error::config_key(key.to_string(), line, e.to_string()))?
        }
        ("didactic", "c_rewards") => cfg.didactic.c_rewards = f_list()?,
        ("didactic", "radius") => cfg.didactic.task.radius = f()?,
        ("didactic", "samples") => cfg.didactic.task.samples = u()?,
        ("didactic", "extent") => cfg.didactic.task.extent = f()?,
        ("didactic", "use_ln") => cfg.didactic.task.use_ln = b()?,
        ("didactic", "activation") => {
            cfg.didactic.task.activation = Activation::parse(value)
                .map_err(|e| Error::config_key(key.to_string(), line, e.to_string()))?
        }
        ("didactic", "pa") => cfg.didactic.task.pa = b()?,
        ("didactic", "pa_alpha") => cfg.didactic.task.pa_alpha = f()?,
        ("didactic", "pa_guard") => cfg.didactic.task.pa_guard = f()?,
        ("didactic", "batch_size") => cfg.didactic.task.batch_size = u()?,
        ("didactic", "learning_rate") => cfg.didactic.task.learning_rate = f()?,
        ("didactic", "steps") => cfg.didactic.steps = u()?,
        ("didactic", "grid_res") => cfg.didactic.grid_res = u()?,
        ("didactic", "hidden_dims") => cfg.didactic.hidden_dims = u_list()?,
        ("didactic", "emit_ntk") => cfg.didactic.emit_ntk = b()?,
        ("didactic", "activation_sweep") => cfg.didactic.run_activation_sweep = b()?,

        ("tabular", "n_states") => cfg.tabular.n_states = u()?,
        ("tabular", "n_actions") => cfg.tabular.n_actions = u()?,
        ("tabular", "support_density") => cfg.tabular.support_density = f()?,
        ("tabular", "gamma") => cfg.tabular.gamma = f()?,
        ("tabular", "k") => cfg.tabular.k = u()?,
        ("tabular", "trials") => cfg.tabular.trials = u()?,
        ("tabular", "instances") => cfg.tabular.instances = u()?,
        ("tabular", "tol") => cfg.tabular.tol = f()?,
        ("tabular", "q_range") => cfg.tabular.q_range = f()?,

        ("ablate", "c_rewards") => cfg.ablate.c_rewards = f_list()?,
        ("ablate", "variants") => cfg.ablate.variants = s_list(),
        ("ablate", "seeds") => cfg.ablate.seeds = u()?,

        ("", _) => {
            return Err(Error::config_key(
                key.to_string(),
                line,
                "key appears before any [section] header",
            ))
        }
        (_, _) => {
            return Err(Error::config_key(
                key.to_string(),
                line,
                format!("unknown key in section [{section}]"),
            ))
        }
    }
    Ok(())
}

fn fmt_f_list(vals: &[f64]) -> String {
    vals.iter().map(|v| fmt_f64(*v)).collect::<Vec<_>>().join(",")
}

fn fmt_u_list(vals: &[usize]) -> String {
    vals.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

fn fmt_vec_list(vals: &[Vec<f64>]) -> String {
    if vals.is_empty() {
        return "none".into();
    }
    vals.iter().map(|v| fmt_f_list(v)).collect::<Vec<_>>().join(" ; ")
}

/// Canonical text form; parsing it back yields a value-identical config.
pub fn serialize_config(cfg: &RunConfig) -> String {
    let mut s = String::new();
    let mut w = |line: String| {
        s.push_str(&line);
        s.push('\n');
    };
    w("[run]".into());
    w(format!("seed = {}", cfg.seed));
    w(format!("quiet = {}", cfg.quiet));
    w(String::new());
    w("[env]".into());
    w(format!("id = {}", cfg.env.id));
    w(format!("max_episode_steps = {}", cfg.env.max_episode_steps));
    w(format!("step_scale = {}", fmt_f64(cfg.env.step_scale)));
    w(format!("goal = {}", fmt_f_list(&cfg.env.goal)));
    w(format!("goal_radius = {}", fmt_f64(cfg.env.goal_radius)));
    w(format!("start = {}", fmt_f_list(&cfg.env.start)));
    let walls: Vec<Vec<f64>> = cfg.env.walls.iter().map(|r| vec![r.x0, r.y0, r.x1, r.y1]).collect();
    w(format!("walls = {}", fmt_vec_list(&walls)));
    w(format!("reward = {}", cfg.env.reward.name()));
    w(String::new());
    w("[behavior]".into());
    w(format!("kind = {}", cfg.behavior.kind));
    w(format!("centers = {}", fmt_vec_list(&cfg.behavior.centers)));
    w(format!("noise = {}", fmt_f64(cfg.behavior.noise)));
    w(format!("episodes = {}", cfg.behavior.episodes));
    w(format!("mixture_random_prob = {}", fmt_f64(cfg.behavior.mixture_random_prob)));
    w(String::new());
    w("[pars]".into());
    let p = &cfg.pars;
    w(format!("c_reward = {}", fmt_f64(p.c_reward)));
    w(format!("alpha = {}", fmt_f64(p.alpha)));
    w(format!("beta = {}", fmt_f64(p.beta)));
    w(format!("gamma = {}", fmt_f64(p.gamma)));
    w(format!("tau = {}", fmt_f64(p.tau)));
    w(format!("n_critics = {}", p.n_critics));
    w(format!("target_subset = {}", p.target_subset));
    w(format!("actor_subset = {}", p.actor_subset));
    w(format!("policy_noise = {}", fmt_f64(p.policy_noise)));
    w(format!("noise_clip = {}", fmt_f64(p.noise_clip)));
    w(format!("policy_delay = {}", p.policy_delay));
    w(format!("exploration_noise = {}", fmt_f64(p.exploration_noise)));
    w(format!("utd_ratio = {}", p.utd_ratio));
    w(format!("offline_fraction = {}", fmt_f64(p.offline_fraction)));
    w(format!("guard_multiplier = {}", fmt_f64(p.guard_multiplier)));
    w(format!("r_min_source = {}", p.r_min_source.name()));
    if let Some(v) = p.r_min_known {
        w(format!("r_min_known = {}", fmt_f64(v)));
    }
    w(format!("batch_size = {}", p.batch_size));
    w(format!("max_gradient_steps = {}", p.max_gradient_steps));
    w(format!("hidden_dims = {}", fmt_u_list(&p.hidden_dims)));
    w(format!("use_ln = {}", p.use_ln));
    w(format!("activation = {}", p.activation.name()));
    w(format!("ln_eps = {}", fmt_f64(p.ln_eps)));
    w(format!("learning_rate = {}", fmt_f64(p.learning_rate)));
    w(format!("actor_q_normalization = {}", p.actor_q_normalization));
    w(format!("subset_per_sample = {}", p.subset_per_sample));
    w(format!("alpha_online = {}", fmt_f64(p.alpha_online)));
    w(format!("beta_online = {}", fmt_f64(p.beta_online)));
    w(format!("log_interval = {}", p.log_interval));
    w(format!("eval_episodes = {}", p.eval_episodes));
    w(format!("buffer_capacity = {}", p.buffer_capacity));
    w(format!("online_steps = {}", p.online_steps));
    w(format!("dormant_eval_batch = {}", p.dormant_eval_batch));
    w(String::new());
    w("[diagnostics]".into());
    let d = &cfg.diagnostics;
    w(format!("dormant_threshold = {}", fmt_f64(d.dormant_threshold)));
    w(format!("dormant_batch = {}", d.dormant_batch));
    w(format!("ntk_ref = {}", fmt_f_list(&d.ntk_ref)));
    w(format!("ntk_grid_res = {}", d.ntk_grid_res));
    w(format!("eps_id_fraction = {}", fmt_f64(d.eps_id_fraction)));
    w(format!("sarsa_steps = {}", d.sarsa_steps));
    w(format!("sarsa_gamma = {}", fmt_f64(d.sarsa_gamma)));
    w(format!("maxq_steps = {}", d.maxq_steps));
    w(format!("probe_hidden = {}", fmt_u_list(&d.probe_hidden)));
    w(format!("ood_grid_res = {}", d.ood_grid_res));
    w(String::new());
    w("[didactic]".into());
    let di = &cfg.didactic;
    w(format!("kind = {}", di.task.kind.name()));
    w(format!("c_rewards = {}", fmt_f_list(&di.c_rewards)));
    w(format!("radius = {}", fmt_f64(di.task.radius)));
    w(format!("samples = {}", di.task.samples));
    w(format!("extent = {}", fmt_f64(di.task.extent)));
    w(format!("use_ln = {}", di.task.use_ln));
    w(format!("activation = {}", di.task.activation.name()));
    w(format!("pa = {}", di.task.pa));
    w(format!("pa_alpha = {}", fmt_f64(di.task.pa_alpha)));
    w(format!("pa_guard = {}", fmt_f64(di.task.pa_guard)));
    w(format!("batch_size = {}", di.task.batch_size));
    w(format!("learning_rate = {}", fmt_f64(di.task.learning_rate)));
    w(format!("steps = {}", di.steps));
    w(format!("grid_res = {}", di.grid_res));
    w(format!("hidden_dims = {}", fmt_u_list(&di.hidden_dims)));
    w(format!("emit_ntk = {}", di.emit_ntk));
    w(format!("activation_sweep = {}", di.run_activation_sweep));
    w(String::new());
    w("[tabular]".into());
    let t = &cfg.tabular;
    w(format!("n_states = {}", t.n_states));
    w(format!("n_actions = {}", t.n_actions));
    w(format!("support_density = {}", fmt_f64(t.support_density)));
    w(format!("gamma = {}", fmt_f64(t.gamma)));
    w(format!("k = {}", t.k));
    w(format!("trials = {}", t.trials));
    w(format!("instances = {}", t.instances));
    w(format!("tol = {}", fmt_f64(t.tol)));
    w(format!("q_range = {}", fmt_f64(t.q_range)));
    w(String::new());
    w("[ablate]".into());
    w(format!("c_rewards = {}", fmt_f_list(&cfg.ablate.c_rewards)));
    w(format!("variants = {}", cfg.ablate.variants.join(",")));
    w(format!("seeds = {}", cfg.ablate.seeds));
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = parse_config("").unwrap();
        assert_eq!(cfg, RunConfig::default());
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let cfg = parse_config("# a comment\n\n[run]\n# another\nseed = 42\n").unwrap();
        assert_eq!(cfg.seed, 42);
    }

    #[test]
    fn constraint_violation_names_the_key() {
        let err = parse_config("[pars]\ngamma = 1.5\n").unwrap_err();
        assert!(err.to_string().contains("gamma"), "{err}");
    }

    #[test]
    fn unknown_key_names_key_and_line() {
        let err = parse_config("[pars]\nwarp_speed = 9\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("warp_speed") && msg.contains("line 2"), "{msg}");
    }

    #[test]
    fn unknown_section_is_rejected() {
        let err = parse_config("[telemetry]\nx = 1\n").unwrap_err();
        assert!(err.to_string().contains("telemetry"));
    }

    #[test]
    fn type_mismatch_names_key_and_line() {
        let err = parse_config("[pars]\nbatch_size = many\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("batch_size") && msg.contains("line 2"), "{msg}");
    }

    #[test]
    fn round_trip_is_identity() {
        let text = "\
[run]
seed = 7

[env]
id = line_walk_1d
goal = 0.8
step_scale = 1
max_episode_steps = 50
reward = shaped

[behavior]
kind = clustered_noisy_expert
centers = -0.6 ; 0.6
noise = 0.07

[pars]
c_reward = 1000
gamma = 0.995
hidden_dims = 64,64
use_ln = false

[ablate]
variants = ln,ln_pa
";
        let once = parse_config(text).unwrap();
        let twice = parse_config(&serialize_config(&once)).unwrap();
        assert_eq!(once, twice);
        assert_eq!(once.behavior.centers, vec![vec![-0.6], vec![0.6]]);
        assert_eq!(once.pars.hidden_dims, vec![64, 64]);
    }

    #[test]
    fn walls_accept_none_and_rects() {
        let cfg = parse_config("[env]\nwalls = none\n").unwrap();
        assert!(cfg.env.walls.is_empty());
        let cfg = parse_config("[env]\nwalls = 0,0.4,0.7,0.6 ; 0.9,0,1,0.2\n").unwrap();
        assert_eq!(cfg.env.walls.len(), 2);
        assert_eq!(cfg.env.walls[1].x0, 0.9);
    }

    #[test]
    fn key_outside_section_is_rejected() {
        let err = parse_config("seed = 3\n").unwrap_err();
        assert!(err.to_string().contains("before any [section]"));
    }
}
