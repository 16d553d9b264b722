//! Acceptance: every subcommand rerun from its manifest reproduces
//! byte-identical artifacts (criterion: determinism of the whole tool), and
//! the CLI's error surface behaves as documented.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

fn pars_bin() -> &'static str {
    env!("CARGO_BIN_EXE_pars")
}

fn run_ok(args: &[&str]) {
    let out = Command::new(pars_bin()).args(args).output().expect("spawn pars");
    assert!(
        out.status.success(),
        "pars {args:?} failed:\n{}\n{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

/// Relative path -> bytes for every file under `dir` except the manifest
/// (its duration field is wall-clock).
fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).unwrap().to_string_lossy().to_string();
                if rel != "manifest.txt" {
                    out.insert(rel, fs::read(&path).unwrap());
                }
            }
        }
    }
    out
}

struct ManifestInfo {
    subcommand: String,
    seed: String,
    data: Option<String>,
    checkpoint: Option<String>,
}

fn read_manifest(dir: &Path) -> ManifestInfo {
    let text = fs::read_to_string(dir.join("manifest.txt")).expect("manifest written");
    let field = |name: &str| -> String {
        text.lines()
            .find_map(|l| l.strip_prefix(&format!("{name} ")))
            .unwrap_or_else(|| panic!("manifest lacks `{name}`"))
            .to_string()
    };
    let opt = |v: String| if v == "-" { None } else { Some(v) };
    ManifestInfo {
        subcommand: field("subcommand"),
        seed: field("seed"),
        data: opt(field("data")),
        checkpoint: opt(field("checkpoint")),
    }
}

/// Re-invoke the subcommand exactly as the manifest records it, into a fresh
/// directory, and demand byte-identical artifacts.
fn rerun_and_compare(first: &Path, fresh: &Path) {
    let info = read_manifest(first);
    let config = first.join("resolved_config.cfg");
    let mut args: Vec<String> = vec![
        info.subcommand.clone(),
        "--config".into(),
        config.display().to_string(),
        "--out".into(),
        fresh.display().to_string(),
        "--seed".into(),
        info.seed.clone(),
        "--quiet".into(),
    ];
    if let Some(data) = &info.data {
        args.push("--data".into());
        args.push(data.clone());
    }
    if let Some(ckpt) = &info.checkpoint {
        args.push("--checkpoint".into());
        args.push(ckpt.clone());
    }
    let argv: Vec<&str> = args.iter().map(|s| s.as_str()).collect();
    run_ok(&argv);

    let a = snapshot(first);
    let b = snapshot(fresh);
    assert_eq!(
        a.keys().collect::<Vec<_>>(),
        b.keys().collect::<Vec<_>>(),
        "{}: artifact sets differ",
        info.subcommand
    );
    for (name, bytes) in &a {
        assert_eq!(
            bytes,
            &b[name],
            "{}: artifact {name} differs between run and manifest rerun",
            info.subcommand
        );
    }
}

fn small_config(dir: &Path) -> PathBuf {
    let path = dir.join("small.cfg");
    fs::write(
        &path,
        "\
[run]
seed = 11

[env]
id = line_walk_1d
goal = 0.8
goal_radius = 0.1
step_scale = 1
max_episode_steps = 20
reward = shaped

[behavior]
kind = clustered_noisy_expert
centers = -0.6 ; 0.6
noise = 0.05
episodes = 25

[pars]
hidden_dims = 12,12
batch_size = 32
max_gradient_steps = 60
log_interval = 20
eval_episodes = 2
online_steps = 6
utd_ratio = 3
alpha = 0.5

[diagnostics]
sarsa_steps = 120
maxq_steps = 80
probe_hidden = 12,12
ood_grid_res = 11

[didactic]
c_rewards = 1,100
samples = 96
batch_size = 32
steps = 120
grid_res = 9
hidden_dims = 12,12

[tabular]
instances = 4
trials = 10

[ablate]
c_rewards = 1,100
variants = none,ln_pa
seeds = 2
",
    )
    .unwrap();
    path
}

#[test]
fn criterion_12_manifest_reruns_are_byte_identical() {
    let started = std::time::Instant::now();
    let root = tempfile::tempdir().unwrap();
    let cfg = small_config(root.path());
    let cfg = cfg.display().to_string();
    let out = |name: &str| root.path().join(name).display().to_string();

    // gen-data first; its dataset feeds the training subcommands
    run_ok(&["gen-data", "--config", &cfg, "--out", &out("gen"), "--quiet"]);
    let data = root.path().join("gen/dataset.txt").display().to_string();

    run_ok(&[
        "train-offline",
        "--config",
        &cfg,
        "--data",
        &data,
        "--out",
        &out("train"),
        "--quiet",
    ]);
    let ckpt = root.path().join("train/checkpoint").display().to_string();

    run_ok(&[
        "finetune",
        "--config",
        &cfg,
        "--data",
        &data,
        "--checkpoint",
        &ckpt,
        "--out",
        &out("tune"),
        "--quiet",
    ]);
    run_ok(&[
        "diagnose",
        "--config",
        &cfg,
        "--data",
        &data,
        "--checkpoint",
        &ckpt,
        "--out",
        &out("diag"),
        "--quiet",
    ]);
    run_ok(&["didactic", "--config", &cfg, "--out", &out("did"), "--quiet"]);
    run_ok(&["tabular-check", "--config", &cfg, "--out", &out("tab"), "--quiet"]);
    run_ok(&["ablate", "--config", &cfg, "--out", &out("abl"), "--quiet"]);

    for name in ["gen", "train", "tune", "diag", "did", "tab", "abl"] {
        let first = root.path().join(name);
        let fresh = root.path().join(format!("{name}_rerun"));
        rerun_and_compare(&first, &fresh);
    }
    println!(
        "criterion 12 PASS: all 7 subcommands byte-identical under manifest rerun [{:.1?}]",
        started.elapsed()
    );
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let out = Command::new(pars_bin()).arg("transmogrify").output().unwrap();
    assert_eq!(out.status.code(), Some(2), "clap usage errors exit with 2");
}

#[test]
fn config_error_maps_to_exit_code_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "[pars]\ngamma = 1.5\n").unwrap();
    let out = Command::new(pars_bin())
        .args([
            "tabular-check",
            "--config",
            &cfg.display().to_string(),
            "--out",
            &dir.path().join("o").display().to_string(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("gamma"), "{stderr}");
}

#[test]
fn existing_manifest_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("o").display().to_string();
    run_ok(&["tabular-check", "--out", &out_dir, "--quiet", "--seed", "1"]);
    let second = Command::new(pars_bin())
        .args(["tabular-check", "--out", &out_dir, "--quiet", "--seed", "1"])
        .output()
        .unwrap();
    assert!(!second.status.success());
}

#[test]
fn missing_data_file_maps_to_io_or_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(pars_bin())
        .args([
            "train-offline",
            "--data",
            "/nonexistent/never.txt",
            "--out",
            &dir.path().join("o").display().to_string(),
        ])
        .output()
        .unwrap();
    assert!(!out.status.success());
}
