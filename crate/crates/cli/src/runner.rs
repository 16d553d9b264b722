//! Shared run harness: config resolution, output directory, artifact
//! tracking, and the run manifest.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use pars_core::config::{parse_config_file, serialize_config, RunConfig};

use crate::CommonArgs;

pub struct RunContext {
    pub cfg: RunConfig,
    pub out_dir: PathBuf,
    pub data: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub quiet: bool,
    artifacts: Vec<String>,
}

impl RunContext {
    pub fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    /// Register an artifact (relative path) for the manifest.
    pub fn artifact(&mut self, name: &str) -> PathBuf {
        self.artifacts.push(name.to_string());
        self.out_dir.join(name)
    }

    pub fn note(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }

    pub fn data_path(&self) -> Result<&Path> {
        self.data.as_deref().context("this subcommand needs --data")
    }
}

/// Everything the manifest needs to reproduce the run bit for bit: the
/// subcommand, the resolved config (stored next to the manifest), the input
/// paths, and the artifact list.
fn render_manifest(
    subcommand: &str,
    ctx: &RunContext,
    duration_ms: u128,
) -> String {
    let mut s = String::new();
    s.push_str("pars-manifest v1\n");
    s.push_str(&format!("subcommand {subcommand}\n"));
    s.push_str(&format!("version {}\n", env!("CARGO_PKG_VERSION")));
    s.push_str(&format!("seed {}\n", ctx.cfg.seed));
    s.push_str(&format!("duration_ms {duration_ms}\n"));
    s.push_str("config resolved_config.cfg\n");
    s.push_str(&format!(
        "data {}\n",
        ctx.data.as_ref().map_or("-".into(), |p| p.display().to_string())
    ));
    s.push_str(&format!(
        "checkpoint {}\n",
        ctx.checkpoint.as_ref().map_or("-".into(), |p| p.display().to_string())
    ));
    s.push_str("artifacts:\n");
    for a in &ctx.artifacts {
        s.push_str(a);
        s.push('\n');
    }
    s
}

pub fn run(
    subcommand: &str,
    common: CommonArgs,
    data: Option<PathBuf>,
    checkpoint: Option<PathBuf>,
    body: fn(&mut RunContext) -> Result<()>,
) -> Result<()> {
    let mut cfg = match &common.config {
        Some(path) => parse_config_file(path).with_context(|| format!("reading {}", path.display()))?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if common.quiet {
        cfg.quiet = true;
    }

    std::fs::create_dir_all(&common.out)?;
    let manifest_path = common.out.join("manifest.txt");
    if manifest_path.exists() {
        bail!(
            "{} already contains a run manifest; every run gets a fresh directory",
            common.out.display()
        );
    }

    let mut ctx = RunContext {
        quiet: cfg.quiet,
        cfg,
        out_dir: common.out.clone(),
        data,
        checkpoint,
        artifacts: Vec::new(),
    };

    let started = Instant::now();
    // resolved config first, so a failed run can still be reproduced
    let cfg_path = ctx.artifact("resolved_config.cfg");
    std::fs::write(&cfg_path, serialize_config(&ctx.cfg))?;

    body(&mut ctx)?;

    let manifest = render_manifest(subcommand, &ctx, started.elapsed().as_millis());
    std::fs::write(&manifest_path, manifest)?;
    ctx.note(format!(
        "{subcommand}: {} artifacts in {}",
        ctx.artifacts.len(),
        ctx.out_dir.display()
    ));
    Ok(())
}
