//! Command-line driver.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};

use crate::config::{resolve_seed, Config, StudyKind, SEED_ENV};
use crate::error::{Error, Result};
use crate::output::{manifest_text, write_manifest, StudyOutput};
use crate::parallel::worker_count;
use crate::studies::run_study;

#[derive(Debug, Parser)]
#[command(
    name = "chc",
    version,
    about = "Stochastic Cahn–Hilliard finite element experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Monte-Carlo runs with pathwise diagnostics (or any study via --study)
    Run(Common),
    /// Deterministic linear error rates
    StudyDet(Common),
    /// Rates for the discrete derivative estimates
    StudyDetDeriv(Common),
    /// Strong rates of the discrete stochastic convolution
    StudyStochConv(Common),
    /// Strong self-convergence on a coupled hierarchy
    StudyStrong(Common),
    /// Moment-bound stability across a refinement ladder
    StudyMoments(Common),
    /// Empirical Hölder quotients in time
    ProbeHolder(Common),
}

#[derive(Debug, Args, Clone)]
pub struct Common {
    /// Configuration file (`key = value` lines)
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Seed; overrides CHC_SEED and the configuration
    #[arg(long, value_name = "U64")]
    pub seed: Option<u64>,
    /// Output directory
    #[arg(long, value_name = "DIR", default_value = "out")]
    pub out: PathBuf,
    /// Worker threads, 0 for available parallelism
    #[arg(long, value_name = "N", default_value_t = 0)]
    pub workers: usize,
    /// Study to run; must agree with the subcommand unless it is `run`
    #[arg(long, value_name = "NAME")]
    pub study: Option<StudyKind>,
}

impl Command {
    fn parts(&self) -> (Option<StudyKind>, &Common) {
        match self {
            Command::Run(c) => (None, c),
            Command::StudyDet(c) => (Some(StudyKind::Det), c),
            Command::StudyDetDeriv(c) => (Some(StudyKind::DetDeriv), c),
            Command::StudyStochConv(c) => (Some(StudyKind::StochConv), c),
            Command::StudyStrong(c) => (Some(StudyKind::Strong), c),
            Command::StudyMoments(c) => (Some(StudyKind::Moments), c),
            Command::ProbeHolder(c) => (Some(StudyKind::Holder), c),
        }
    }
}

/// Resolve the configuration for a subcommand: file (or defaults), study
/// selection and seed.
pub fn resolve(command: &Command, env_seed: Option<&str>) -> Result<Config> {
    let (fixed, common) = command.parts();
    let study = match (fixed, common.study) {
        (Some(a), Some(b)) if a != b => {
            return Err(Error::invalid(
                "study",
                format!("--study {} conflicts with the subcommand", b.name()),
            ))
        }
        (Some(a), _) => Some(a),
        (None, b) => b,
    };
    let mut cfg = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            Config::parse(&text, study)?
        }
        None => Config::defaults(study.unwrap_or(StudyKind::Run)),
    };
    cfg.seed = resolve_seed(common.seed, env_seed, cfg.seed)?;
    cfg.validate()?;
    Ok(cfg)
}

/// Write the manifest, run the study and write its outputs.
pub fn execute(cfg: &Config, out: &Path, workers: usize) -> Result<StudyOutput> {
    let workers = worker_count(workers);
    let timestamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    let manifest = out.join("manifest.txt");
    write_manifest(&manifest, &manifest_text(cfg, workers, timestamp, &[]))?;
    let result = run_study(cfg, workers)?;
    let written = result.write(out)?;
    write_manifest(&manifest, &manifest_text(cfg, workers, timestamp, &written))?;
    Ok(result)
}

/// Entry point; returns the process exit code.
pub fn main_with(cli: Cli) -> i32 {
    let env_seed = std::env::var(SEED_ENV).ok();
    let (_, common) = cli.command.parts();
    let outcome = resolve(&cli.command, env_seed.as_deref()).and_then(|cfg| {
        let out = execute(&cfg, &common.out, common.workers)?;
        Ok((cfg, out))
    });
    match outcome {
        Ok((cfg, out)) => {
            for c in &out.checks {
                println!(
                    "{} {}: {}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.detail
                );
            }
            println!("{} written to {}", cfg.study.name(), common.out.display());
            if out.passed() {
                0
            } else {
                1
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
