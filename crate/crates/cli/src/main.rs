//! `delone`: generate Delone sets, build neighbor graphs, compute heat
//! kernels and verify volume doubling, Poincaré and Gaussian estimates.
//!
//! Exit status: 0 all checks pass, 1 a check failed, 2 input error,
//! 3 numerical failure.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod pipeline;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use config::{input_error, ExperimentConfig, InputError};
use pipeline::{host_name, unix_now, write_provenance, Check, Pipeline, Provenance, Stage};

#[derive(Parser)]
#[command(name = "delone", version, about = "Diffusion on Delone sets: graphs, heat kernels and their Gaussian bounds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to the config's `output`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long)]
    threads: Option<usize>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Clone, Default)]
struct AnalysisFlags {
    /// Volume doubling scan.
    #[arg(long)]
    vd: bool,
    /// Poincaré constants.
    #[arg(long)]
    pi: bool,
    /// Gaussian envelope fits.
    #[arg(long)]
    ge: bool,
    /// Distance equivalence.
    #[arg(long)]
    equivalence: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run all stages, or only `--stage`.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        stage: Option<Stage>,
    },
    /// Write the point set and its Delone check.
    Generate(Common),
    /// Build the neighbor relation from the stored points.
    Relation(Common),
    /// Check axioms and degree bounds of the stored relation.
    Validate(Common),
    /// Compute discrete and metric heat kernels.
    Heat(Common),
    /// Doubling, Poincaré, envelope and equivalence analyses. Flags select a
    /// subset of the enabled analyses.
    Analyze {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        only: AnalysisFlags,
    },
    /// Collect every check into `report.json`.
    Report(Common),
}

fn classify(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if cause.downcast_ref::<InputError>().is_some() {
            return 2;
        }
        if let Some(d) = cause.downcast_ref::<delone::error::Error>() {
            return match d {
                delone::error::Error::Numerical(_) => 3,
                _ => 2,
            };
        }
    }
    2
}

fn print_summary(name: &str, checks: &[Check]) {
    println!("{name}");
    for c in checks {
        let mark = if c.passed { "PASS" } else { "FAIL" };
        println!("  {mark}  {:<9} {:<16} {}", c.stage.name(), c.name, c.detail);
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    println!("{} checks, {failed} failed", checks.len());
}

fn execute(cli: Cli, args: Vec<String>) -> Result<bool> {
    let (common, stages, only) = match cli.command {
        Command::Run { common, stage } => (common, stage.map_or(Stage::ALL.to_vec(), |s| vec![s]), None),
        Command::Generate(c) => (c, vec![Stage::Generate], None),
        Command::Relation(c) => (c, vec![Stage::Relation], None),
        Command::Validate(c) => (c, vec![Stage::Validate], None),
        Command::Heat(c) => (c, vec![Stage::Heat], None),
        Command::Analyze { common, only } => (common, vec![Stage::Analyze], Some(only)),
        Command::Report(c) => (c, vec![Stage::Report], None),
    };
    if let Some(k) = common.threads {
        if k == 0 {
            return Err(input_error("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| input_error(format!("cannot configure {k} threads: {e}")))?;
    }
    let mut cfg = ExperimentConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    let out = common
        .out
        .clone()
        .or_else(|| cfg.output.clone())
        .ok_or_else(|| input_error("no output directory: pass --out or set `output` in the config"))?;
    let name = cfg.name.clone();
    let mut pipeline = Pipeline::new(cfg, out.clone());
    if let Some(f) = only {
        if f.vd || f.pi || f.ge || f.equivalence {
            let t = &mut pipeline.toggles;
            t.vd &= f.vd;
            t.pi &= f.pi;
            t.ge &= f.ge;
            t.equivalence &= f.equivalence;
        }
    }
    let started = unix_now();
    let mut checks = Vec::new();
    for stage in stages.iter().copied() {
        let stage_checks = pipeline.run_stage(stage)?;
        if stage == Stage::Report {
            checks = stage_checks;
        } else {
            checks.extend(stage_checks);
        }
    }
    write_provenance(
        &out,
        &Provenance {
            tool: "delone",
            version: env!("CARGO_PKG_VERSION"),
            args,
            config: common.config.clone(),
            threads: rayon::current_num_threads(),
            host: host_name(),
            started_unix: started,
            finished_unix: unix_now(),
        },
    )?;
    print_summary(&name, &checks);
    Ok(checks.iter().all(|c| c.passed))
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().collect();
    let cli = Cli::parse();
    match execute(cli, args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(classify(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use anyhow::Context;

    #[test]
    fn exit_codes_follow_error_kind() {
        let numerical: Result<()> = Err(delone::error::Error::Numerical("Lanczos stalled".into()).into());
        assert_eq!(classify(&numerical.context("stage `heat`").unwrap_err()), 3);
        let invalid = anyhow::Error::from(delone::error::Error::InvalidInput("bad window".into()));
        assert_eq!(classify(&invalid), 2);
        assert_eq!(classify(&input_error("missing file")), 2);
    }
}
