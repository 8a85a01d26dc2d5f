//! `confext`: batch front end for verification, sharp-constant estimates,
//! solves, continuations and concentration diagnostics.

mod commands;
mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::commands::{CommandOutput, ResolutionInfo};
use crate::config::{ConfigError, RunConfig};

const SCHEMA_VERSION: u32 = 1;

#[derive(Parser)]
#[command(name = "confext", version, about = "Conformally invariant extension operators: checks, sharp constants and solves")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the invariant checks; exits nonzero if any fails.
    Verify(CommonArgs),
    /// Estimate the sharp constant by every applicable method.
    Sharp(CommonArgs),
    /// Maximize the functional at one exponent.
    Solve(CommonArgs),
    /// Continue the solution down towards the critical exponent.
    Continue(CommonArgs),
    /// Continue and report concentration of the profiles.
    Diagnose(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory, overriding the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Multiply the sphere resolution by this factor.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    resolution_scale: u32,
    /// Seed for random starts and sampled checks, overriding the configuration.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Serialize)]
struct Report<'a> {
    schema_version: u32,
    command: &'a str,
    status: &'a str,
    config: &'a RunConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    resolution: Option<&'a ResolutionInfo>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    result: serde_json::Value,
}

fn write_report(out: &Path, report: &Report<'_>) -> anyhow::Result<()> {
    std::fs::create_dir_all(out)?;
    let mut text = serde_json::to_string_pretty(report)?;
    text.push('\n');
    std::fs::write(out.join("report.json"), text)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, args) = match &cli.command {
        Command::Verify(a) => ("verify", a),
        Command::Sharp(a) => ("sharp", a),
        Command::Solve(a) => ("solve", a),
        Command::Continue(a) => ("continue", a),
        Command::Diagnose(a) => ("diagnose", a),
    };
    let cfg = match RunConfig::load(&args.config) {
        Ok(c) => c.with_overrides(args.out.clone(), args.resolution_scale, args.seed),
        Err(ConfigError(msg)) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
    };
    let out = cfg.output_dir.clone();
    let outcome: anyhow::Result<CommandOutput> = match &cli.command {
        Command::Verify(_) => commands::verify(&cfg),
        Command::Sharp(_) => commands::sharp(&cfg),
        Command::Solve(_) => commands::solve(&cfg, &out),
        Command::Continue(_) => commands::continue_cmd(&cfg, &out),
        Command::Diagnose(_) => commands::diagnose(&cfg, &out),
    };
    let (report, code) = match &outcome {
        Ok(o) => (
            Report {
                schema_version: SCHEMA_VERSION,
                command: name,
                status: if o.passed { "ok" } else { "failed" },
                config: &cfg,
                resolution: Some(&o.resolution),
                error: None,
                result: o.result.clone(),
            },
            if o.passed { 0 } else { 1 },
        ),
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = if e.downcast_ref::<ConfigError>().is_some() { 2 } else { 1 };
            (
                Report {
                    schema_version: SCHEMA_VERSION,
                    command: name,
                    status: "error",
                    config: &cfg,
                    resolution: None,
                    error: Some(format!("{e:#}")),
                    result: serde_json::Value::Null,
                },
                code,
            )
        }
    };
    if let Err(e) = write_report(&out, &report) {
        eprintln!("error: cannot write report to {}: {e:#}", out.display());
        return ExitCode::from(1);
    }
    match code {
        0 => ExitCode::SUCCESS,
        c => ExitCode::from(c),
    }
}
