use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use s2track::scenario::{
    cmd_certify, cmd_run, cmd_sweep, error_exit_code, load_config, render_report_text, render_summary_text,
    render_sweep_text, seed_from_env, to_json, SweepOptions,
};
use s2track::Error;

/// Certify and simulate pointing/angular-velocity tracking scenarios.
#[derive(Parser)]
#[command(name = "s2track", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the gain conditions and report the ultimate-bound radius.
    Certify(Common),
    /// Certify, then simulate and write the trajectory CSV and summary.
    Run(Common),
    /// Run every scenario matching a glob pattern.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Worker threads.
        #[arg(long, default_value_t = 1)]
        parallelism: usize,
    },
}

#[derive(Args)]
struct Common {
    /// Scenario file (a glob pattern for `sweep`).
    #[arg(long)]
    config: String,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print JSON on stdout instead of text.
    #[arg(long)]
    json: bool,
    /// Simulate even when certification fails.
    #[arg(long)]
    allow_uncertified: bool,
    /// Override the integration step, s.
    #[arg(long)]
    dt: Option<f64>,
    /// Override the simulated duration, s.
    #[arg(long)]
    duration: Option<f64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(error_exit_code(&e) as u8)
        }
    }
}

fn run(cli: Cli) -> Result<i32, Error> {
    let seed = seed_from_env()?;
    match cli.command {
        Command::Certify(c) => {
            let cfg = load_config(c.config.as_ref())?.with_overrides(c.dt, c.duration)?;
            let o = cmd_certify(&cfg, seed, c.out.as_deref())?;
            if c.json {
                print!("{}", to_json(&o.report));
            } else {
                print!("{}", render_report_text(&o.report));
            }
            Ok(o.exit_code)
        }
        Command::Run(c) => {
            let cfg = load_config(c.config.as_ref())?.with_overrides(c.dt, c.duration)?;
            let out = c.out.unwrap_or_else(|| PathBuf::from("."));
            let o = cmd_run(&cfg, seed, &out, c.allow_uncertified)?;
            if c.json {
                print!("{}", to_json(&o.summary));
            } else {
                print!("{}", render_summary_text(&o.summary));
            }
            Ok(o.summary.exit_status)
        }
        Command::Sweep { common: c, parallelism } => {
            let report = cmd_sweep(
                &c.config,
                &SweepOptions {
                    parallelism,
                    seed,
                    out: c.out.as_deref(),
                    allow_uncertified: c.allow_uncertified,
                    dt: c.dt,
                    duration: c.duration,
                },
            )?;
            if c.json {
                print!("{}", to_json(&report));
            } else {
                print!("{}", render_sweep_text(&report));
            }
            Ok(report.exit_status)
        }
    }
}
