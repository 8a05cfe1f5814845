use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use cep_eens::runner::{execute, EensCase, Mode, RunConfig};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Full,
    FixedLambda,
    Oracle,
    WaitAndSee,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CaseArg {
    Explicit,
    Zero,
    Fraction,
}

/// Capacity expansion planning with per-zone EENS limits.
///
/// Log verbosity is read from CEP_EENS_LOG (for example `info` or `debug`).
#[derive(Debug, Parser)]
#[command(version)]
struct Args {
    /// Instance JSON
    #[arg(long)]
    instance: PathBuf,
    /// Scenario manifest JSON
    #[arg(long)]
    scenarios: PathBuf,
    #[arg(long, value_enum, default_value = "full")]
    mode: ModeArg,
    /// Starting price for every zone, EUR/MWh
    #[arg(long, default_value_t = 50.0)]
    lambda0: f64,
    /// Uniform price for fixed-lambda mode, EUR/MWh
    #[arg(long)]
    fixed_lambda: Option<f64>,
    #[arg(long, default_value_t = 0.02)]
    gap_target: f64,
    #[arg(long, default_value_t = 50)]
    max_outer: usize,
    #[arg(long, default_value_t = 100)]
    max_inner: usize,
    #[arg(long, default_value_t = 1e-3)]
    inner_tol: f64,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long, value_enum, default_value = "explicit")]
    eens_case: CaseArg,
    /// Fraction of minimum annual demand, with `--eens-case fraction`
    #[arg(long)]
    eens_fraction: Option<f64>,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
}

fn config(args: Args) -> Result<RunConfig, String> {
    let eens_case = match (args.eens_case, args.eens_fraction) {
        (CaseArg::Fraction, Some(p)) => EensCase::Fraction(p),
        (CaseArg::Fraction, None) => return Err("--eens-case fraction needs --eens-fraction".into()),
        (_, Some(_)) => return Err("--eens-fraction only applies to --eens-case fraction".into()),
        (CaseArg::Explicit, None) => EensCase::Explicit,
        (CaseArg::Zero, None) => EensCase::Zero,
    };
    let mode = match args.mode {
        ModeArg::Full => Mode::Full,
        ModeArg::FixedLambda => Mode::FixedLambda,
        ModeArg::Oracle => Mode::Oracle,
        ModeArg::WaitAndSee => Mode::WaitAndSee,
    };
    Ok(RunConfig {
        mode,
        lambda0: args.lambda0,
        fixed_lambda: args.fixed_lambda,
        gap_target: args.gap_target,
        max_outer: args.max_outer,
        max_inner: args.max_inner,
        inner_tol: args.inner_tol,
        workers: args.workers,
        eens_case,
        ..RunConfig::new(args.instance, args.scenarios, args.out)
    })
}

fn fail(kind: &str, message: &str) -> ExitCode {
    let body = serde_json::json!({ "error": { "kind": kind, "message": message } });
    eprintln!("{body}");
    ExitCode::FAILURE
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("CEP_EENS_LOG", "warn")).init();
    let cfg = match config(Args::parse()) {
        Ok(c) => c,
        Err(m) => return fail("usage", &m),
    };
    match execute(&cfg) {
        Ok(summary) => {
            println!(
                "{}",
                serde_json::to_string_pretty(&summary).expect("summary serializes")
            );
            ExitCode::SUCCESS
        }
        Err(e) => fail(e.kind(), &e.to_string()),
    }
}
