//! Thin CLI over the experiment runner.
//!
//! Usage:
//!   ocurrents run <config.json> [--out <dir>] [--seed <u64>]
//!   ocurrents --list-experiments
//!
//! Exit codes: 0 all experiments within tolerance, 1 an assertion failed,
//! 2 configuration or usage error.

use std::path::PathBuf;
use std::process::ExitCode;

use ocurrents::runner::{run_config, write_outputs, ExperimentConfig, EXPERIMENTS};

fn usage() -> &'static str {
    "usage: ocurrents run <config.json> [--out <dir>] [--seed <u64>]\n       ocurrents --list-experiments"
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--list-experiments") {
        for name in EXPERIMENTS {
            println!("{name}");
        }
        return ExitCode::SUCCESS;
    }
    if args.first().map(String::as_str) != Some("run") {
        eprintln!("{}", usage());
        return ExitCode::from(2);
    }

    let mut config_path: Option<PathBuf> = None;
    let mut out_dir: Option<PathBuf> = None;
    let mut seed: Option<u64> = None;
    let mut rest = args[1..].iter();
    while let Some(arg) = rest.next() {
        match arg.as_str() {
            "--out" => match rest.next() {
                Some(dir) => out_dir = Some(PathBuf::from(dir)),
                None => {
                    eprintln!("--out requires a directory\n{}", usage());
                    return ExitCode::from(2);
                }
            },
            "--seed" => match rest.next().and_then(|s| s.parse::<u64>().ok()) {
                Some(s) => seed = Some(s),
                None => {
                    eprintln!("--seed requires an unsigned integer\n{}", usage());
                    return ExitCode::from(2);
                }
            },
            other if config_path.is_none() && !other.starts_with('-') => {
                config_path = Some(PathBuf::from(other));
            }
            other => {
                eprintln!("unexpected argument {other:?}\n{}", usage());
                return ExitCode::from(2);
            }
        }
    }
    let Some(config_path) = config_path else {
        eprintln!("missing config path\n{}", usage());
        return ExitCode::from(2);
    };

    let mut config = match ExperimentConfig::from_path(&config_path) {
        Ok(config) => config,
        Err(err) => {
            eprintln!("config error: {err}");
            return ExitCode::from(2);
        }
    };
    if let Some(seed) = seed {
        config.seed = seed;
    }

    let (report, rows) = run_config(&config);
    match serde_json::to_string_pretty(&report) {
        Ok(json) => println!("{json}"),
        Err(err) => {
            eprintln!("failed to serialize report: {err}");
            return ExitCode::from(2);
        }
    }
    if let Some(dir) = out_dir {
        if let Err(err) = write_outputs(&report, &rows, &dir) {
            eprintln!("failed to write outputs: {err}");
            return ExitCode::from(2);
        }
    }
    for experiment in &report.experiments {
        if !experiment.pass {
            eprintln!(
                "FAIL {}: residual {:e} vs tolerance {:e}{}",
                experiment.name,
                experiment.max_residual,
                experiment.tolerance,
                experiment
                    .note
                    .as_deref()
                    .map(|n| format!(" ({n})"))
                    .unwrap_or_default()
            );
        }
    }
    if report.all_pass() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
