use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use dropsort::runner::{execute, Command, RunConfig, RunnerError};

/// Simulated image-activated droplet sorter.
#[derive(Debug, Parser)]
#[command(name = "dropsort", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Render labeled training and validation images.
    Gen,
    /// Train the scenario's classifier(s) and write checkpoints.
    Train,
    /// Accuracy, loss and confusion matrix on the validation set.
    Eval,
    /// Run a droplet stream through the sorter.
    Sort,
    /// False positives and negatives across probability thresholds.
    Sweep {
        /// Comma-separated thresholds, e.g. 0,0.5,0.9,0.99.
        #[arg(long, value_delimiter = ',')]
        thetas: Option<Vec<f64>>,
    },
    /// Wall-clock latency of each pipeline stage.
    Bench,
}

#[derive(Debug, Args)]
struct Common {
    /// Flat key = value configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Root directory for data, checkpoints and reports.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_name = "NAME")]
    scenario: Option<String>,
    /// Minimum class probability required to sort.
    #[arg(long, global = true, value_name = "X")]
    theta: Option<f64>,
    #[arg(long = "deadline-ms", global = true, value_name = "N")]
    deadline_ms: Option<f64>,
    /// Exit with code 3 when the latency budget is exceeded.
    #[arg(long, global = true)]
    strict: bool,
    /// Override any configuration key.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Log progress (-v) or details (-vv).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

fn overrides(cli: &Cli) -> Result<Vec<(String, String)>> {
    let c = &cli.common;
    let mut pairs = match &c.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| RunnerError::Usage(format!("cannot read config {}: {e}", path.display())))?;
            RunConfig::parse_file_text(&text)?
        }
        None => Vec::new(),
    };
    let mut push = |k: &str, v: String| pairs.push((k.to_string(), v));
    if let Some(v) = c.seed {
        push("seed", v.to_string());
    }
    if let Some(v) = &c.out {
        push("out_dir", v.display().to_string());
    }
    if let Some(v) = &c.scenario {
        push("scenario", v.clone());
    }
    if let Some(v) = c.theta {
        push("theta", v.to_string());
    }
    if let Some(v) = c.deadline_ms {
        push("deadline_ms", v.to_string());
    }
    if c.strict {
        push("strict", "true".into());
    }
    for kv in &c.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| RunnerError::Usage(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        push(k.trim(), v.trim().to_string());
    }
    if let Cmd::Sweep { thetas: Some(t) } = &cli.command {
        let list: Vec<String> = t.iter().map(|x| x.to_string()).collect();
        push("thetas", list.join(","));
    }
    Ok(pairs)
}

fn run(cli: &Cli) -> Result<()> {
    let pairs = overrides(cli)?;
    let cfg = RunConfig::resolve(pairs.iter().map(|(k, v)| (k.as_str(), v.as_str())))?;
    let cmd = match cli.command {
        Cmd::Gen => Command::Gen,
        Cmd::Train => Command::Train,
        Cmd::Eval => Command::Eval,
        Cmd::Sort => Command::Sort,
        Cmd::Sweep { .. } => Command::Sweep,
        Cmd::Bench => Command::Bench,
    };
    let outcome = execute(cmd, &cfg).with_context(|| format!("`{cmd}` failed"))?;
    for line in &outcome.lines {
        println!("{line}");
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.common.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e.downcast_ref::<RunnerError>().map_or(2, RunnerError::exit_code);
            ExitCode::from(code as u8)
        }
    }
}
