use std::path::PathBuf;
use std::process::ExitCode;

use bodycue::config::{parse_override, Command, RunConfig};
use bodycue::Error;
use clap::{Parser, Subcommand};
use serde_json::Value;

#[derive(Parser)]
#[command(name = "bodycue", version, about = "Body-modality distress analysis from pose keypoints")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// JSON config file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Take the configuration from a previous run's manifest.json
    #[arg(long, global = true, conflicts_with = "config")]
    manifest: Option<PathBuf>,
    #[arg(long, global = true)]
    corpus: Option<PathBuf>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Fusion model bundle directory
    #[arg(long, global = true)]
    model: Option<PathBuf>,
    #[arg(long, global = true)]
    motion_model: Option<PathBuf>,
    /// Script JSON for `synth`
    #[arg(long, global = true)]
    script: Option<PathBuf>,
    /// Comma-separated session names
    #[arg(long, global = true, value_delimiter = ',')]
    sessions: Option<Vec<String>>,
    /// Override any config key, e.g. `--set K=16`; repeatable
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// More log output; repeat for debug
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    /// Errors only
    #[arg(short, long, global = true)]
    quiet: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Preprocess poses and align sidecar tracks
    Ingest,
    /// Body-gesture descriptor per session
    GestureStats,
    /// Self-adaptor location timelines
    DetectAdaptors,
    /// DYNAMIC/STATIC slice classification; trains a model from ground truth if none is given
    ClassifyMotion,
    /// Fidget activation matrices
    EncodeFidgets,
    /// Train the fusion model on every session
    TrainFusion,
    /// Cross-validate, or score a trained model with --model
    Evaluate,
    /// Linear analysis, polarity report and feature search
    Analyze,
    /// Write a synthetic corpus
    Synth,
}

impl Cmd {
    fn command(self) -> Command {
        match self {
            Cmd::Ingest => Command::Ingest,
            Cmd::GestureStats => Command::GestureStats,
            Cmd::DetectAdaptors => Command::DetectAdaptors,
            Cmd::ClassifyMotion => Command::ClassifyMotion,
            Cmd::EncodeFidgets => Command::EncodeFidgets,
            Cmd::TrainFusion => Command::TrainFusion,
            Cmd::Evaluate => Command::Evaluate,
            Cmd::Analyze => Command::Analyze,
            Cmd::Synth => Command::Synth,
        }
    }
}

fn path_value(p: &PathBuf) -> Value {
    Value::String(p.display().to_string())
}

/// `--set` first, then the dedicated flags, so flags win.
fn overrides(cli: &Cli) -> Result<Vec<(String, Value)>, Error> {
    let mut out = cli.set.iter().map(|s| parse_override(s)).collect::<Result<Vec<_>, _>>()?;
    let paths = [
        ("corpus", &cli.corpus),
        ("out", &cli.out),
        ("model", &cli.model),
        ("motion_model", &cli.motion_model),
        ("script", &cli.script),
    ];
    for (key, p) in paths {
        if let Some(p) = p {
            out.push((key.to_string(), path_value(p)));
        }
    }
    if let Some(seed) = cli.seed {
        out.push(("seed".into(), seed.into()));
    }
    if let Some(s) = &cli.sessions {
        out.push(("sessions".into(), s.clone().into()));
    }
    Ok(out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet {
        "error"
    } else {
        match cli.verbose {
            0 => "info",
            1 => "debug",
            _ => "trace",
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .target(env_logger::Target::Stderr)
        .init();

    let command = cli.command.command();
    let result = overrides(&cli)
        .and_then(|o| RunConfig::load(cli.config.as_deref(), cli.manifest.as_deref(), &o))
        .and_then(|cfg| bodycue::run(command, &cfg));
    match result {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
