use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::error;
use radarloc_cli::config::parse_overrides;
use radarloc_cli::{run_pipeline, run_stage, scenario, CliError, PipelineConfig, Stage};

/// Roadside radar self-localization.
#[derive(Parser)]
#[command(name = "radarloc", version)]
struct Cli {
    /// Pipeline config (flat TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for the init perturbation, track selection and simulation noise.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run coarse, track, label and sicp in order and print the report.
    Run {
        /// Config overrides as `--key value`.
        #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "OVERRIDES")]
        overrides: Vec<String>,
    },
    /// Run one stage from the artifacts in the output directory.
    Stage {
        stage: Stage,
        #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "OVERRIDES")]
        overrides: Vec<String>,
    },
    /// Simulate a scenario and write its radar, road cloud, map and truth.
    GenScenario {
        /// Bundled scenario name (intersection, two-right-turns) or spec path.
        spec: String,
    },
}

fn load(cli: &Cli, raw: &[String]) -> Result<PipelineConfig, CliError> {
    let mut overrides = parse_overrides(raw)?;
    if let Some(s) = cli.seed {
        overrides.push(("seed".into(), s.to_string()));
    }
    if let Some(o) = &cli.out {
        overrides.push(("out".into(), o.to_string_lossy().into_owned()));
    }
    PipelineConfig::load(cli.config.as_deref(), &overrides)
}

fn main_inner(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Run { overrides } => {
            let cfg = load(cli, overrides)?;
            let report = run_pipeline(&cfg)?;
            println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
        }
        Command::Stage { stage, overrides } => {
            let cfg = load(cli, overrides)?;
            run_stage(&cfg, *stage)?;
        }
        Command::GenScenario { spec } => {
            let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("."));
            let config = scenario::gen_scenario(spec, &out, cli.seed)?;
            println!("{}", config.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match main_inner(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            ExitCode::from(e.code as u8)
        }
    }
}
