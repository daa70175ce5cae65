//! `spikepwl` command-line front end.

mod cmd;
mod error;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "spikepwl", version, about = "Piecewise-linear spiking neuron toolkit")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct GlobalArgs {
    /// JSON file with default values; flags take precedence.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory for artifacts.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    #[arg(long, global = true, value_enum)]
    pub backend: Option<BackendArg>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Svg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendArg {
    Float,
    Fixed,
}

/// Resolved global settings.
#[derive(Debug, Clone)]
pub struct Globals {
    pub seed: u64,
    pub out: PathBuf,
    pub format: Format,
    pub backend: BackendArg,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate one neuron.
    Neuron(cmd::NeuronArgs),
    /// Grid search for K coefficients.
    Search(cmd::SearchArgs),
    /// Simulate a random excitatory/inhibitory network.
    Network(cmd::NetworkArgs),
    /// Train the rate-coded classifier.
    Train(cmd::TrainArgs),
    /// Evaluate a trained classifier.
    Eval(cmd::EvalArgs),
    /// Size the hardware pipeline and report resources.
    Hwplan(cmd::HwplanArgs),
}

/// Overlays the flags that were given on top of the config-file section.
fn merge<T>(section: Option<&Value>, args: &T) -> Result<T, CliError>
where
    T: Serialize + for<'de> Deserialize<'de>,
{
    let mut base = match section {
        Some(Value::Object(m)) => m.clone(),
        Some(_) => return Err(CliError::Config("config sections must be JSON objects".into())),
        None => serde_json::Map::new(),
    };
    if let Value::Object(flags) = serde_json::to_value(args).map_err(|e| CliError::Config(e.to_string()))? {
        for (k, v) in flags {
            if !v.is_null() {
                base.insert(k, v);
            }
        }
    }
    serde_json::from_value(Value::Object(base)).map_err(|e| CliError::Config(format!("bad config value: {e}")))
}

fn run(cli: Cli) -> Result<Value, CliError> {
    let config: Value = match &cli.global.config {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("bad config {}: {e}", p.display())))?
        }
        None => Value::Object(Default::default()),
    };
    let g: GlobalArgs = merge(Some(&config), &cli.global)?;
    let globals = Globals {
        seed: g.seed.unwrap_or(1),
        out: g.out.unwrap_or_else(|| PathBuf::from("out")),
        format: g.format.unwrap_or(Format::Csv),
        backend: g.backend.unwrap_or(BackendArg::Float),
    };
    std::fs::create_dir_all(&globals.out)
        .map_err(|e| CliError::Config(format!("cannot create output directory {}: {e}", globals.out.display())))?;
    match &cli.command {
        Command::Neuron(a) => cmd::neuron(&merge(config.get("neuron"), a)?, &globals),
        Command::Search(a) => cmd::search(&merge(config.get("search"), a)?, &globals),
        Command::Network(a) => cmd::network(&merge(config.get("network"), a)?, &globals),
        Command::Train(a) => cmd::train(&merge(config.get("train"), a)?, &globals),
        Command::Eval(a) => cmd::eval(&merge(config.get("eval"), a)?, &globals),
        Command::Hwplan(a) => cmd::hwplan(&merge(config.get("hwplan"), a)?, &globals),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(summary) => {
            println!(
                "{}",
                serde_json::to_string_pretty(&summary).expect("summary serializes")
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
