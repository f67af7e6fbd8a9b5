use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use stepcast_cli::commands::{ablation_table, cmd_ablation, cmd_parse, cmd_pipeline, write_parses};
use stepcast_cli::service::{serve, AppState};
use stepcast_cli::{CliError, PipelineConfig};
use stepcast_core::corpus::load_devices;
use stepcast_core::executor::ExecConfig;
use stepcast_core::matcher::DEFAULT_THRESHOLD;

#[derive(Parser)]
#[command(name = "stepcast", version, about = "Turn text instructions into visual tutorials")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse every instruction and print (or write) its k best readings.
    Parse {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = 3)]
        beams: usize,
        /// Write one JSON file per instruction here instead of printing.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        lenient: bool,
    },
    /// Run the full pipeline and write tutorial bundles.
    Pipeline(RunArgs),
    /// Compare baseline, beam search, look-ahead and both.
    Ablation(RunArgs),
    /// Serve tutorial bundles and tracking sessions over HTTP.
    Serve {
        /// Pipeline output directory, or a directory of bundles.
        #[arg(long)]
        out: PathBuf,
        #[arg(long = "device", required = true)]
        devices: Vec<PathBuf>,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
        threshold: f64,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long = "device", required = true)]
    devices: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 3)]
    beams: usize,
    #[arg(long)]
    lookahead: bool,
    #[arg(long, default_value_t = 5)]
    attempts: u32,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long)]
    lenient: bool,
}

impl RunArgs {
    fn config(self) -> PipelineConfig {
        PipelineConfig {
            corpus_dir: self.corpus,
            device_files: self.devices,
            out_dir: self.out,
            exec: ExecConfig {
                attempt_budget: self.attempts,
                lookahead: self.lookahead,
                beams: self.beams,
                workers: self.workers.max(1),
            },
            lenient: self.lenient,
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Parse {
            corpus,
            beams,
            out,
            lenient,
        } => {
            let parsed = cmd_parse(&corpus, beams, lenient)?;
            match out {
                Some(dir) => write_parses(&parsed, &dir)?,
                None => println!("{}", serde_json::to_string_pretty(&parsed).expect("parses serialize")),
            }
        }
        Command::Pipeline(args) => {
            let report = cmd_pipeline(&args.config())?;
            print!("{}", report.render());
        }
        Command::Ablation(args) => {
            let report = cmd_ablation(&args.config())?;
            print!("{}", ablation_table(&report));
        }
        Command::Serve {
            out,
            devices,
            port,
            threshold,
        } => {
            let devices = load_devices(&devices)?;
            let nested = out.join("tutorials");
            let bundle_dir = if nested.is_dir() { nested } else { out };
            let state = AppState::load(&bundle_dir, devices, threshold).map_err(|e| CliError::Usage(e.to_string()))?;
            let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Other(e.into()))?;
            runtime
                .block_on(serve(Arc::new(state), port))
                .map_err(|e| CliError::Other(e.into()))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
