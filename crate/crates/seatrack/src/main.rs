use std::net::{IpAddr, SocketAddr};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use seatrack::commands::{self, LiveOptions, SimulateOutputs};

#[derive(Parser)]
#[command(name = "seatrack", version, about = "Seat-level classroom behavior analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analyze a detection stream into a session document
    Analyze {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic stream and its ground truth
    Simulate {
        #[arg(long)]
        spec: PathBuf,
        /// Overrides the seed stored in the spec
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        /// Also write the matching analysis config
        #[arg(long)]
        config_out: Option<PathBuf>,
    },
    /// Score a session document against ground truth
    Evaluate {
        #[arg(long)]
        session: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        /// Write the machine-readable report here
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Serve sessions over HTTP
    Serve {
        #[arg(long)]
        store: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
        /// Growing stream to analyze live
        #[arg(long, requires = "config")]
        live_input: Option<PathBuf>,
        /// Config of the live classroom
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "live")]
        live_id: String,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Analyze { input, config, out } => {
            let (session, stats) = commands::analyze(&input, &config, &out)?;
            print!("{}", commands::summary(&session, &stats));
        }
        Command::Simulate { spec, seed, out, truth, config_out } => {
            let n = commands::simulate(
                &spec,
                seed,
                SimulateOutputs { stream: &out, truth: &truth, config: config_out.as_deref() },
            )?;
            println!("wrote {n} frames");
        }
        Command::Evaluate { session, truth, json } => {
            print!("{}", commands::evaluate(&session, &truth, json.as_deref())?);
        }
        Command::Serve { store, port, host, live_input, config, live_id } => {
            let live = live_input.map(|input| LiveOptions {
                input,
                config: config.expect("clap enforces --config"),
                id: live_id,
            });
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(commands::serve(&store, SocketAddr::new(host, port), live))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
