use anyhow::Result;
use clap::{Parser, Subcommand};
use clips_cli::commands::{self, EvalArgs, RunArgs};
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "clips",
    version,
    about = "Goal inference and assistance from actions and instructions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Play one scripted episode with a simulated principal.
    Run {
        /// Scenario file, or the name of a bundled scenario.
        #[arg(long)]
        scenario: String,
        /// Evidence used for inference: multimodal, action-only or language-only.
        #[arg(long, default_value = "multimodal")]
        mode: String,
        /// qmdp-offline, qmdp-online, pibar, literal-naive or literal-efficient.
        #[arg(long, default_value = "qmdp-offline")]
        assist: String,
        #[arg(long, default_value = "template")]
        scorer: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Trace file (JSON lines).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare every method on a scenario pack.
    Eval {
        /// Pack directory holding pack.json; the bundled pack if omitted.
        #[arg(long)]
        pack: Option<PathBuf>,
        /// Summary CSV; details and traces are written next to it.
        #[arg(long, default_value = "report.csv")]
        report: PathBuf,
        #[arg(long, default_value = "template")]
        scorer: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Bootstrap resamples for rating correlations.
        #[arg(long, default_value_t = 1000)]
        n_boot: usize,
    },
    /// Serve live sessions over HTTP.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: std::net::IpAddr,
        #[arg(long, default_value = "template")]
        scorer: String,
    },
}

fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_max_level(tracing::Level::INFO)
        .with_writer(std::io::stderr)
        .init();
    match Cli::parse().command {
        Command::Run {
            scenario,
            mode,
            assist,
            scorer,
            seed,
            out,
        } => {
            let scorer = clips_cli::make_scorer(&scorer)?;
            let (_, _, text) = commands::run(
                &RunArgs {
                    scenario,
                    mode,
                    assist,
                    seed,
                    out,
                },
                scorer.as_ref(),
            )?;
            print!("{text}");
        }
        Command::Eval {
            pack,
            report,
            scorer,
            seed,
            n_boot,
        } => {
            let scorer = clips_cli::make_scorer(&scorer)?;
            let (_, text) = commands::eval(
                &EvalArgs {
                    pack,
                    report,
                    seed,
                    n_boot,
                },
                scorer.as_ref(),
            )?;
            print!("{text}");
        }
        Command::Serve { port, host, scorer } => {
            let scorer = clips_cli::make_scorer(&scorer)?;
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(clips_cli::server::serve((host, port).into(), scorer))?;
        }
    }
    Ok(())
}
