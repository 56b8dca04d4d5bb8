use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use hinbot::cli::{self, EvalOptions, Protocol};

#[derive(Parser)]
#[command(
    name = "hinbot",
    version,
    about = "Bot detection on heterogeneous social graphs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic labeled graph into a directory
    Generate {
        /// Preset name (see `--config help`) or generator spec file
        #[arg(long)]
        config: String,
        /// Override the spec's seed
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory for the graph CSVs and manifest
        #[arg(long)]
        out: PathBuf,
        /// Write into a non-empty output directory
        #[arg(long)]
        force: bool,
    },
    /// Train a model and write its report and checkpoint
    Train {
        /// Run config file (key = value lines)
        #[arg(long)]
        config: PathBuf,
        /// Override the config's seed
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory for report.csv and model.ckpt
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Evaluate a checkpoint on a graph's test split
    Eval {
        /// Run config supplying checkpoint/graph_dir keys
        #[arg(long)]
        config: Option<PathBuf>,
        /// Checkpoint path (overrides the config key)
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Graph directory (overrides the config key)
        #[arg(long)]
        graph_dir: Option<PathBuf>,
        /// Output directory for exports
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Write embeddings.csv (final node representations)
        #[arg(long)]
        export_embeddings: bool,
        /// Write attention_beta.csv and attention_alpha.csv
        #[arg(long)]
        export_attention: bool,
    },
    /// Run an ablation sweep (5 seeds per setting) and print its CSV
    Ablate {
        /// Run config file
        #[arg(long)]
        config: PathBuf,
        /// relations | architecture | heads | data_efficiency
        #[arg(long)]
        protocol: String,
        /// Override the config's base seed
        #[arg(long)]
        seed: Option<u64>,
        /// Also write ablation_<protocol>.csv here
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate {
            config,
            seed,
            out,
            force,
        } => cli::cmd_generate(&config, seed, &out, force),
        Command::Train { config, seed, out } => cli::cmd_train(&config, seed, &out),
        Command::Eval {
            config,
            checkpoint,
            graph_dir,
            out,
            export_embeddings,
            export_attention,
        } => cli::cmd_eval(&EvalOptions {
            config,
            checkpoint,
            graph_dir,
            out_dir: out,
            export_embeddings,
            export_attention,
        }),
        Command::Ablate {
            config,
            protocol,
            seed,
            out,
        } => match Protocol::from_str(&protocol) {
            Some(p) => cli::cmd_ablate(&config, p, seed, out.as_deref()),
            None => {
                eprintln!(
                    "error: unknown protocol '{protocol}'; expected relations, architecture, heads, or data_efficiency"
                );
                return ExitCode::FAILURE;
            }
        },
    };
    match result {
        Ok(stdout) => {
            print!("{stdout}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
