use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};
use spikelink::harness::{self, ExperimentConfig};
use spikelink::{Error, Result};

#[derive(Parser)]
#[command(
    name = "spikelink",
    version,
    about = "Spiking split computing over a simulated optical link"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize the event dataset
    GenerateDataset(Common),
    /// Train end to end through the randomized link
    Train(Common),
    /// Accuracy over the pointing-error grid
    EvalSweep(WithCheckpoint),
    /// Monte-Carlo bit error rate of the link
    Ber(Common),
    /// Operation counts and energy of a trained model
    Energy(WithCheckpoint),
}

#[derive(Args)]
struct Common {
    /// JSON experiment configuration; defaults apply when omitted
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct WithCheckpoint {
    #[command(flatten)]
    common: Common,
    /// Checkpoint base path; defaults to <out>/checkpoint
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

impl Common {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.output_dir = o.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<Value> {
    match cli.command {
        Command::GenerateDataset(c) => harness::cmd_generate_dataset(&c.config()?),
        Command::Train(c) => harness::cmd_train(&c.config()?, |e| {
            eprintln!(
                "epoch {:>3}  loss {:.4}  train {:.3}  eval {:.3}",
                e.epoch, e.loss, e.train_accuracy, e.eval_accuracy
            )
        }),
        Command::EvalSweep(c) => {
            harness::cmd_eval_sweep(&c.common.config()?, c.checkpoint.as_deref())
        }
        Command::Ber(c) => harness::cmd_ber(&c.config()?),
        Command::Energy(c) => harness::cmd_energy(&c.common.config()?, c.checkpoint.as_deref()),
    }
}

fn error_json(e: &Error) -> Value {
    json!({ "error": { "kind": e.kind(), "message": e.to_string() } })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let v = json!({ "error": { "kind": "usage", "message": e.to_string().trim_end() } });
            println!("{v}");
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(v) => {
            println!(
                "{}",
                serde_json::to_string_pretty(&v).unwrap_or_else(|_| v.to_string())
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            println!("{}", error_json(&e));
            ExitCode::FAILURE
        }
    }
}
