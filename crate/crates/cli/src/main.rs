use std::path::PathBuf;
use std::process::ExitCode;

use cilfair::{probe_file, run_file, sweep_file, ProbeKind, RunOptions, SweepParam};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "cilfair",
    version,
    about = "Fairness experiments for class-incremental learning"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON).
    config: PathBuf,
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write into a non-empty output directory.
    #[arg(long)]
    force: bool,
    /// Worker threads (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
}

impl Common {
    fn options(&self) -> RunOptions {
        RunOptions {
            out: self.out.clone(),
            force: self.force,
            jobs: self.jobs,
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Every method and seed through the incremental schedule.
    Run(Common),
    /// One-step experiment isolating a source of unfairness.
    Probe {
        kind: ProbeKind,
        #[command(flatten)]
        common: Common,
    },
    /// Grid over one hyperparameter.
    Sweep {
        param: SweepParam,
        #[command(flatten)]
        common: Common,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Cmd::Run(c) => run_file(&c.config, &c.options()),
        Cmd::Probe { kind, common } => probe_file(*kind, &common.config, &common.options()),
        Cmd::Sweep { param, common } => sweep_file(*param, &common.config, &common.options()),
    };
    match result {
        Ok(dir) => {
            println!("wrote {}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("cilfair: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
