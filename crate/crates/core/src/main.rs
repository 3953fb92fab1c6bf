use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use dual_threshold::commands::{self, EvaluateOptions};
use dual_threshold::AbstainTarget;

const VERSION: &str = concat!(
    env!("CARGO_PKG_VERSION"),
    " (thresholds format 1, manifest format 1, generator v1)"
);

#[derive(Parser)]
#[command(name = "dual-threshold", version = VERSION, about = "Dual-threshold conformal prediction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum Target {
    Misclassified,
    NotCovered,
}

impl From<Target> for AbstainTarget {
    fn from(t: Target) -> Self {
        match t {
            Target::Misclassified => AbstainTarget::Misclassified,
            Target::NotCovered => AbstainTarget::NotCovered,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic logits files and a manifest from a sweep config.
    Gen {
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Calibrate conformal and abstention thresholds.
    Calibrate {
        #[arg(long)]
        cal: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        alpha: f64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Target::Misclassified)]
        abstain_target: Target,
    },
    /// Apply thresholds to a test set and write records and a summary.
    Evaluate {
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        thresholds: PathBuf,
        #[arg(long)]
        records_out: Option<PathBuf>,
        #[arg(long)]
        summary_out: Option<PathBuf>,
        #[arg(long, default_value = "clean")]
        condition: String,
        #[arg(long, default_value_t = 0)]
        severity: u8,
    },
    /// Calibrate on clean data and evaluate every condition x severity group.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = std::thread::available_parallelism().map_or(1, |n| n.get()))]
        jobs: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut out = std::io::stdout();
    let mut err = std::io::stderr();
    let result = match cli.command {
        Command::Gen { config, out: dir } => commands::cmd_gen(&config, &dir, &mut out),
        Command::Calibrate {
            cal,
            alpha,
            out: path,
            abstain_target,
        } => commands::cmd_calibrate(
            &cal,
            alpha,
            abstain_target.into(),
            &path,
            &mut out,
            &mut err,
        )
        .map(drop),
        Command::Evaluate {
            test,
            thresholds,
            records_out,
            summary_out,
            condition,
            severity,
        } => {
            let opts = EvaluateOptions {
                records_out: records_out.as_deref(),
                summary_out: summary_out.as_deref(),
                condition: &condition,
                severity,
            };
            commands::cmd_evaluate(&test, &thresholds, &opts, &mut out).map(drop)
        }
        Command::Sweep {
            config,
            out_dir,
            jobs,
        } => commands::cmd_sweep(&config, &out_dir, jobs, &mut out).map(drop),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(commands::exit_code(&e) as u8)
        }
    }
}
