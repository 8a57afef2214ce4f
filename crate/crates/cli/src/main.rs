use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tomoforge_cli::commands::{cmd_report, cmd_run, cmd_verify, ReportArgs, ReportKind};
use tomoforge_cli::verify::{Level, Probes};

#[derive(Parser)]
#[command(name = "tomoforge", version, about = "Quantum state tomography from incomplete POVM data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a sweep from a JSON config and write CSV results.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Run the built-in invariant checks.
    Verify {
        #[arg(long, value_enum, default_value = "fast")]
        level: Level,
    },
    /// Summarize one metric of a trials.csv as a curve or histograms.
    Report {
        #[arg(long)]
        trials: PathBuf,
        #[arg(long, value_enum)]
        kind: ReportKind,
        #[arg(long)]
        metric: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 20)]
        bins: usize,
        /// Histogram range as `lo,hi`.
        #[arg(long, value_parser = parse_range)]
        range: Option<(f64, f64)>,
    },
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected lo,hi")?;
    let lo: f64 = a.trim().parse().map_err(|_| format!("bad number '{a}'"))?;
    let hi: f64 = b.trim().parse().map_err(|_| format!("bad number '{b}'"))?;
    Ok((lo, hi))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, out, threads } => cmd_run(&config, &out, threads).map(|m| {
            let failed: usize = m.failures.values().sum();
            println!("{} trials written to {} ({failed} failed)", m.n_trials, out.display());
        }),
        Command::Verify { level } => cmd_verify(level, &Probes::default()),
        Command::Report {
            trials,
            kind,
            metric,
            out,
            bins,
            range,
        } => cmd_report(&ReportArgs {
            trials,
            kind,
            metric,
            out,
            bins,
            range,
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
