use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ricci2d::cli::{export_plots, run, verify, Scenario};
use ricci2d::oracle::{BoundId, BoundReport, Verdict};
use ricci2d::Error;

#[derive(Parser)]
#[command(name = "ricci2d", version, about = "Conformal Ricci flow on disks and the plane, with bound checks")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory for `run` and `export-plots`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and check it.
    Run { scenario: PathBuf },
    /// Recompute reports from a run directory without simulating.
    Verify {
        dir: PathBuf,
        /// Comma-separated bound ids.
        #[arg(long, value_delimiter = ',')]
        checks: Option<Vec<String>>,
    },
    /// Write CSV tables of every stored trajectory.
    ExportPlots { dir: PathBuf },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_)
        | Error::Validation(_)
        | Error::Parse { .. }
        | Error::Singular { .. }
        | Error::Domain(_)
        | Error::GridMismatch(_)
        | Error::FingerprintMismatch { .. }
        | Error::Io { .. } => 2,
        _ => 1,
    }
}

fn summarize(reports: &[BoundReport]) -> ExitCode {
    let mut failed = false;
    for r in reports {
        let slack = r.worst_slack.map_or("-".to_string(), |s| format!("{s:.3e}"));
        println!("{:<16} {:<8} slack {:>11}  tol {:.3e}  {}", r.id, r.verdict, slack, r.tol, r.subject);
        if r.verdict == Verdict::Fail {
            eprintln!("failed bound: {}", r.id);
            failed = true;
        }
    }
    if failed {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match &cli.command {
        Command::Run { scenario } => Scenario::load(scenario)
            .and_then(|s| run(&s, cli.out.as_deref()))
            .map(|o| {
                println!("run directory: {}", o.dir.display());
                println!("eps_disc = {:.3e}", o.record.eps);
                summarize(&o.reports)
            }),
        Command::Verify { dir, checks } => checks
            .as_ref()
            .map(|c| c.iter().map(|s| s.trim().parse::<BoundId>()).collect::<Result<Vec<_>, _>>())
            .transpose()
            .and_then(|ids| verify(dir, ids.as_deref()))
            .map(|r| summarize(&r)),
        Command::ExportPlots { dir } => export_plots(dir, cli.out.as_deref()).map(|files| {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
