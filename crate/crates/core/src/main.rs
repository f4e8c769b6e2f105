use std::io;
use std::process::ExitCode;

use clap::Parser;

use fxmst::cli::{cmd_analyze, cmd_synth, Cli, Command, RunConfig};

fn run() -> anyhow::Result<ExitCode> {
    let cli = Cli::parse();
    match cli.command {
        Command::Analyze(args) => {
            let config = RunConfig::from_args(&args)?;
            let outcome = cmd_analyze(&config, io::stdin().lock())?;
            let d = &outcome.report.despike;
            eprintln!(
                "despike: removed {} of {} returns ({:.4}%)",
                d.removed,
                d.points,
                100.0 * d.fraction()
            );
            for code in &d.zero_variance {
                eprintln!("despike: {code} has zero variance, left unchanged");
            }
            let done = outcome.report.analyses().count();
            eprintln!(
                "analyzed {done} base(s), wrote {} files to {}",
                outcome.written.len(),
                config.out_dir.display()
            );
            if let Err(reason) = &outcome.report.beta {
                eprintln!("beta fit: {reason}");
            }
            for f in outcome.report.failures() {
                eprintln!("base {} failed: {}", f.base, f.reason);
            }
            Ok(if outcome.success() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Command::Synth(args) => {
            cmd_synth(&args, io::stdout().lock())?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
