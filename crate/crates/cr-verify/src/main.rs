use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use cr_verify::{emit_report, load, run_scenarios, Format, Overrides, RunOptions};

const EXIT_CHECK_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormatArg {
    Structured,
    Csv,
}

/// Runs verification scenarios and emits per-check reports.
#[derive(Debug, Parser)]
#[command(name = "verify", version)]
struct Cli {
    /// Scenario file, or `paper-defaults` for the bundled suite.
    #[arg(long)]
    config: String,
    /// Exit nonzero when any check fails.
    #[arg(long)]
    strict: bool,
    #[arg(long, value_enum, default_value = "structured")]
    format: FormatArg,
    /// Write the report here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the jet order of every scenario.
    #[arg(long)]
    jet_order: Option<usize>,
    /// Override the run seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Run only scenarios whose name matches this glob.
    #[arg(long)]
    filter: Option<String>,
    /// Record wall time per check (makes reports run-dependent).
    #[arg(long)]
    timings: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let overrides = Overrides {
        jet_order: cli.jet_order,
        seed: cli.seed,
        filter: cli.filter.clone(),
    };
    let config = match load(&cli.config, &overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let reports = run_scenarios(
        &config,
        RunOptions {
            timings: cli.timings,
        },
    );
    let format = match cli.format {
        FormatArg::Structured => Format::Structured,
        FormatArg::Csv => Format::Csv,
    };
    let bytes = match emit_report(&reports, format) {
        Ok(b) => b,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(EXIT_NUMERICAL);
        }
    };
    let written = match &cli.out {
        Some(path) => std::fs::write(path, &bytes),
        None => std::io::stdout().write_all(&bytes),
    };
    if let Err(e) = written {
        eprintln!("cannot write report: {e}");
        return ExitCode::from(EXIT_NUMERICAL);
    }

    let checks: usize = reports.iter().map(|r| r.records.len()).sum();
    let failed: Vec<String> = reports
        .iter()
        .flat_map(|r| {
            r.records
                .iter()
                .filter(|c| !c.pass)
                .map(move |c| format!("{}:{}", r.scenario, c.check))
        })
        .collect();
    eprintln!(
        "{} scenarios, {checks} checks, {} failed",
        reports.len(),
        failed.len()
    );
    for f in &failed {
        eprintln!("  FAIL {f}");
    }
    if cli.strict {
        if reports.iter().any(|r| r.has_error()) {
            return ExitCode::from(EXIT_NUMERICAL);
        }
        if !failed.is_empty() {
            return ExitCode::from(EXIT_CHECK_FAILURE);
        }
    }
    ExitCode::SUCCESS
}
