use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use reliascan_core::Period;

mod commands;
mod config;
mod error;
mod report;

use commands::ReportFormat;
use config::{Overrides, ProjectConfig};
use error::CliError;

/// Early detection of emerging reliability issues in complaint text.
#[derive(Debug, Parser)]
#[command(name = "reliascan", version)]
struct Cli {
    /// Project configuration (TOML). Flags override its keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(flatten)]
    overrides: Overrides,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Discover topics and estimate baseline rates over a reference span.
    Baseline {
        #[arg(long)]
        from: Period,
        #[arg(long)]
        to: Period,
    },
    /// Scan windows after the baseline for emerging topics.
    Analyze {
        #[arg(long)]
        from: Period,
        #[arg(long)]
        to: Period,
    },
    /// Turn a discovered topic into a named custom topic.
    Promote {
        #[arg(long)]
        topic: String,
        #[arg(long)]
        name: String,
        /// First period the new topic is monitored in.
        #[arg(long)]
        period: Option<Period>,
    },
    /// Write trend tables or charts from the accumulated trend data.
    Report {
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Suggest canonical spellings for rare terms by Soundex code.
    SpellSuggest,
    /// Count documents shared between topic pairs.
    Cooccur {
        #[arg(long)]
        from: Period,
        #[arg(long)]
        to: Period,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Svg,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = ProjectConfig::load(cli.config.as_deref(), &cli.overrides)?;
    let mut out = io::stdout().lock();
    match cli.command {
        Command::Baseline { from, to } => commands::baseline(&cfg, from, to, &mut out),
        Command::Analyze { from, to } => commands::analyze(&cfg, from, to, &mut out),
        Command::Promote { topic, name, period } => commands::promote(&cfg, &topic, &name, period, &mut out),
        Command::Report { format } => {
            let f = match format {
                Format::Csv => ReportFormat::Csv,
                Format::Svg => ReportFormat::Svg,
            };
            commands::report(&cfg, f, &mut out)
        }
        Command::SpellSuggest => commands::spell_suggest(&cfg, &mut out),
        Command::Cooccur { from, to } => commands::cooccur(&cfg, from, to, &mut out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
