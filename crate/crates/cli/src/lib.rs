//! Command-line frontend: parse a system, run an analysis, write canonical
//! JSON and CSV reports.
//!
//! Exit codes: 0 when the analysis ran (negative verdicts included), 1 for
//! usage and input errors, 2 when the analysis itself failed or its output
//! could not be written.

mod args;
pub mod bundle;
pub mod canonical;
mod commands;
mod reproduce;

use std::ffi::OsString;
use std::io::Write;

use clap::Parser;
use thiserror::Error;

pub use args::{Cli, Command, Format};
pub use bundle::{report_bundle, Artifact, Index};
pub use canonical::to_json;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_ANALYSIS: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Analysis(String),
    #[error("cannot write reports: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Analysis(_) | CliError::Io(_) => EXIT_ANALYSIS,
        }
    }
}

/// What a subcommand produced: the text for standard output and the files for the bundle.
pub struct Output {
    pub json: String,
    pub csv: Option<String>,
    pub artifacts: Vec<Artifact>,
}

/// Runs the command line with the process's standard streams.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(argv, &mut stdout.lock(), &mut stderr.lock())
}

pub fn run_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => EXIT_USAGE,
                _ => EXIT_USAGE,
            };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK {
                write!(out, "{text}")
            } else {
                write!(err, "{text}")
            };
            return code;
        }
    };

    let result = match cli.global.jobs {
        Some(0) => Err(CliError::Usage("--jobs must be at least 1".into())),
        Some(j) => match rayon::ThreadPoolBuilder::new().num_threads(j).build() {
            Ok(pool) => pool.install(|| execute(&cli)),
            Err(e) => Err(CliError::Analysis(format!("cannot start worker pool: {e}"))),
        },
        None => execute(&cli),
    };

    match result {
        Ok(output) => {
            let text = match cli.global.format {
                Format::Json => output.json,
                Format::Csv => match output.csv {
                    Some(csv) => csv,
                    None => {
                        let _ = writeln!(err, "error: this subcommand has no CSV output");
                        return EXIT_USAGE;
                    }
                },
            };
            if write!(out, "{text}").is_err() {
                return EXIT_ANALYSIS;
            }
            EXIT_OK
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: &Cli) -> Result<Output, CliError> {
    let g = &cli.global;
    let output = match &cli.command {
        Command::Rank(c) => commands::rank(c, g)?,
        Command::Distinguish(c) => commands::distinguish(c, g)?,
        Command::Window(c) => commands::window(c, g)?,
        Command::Alpha0(c) => commands::alpha0(c, g)?,
        Command::Kfun(c) => commands::kfun(c, g)?,
        Command::Validate(c) => commands::validate(c)?,
        Command::Reproduce(c) => {
            let dir = g
                .out
                .clone()
                .unwrap_or_else(|| std::path::PathBuf::from("obswin-out").join(&c.name));
            let output = reproduce::reproduce(&c.name, g)?;
            report_bundle(&dir, &output.artifacts)?;
            return Ok(output);
        }
    };
    if let Some(dir) = &g.out {
        report_bundle(dir, &output.artifacts)?;
    }
    Ok(output)
}
