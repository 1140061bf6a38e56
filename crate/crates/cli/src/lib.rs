//! Command-line driver: resolves flags and config files into a
//! [`config::RunConfig`], runs it, and writes a [`record::RunRecord`].
//!
//! Exit codes: 0 success, 1 I/O failure, 2 invalid input, 3 a required
//! computation did not converge.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::ffi::OsString;
use std::io::Write;
use std::time::Instant;

use clap::Parser;
use thiserror::Error;

pub mod config;
pub mod emit;
pub mod record;
pub mod run;

use config::{Cli, RunConfig};
use record::{RunRecord, Timestamp};

pub const THREADS_ENV: &str = "NLSPEC_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),

    #[error(transparent)]
    Core(#[from] nlspec_core::Error),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("{0}")]
    Output(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use nlspec_core::Error as E;
        match self {
            CliError::Validation(_) => 2,
            CliError::Core(e) => match e {
                E::InvalidMesh(_)
                | E::MeshMismatch
                | E::InvalidParameter { .. }
                | E::InvalidArgument(_)
                | E::OperatorSyntax { .. } => 2,
                _ => 3,
            },
            CliError::Io(_) | CliError::Output(_) => 1,
        }
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| CliError::Validation(format!("invalid `{THREADS_ENV}`: '{raw}' (positive integer)")))?;
    // a second initialization in the same process is harmless
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Parses, runs and writes; returns the process exit code.
pub fn main_with_args<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let flags = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            if code == 0 {
                let _ = write!(stdout, "{text}");
            } else {
                let _ = write!(stderr, "{text}");
            }
            return code;
        }
    };
    match execute(flags, stdout) {
        Ok((code, note)) => {
            if let Some(n) = note {
                let _ = writeln!(stderr, "warning: {n}");
            }
            code
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

fn execute(flags: Cli, stdout: &mut dyn Write) -> Result<(i32, Option<String>), CliError> {
    let merged = match &flags.config {
        Some(path) => {
            let file = Cli::from_config_file(path)?;
            flags.over(file)
        }
        None => flags,
    };
    let cfg = RunConfig::resolve(merged)?;
    configure_threads()?;

    let started = chrono::Utc::now();
    let clock = Instant::now();
    let outcome = run::run(&cfg)?;
    let timestamp = Timestamp {
        started_utc: started.to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
        wall_seconds: clock.elapsed().as_secs_f64(),
    };
    let format = cfg.format;
    let out = cfg.out.clone();
    let record = RunRecord::new(cfg, timestamp, outcome.payload);
    let bytes = emit::emit(&record, format)?;
    match out {
        Some(path) => emit::write_atomic(&path, &bytes)?,
        None => stdout
            .write_all(&bytes)
            .map_err(|e| CliError::Io(format!("stdout: {e}")))?,
    }
    Ok((if outcome.converged { 0 } else { 3 }, outcome.note))
}
