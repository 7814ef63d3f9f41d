#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod args;
mod commands;
mod output;
mod verify;

use std::path::Path;
use std::process::ExitCode;

use serde_json::json;

pub const THREADS_VAR: &str = "BUBBLES_THREADS";

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(bubbles::Error),
    Io(String),
    /// A verification suite reported failures; the lines are already printed.
    Failed(usize),
    Internal(String),
}

impl CliError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }

    pub fn csv(path: &Path, e: csv::Error) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(e) if e.kind() == "internal" => 3,
            CliError::Core(_) | CliError::Io(_) => 2,
            CliError::Failed(_) | CliError::Internal(_) => 3,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Core(e) => e.kind(),
            CliError::Io(_) => "io",
            CliError::Failed(_) => "verification",
            CliError::Internal(_) => "internal",
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Core(e) => e.to_string(),
            CliError::Failed(n) => format!("{n} check(s) failed"),
            CliError::Usage(m) | CliError::Io(m) | CliError::Internal(m) => m.clone(),
        }
    }
}

impl From<bubbles::Error> for CliError {
    fn from(e: bubbles::Error) -> Self {
        CliError::Core(e)
    }
}

fn init_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(THREADS_VAR) else { return Ok(()) };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("{THREADS_VAR}={raw:?} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Internal(e.to_string()))
}

fn main() -> ExitCode {
    let cli = match args::parse_args(std::env::args_os()) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match init_threads().and_then(|_| commands::run(&cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let body = json!({ "error": { "kind": e.kind(), "message": e.message() } });
            eprintln!("{body}");
            ExitCode::from(e.exit_code())
        }
    }
}
