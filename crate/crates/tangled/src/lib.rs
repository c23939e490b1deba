//! File formats, configuration and the command-line front end for
//! `tangled-core`.
//!
//! Exit codes: 0 success, 1 configuration error, 2 input data error,
//! 3 internal failure. Errors are reported as one JSON line on standard
//! error, e.g. `{"error":"data","code":2,"message":"..."}`.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;

pub use error::{CliError, CliResult, ErrorKind};

/// Parses `args`, runs the subcommand and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let result = config::parse_args(args).and_then(|parsed| match parsed {
        None => Ok(()),
        Some((mode, flags)) => {
            let cfg = config::RunConfig::resolve(mode, flags)?;
            commands::run(&cfg)
        }
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e.to_line());
            e.exit_code()
        }
    }
}
