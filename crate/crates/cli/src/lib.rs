//! The `dae` command-line pipeline.
//!
//! Each subcommand reads and writes the artifact formats of `dae_core`, and
//! stamps its command line and seed into every artifact. Flags may be
//! preloaded from a JSON config file; flags given on the command line win.

mod args;
mod commands;
mod config;

use std::io::Write;

use clap::Parser;

pub use args::{Cli, Command};
pub use config::flags_for as config_flags;

/// Exit statuses.
pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum Failure {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numeric(String),
}

impl Failure {
    pub fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Data(_) => EXIT_DATA,
            Failure::Numeric(_) => EXIT_NUMERIC,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            Failure::Usage(_) => "usage",
            Failure::Data(_) => "data",
            Failure::Numeric(_) => "numeric",
        }
    }
}

impl From<dae_core::Error> for Failure {
    fn from(e: dae_core::Error) -> Self {
        match e {
            dae_core::Error::NonFinite(_) => Failure::Numeric(e.to_string()),
            dae_core::Error::Param(_) => Failure::Usage(e.to_string()),
            _ => Failure::Data(e.to_string()),
        }
    }
}

/// Runs one invocation; `args` excludes the program name. Reports and help
/// go to `stdout`; failures print one `dae: error[<kind>]: <reason>` line to
/// `stderr`.
pub fn run(args: Vec<String>, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let outcome = config::expand(args).map_err(Some).and_then(|args| {
        let mut argv = vec!["dae".to_string()];
        argv.extend(args.iter().cloned());
        match Cli::try_parse_from(&argv) {
            Ok(cli) => Ok((cli, command_line(&argv))),
            Err(e) if !e.use_stderr() => {
                let _ = write!(stdout, "{e}");
                Err(None)
            }
            Err(e) => Err(Some(Failure::Usage(clap_reason(&e)))),
        }
    });
    let result = match outcome {
        Ok((cli, line)) => commands::dispatch(&cli.command, &line, stdout, stderr),
        Err(None) => return EXIT_OK,
        Err(Some(f)) => Err(f),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let reason = f.to_string().replace(['\n', '\r'], " ");
            let _ = writeln!(stderr, "dae: error[{}]: {reason}", f.kind());
            f.code()
        }
    }
}

fn clap_reason(e: &clap::Error) -> String {
    let text = e.to_string();
    let first = text.lines().next().unwrap_or("invalid arguments");
    first.strip_prefix("error: ").unwrap_or(first).to_string()
}

/// Shell-style rendering of the effective argument list.
pub fn command_line(argv: &[String]) -> String {
    argv.iter()
        .map(|a| {
            let plain = !a.is_empty()
                && a.chars()
                    .all(|c| c.is_ascii_alphanumeric() || "-_./=,:+@%".contains(c));
            if plain {
                a.clone()
            } else {
                format!("'{}'", a.replace('\'', "'\\''"))
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quoting() {
        let argv: Vec<String> = ["dae", "x", "a b", "it's", ""]
            .iter()
            .map(|s| s.to_string())
            .collect();
        assert_eq!(command_line(&argv), r#"dae x 'a b' 'it'\''s' ''"#);
    }

    #[test]
    fn usage_failures_are_one_line() {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = run(vec!["frobnicate".into()], &mut out, &mut err);
        assert_eq!(code, EXIT_USAGE);
        let err = String::from_utf8(err).unwrap();
        assert_eq!(err.lines().count(), 1, "{err}");
        assert!(err.starts_with("dae: error[usage]: "));
    }

    #[test]
    fn help_succeeds() {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        assert_eq!(run(vec!["--help".into()], &mut out, &mut err), EXIT_OK);
        assert!(String::from_utf8(out).unwrap().contains("train-captioner"));
    }
}
