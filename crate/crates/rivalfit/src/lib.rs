//! Command-line front end and file formats for `rivalfit-core`.

pub mod cli;
pub mod commands;
pub mod format;
pub mod parallel;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::Parser;

use cli::{Cli, CliError, Command, Format, EXIT_CONFIG, EXIT_OK};
use commands::{Artifact, Output};

/// Runs the CLI on `argv` (program name first) and returns the exit code.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let argv = match cli::expand_config(argv.into_iter().map(Into::into).collect()) {
        Ok(a) => a,
        Err(e) => return report(e, stderr),
    };
    let parsed = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = stdout.write_all(text.as_bytes());
                    EXIT_OK
                }
                _ => {
                    let _ = stderr.write_all(text.as_bytes());
                    EXIT_CONFIG
                }
            };
        }
    };
    match execute(&parsed) {
        Ok(artifact) => match emit(&artifact, parsed.common.output.as_deref(), stdout, stderr) {
            Ok(()) => EXIT_OK,
            Err(e) => report(e, stderr),
        },
        Err(e) => report(e, stderr),
    }
}

fn report(e: CliError, stderr: &mut dyn Write) -> i32 {
    let _ = writeln!(stderr, "error: {e}");
    e.exit_code()
}

fn execute(cli: &Cli) -> Result<Artifact, CliError> {
    let common = &cli.common;
    let default_format = match &cli.command {
        Command::Sweep(_) | Command::Hermite(_) => Format::Csv,
        Command::Example(a) if a.table => Format::Csv,
        _ => Format::Json,
    };
    let out = Output {
        format: common.format.unwrap_or(default_format),
        digits: if common.full_precision {
            format::FULL_DIGITS
        } else {
            format::DEFAULT_DIGITS
        },
        seed: common.seed,
        workers: common.parallel as usize,
    };
    match &cli.command {
        Command::Reward(a) => commands::reward(a, out),
        Command::Mc(a) => commands::mc(a, out),
        Command::Maxmin(a) => commands::maxmin(a, out),
        Command::Sweep(a) => commands::sweep(a, out),
        Command::Example(a) => commands::example(a, out),
        Command::Hermite(a) => commands::hermite(a),
    }
}

/// `<output>.meta.json`
pub fn meta_path(output: &Path) -> PathBuf {
    let mut name = output.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

fn emit(
    artifact: &Artifact,
    output: Option<&Path>,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<(), CliError> {
    for w in &artifact.warnings {
        let _ = writeln!(stderr, "{w}");
    }
    let Some(path) = output else {
        return stdout
            .write_all(artifact.body.as_bytes())
            .map_err(|source| CliError::Io {
                path: "<stdout>".into(),
                source,
            });
    };
    let write = |p: &Path, text: &str| {
        std::fs::write(p, text).map_err(|source| CliError::Io {
            path: p.to_path_buf(),
            source,
        })
    };
    write(path, &artifact.body)?;
    if let Some(meta) = &artifact.meta {
        let mut text = serde_json::to_string_pretty(meta).expect("metadata serializes");
        text.push('\n');
        write(&meta_path(path), &text)?;
    }
    Ok(())
}
