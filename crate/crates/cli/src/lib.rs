//! Command-line front end for twistlab: parameter sweeps emitted as CSV or JSON tables.
//!
//! Every subcommand reads its parameters from flags, an optional flat config file
//! (`key = value` lines or a JSON object), or documented defaults, in that order of
//! precedence. Unknown keys are errors. Output tables carry the resolved inputs as
//! metadata, so any file can be regenerated from its own header.

pub mod commands;
pub mod config;
pub mod error;
pub mod table;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{value_parser, Arg, ArgAction, ArgMatches};

pub use commands::{run, stamp, VERSION};
pub use config::{parse_config, resolve, Command, Format, SweepSpec};
pub use error::CliError;
pub use table::{emit, Cell, ResultTable};

pub const THREADS_ENV: &str = "TWISTLAB_THREADS";

pub fn cli() -> clap::Command {
    let mut app = clap::Command::new("twistlab")
        .version(VERSION)
        .about("Twisting-echo phase estimation on a collective spin")
        .subcommand_required(true)
        .arg_required_else_help(true)
        .arg(
            Arg::new("config")
                .long("config")
                .global(true)
                .value_name("FILE")
                .value_parser(value_parser!(PathBuf))
                .help("Flat config file: key = value lines or a JSON object"),
        )
        .arg(
            Arg::new("out")
                .long("out")
                .short('o')
                .global(true)
                .value_name("PATH")
                .help("Output file [default: stdout]"),
        )
        .arg(
            Arg::new("format")
                .long("format")
                .global(true)
                .value_name("FORMAT")
                .help("csv or json [default: csv]"),
        )
        .arg(
            Arg::new("no-timestamp")
                .long("no-timestamp")
                .global(true)
                .action(ArgAction::SetTrue)
                .help("Omit the timestamp so repeated runs give identical bytes"),
        )
        .arg(
            Arg::new("threads")
                .long("threads")
                .global(true)
                .value_name("N")
                .help(format!("Worker threads [default: ${THREADS_ENV} or all cores]")),
        );
    for command in Command::ALL {
        let mut sub = clap::Command::new(command.name()).about(command.about());
        for def in command.schema() {
            sub = sub.arg(
                Arg::new(def.key)
                    .long(def.key)
                    .value_name("VALUE")
                    .allow_negative_numbers(true)
                    .help(format!("{} [default: {}]", def.help, def.default)),
            );
        }
        app = app.subcommand(sub);
    }
    app
}

fn thread_count(m: &ArgMatches) -> Result<Option<usize>, CliError> {
    let (raw, key) = match m.get_one::<String>("threads") {
        Some(v) => (v.clone(), "threads"),
        None => match std::env::var(THREADS_ENV) {
            Ok(v) => (v, THREADS_ENV),
            Err(_) => return Ok(None),
        },
    };
    match raw.trim().parse::<usize>() {
        Ok(n) if n > 0 => Ok(Some(n)),
        _ => Err(CliError::config(key, format!("'{key}' must be a positive integer, got '{raw}'"))),
    }
}

fn spec_from_matches(m: &ArgMatches) -> Result<SweepSpec, CliError> {
    let (name, sub) = m.subcommand().expect("subcommand is required");
    let command: Command = name.parse()?;
    let mut flags = Vec::new();
    for def in command.schema() {
        if let Some(v) = sub.get_one::<String>(def.key) {
            flags.push((def.key.to_string(), v.clone()));
        }
    }
    for key in ["out", "format"] {
        if let Some(v) = sub.get_one::<String>(key) {
            flags.push((key.to_string(), v.clone()));
        }
    }
    parse_config(command, sub.get_one::<PathBuf>("config").map(PathBuf::as_path), &flags)
}

fn execute_matches(m: &ArgMatches) -> Result<(), CliError> {
    let sub = m.subcommand().expect("subcommand is required").1;
    let spec = spec_from_matches(m)?;
    if let Some(n) = thread_count(sub)? {
        // Fails only if a pool already exists in this process; the first setting stands.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let mut table = run(&spec)?;
    if !sub.get_flag("no-timestamp") {
        let now = chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true);
        stamp(&mut table, &now);
    }
    emit(&table, spec.format, spec.output_path.as_deref())?;
    if let Some(verdict) = table.meta_value("verdict") {
        eprintln!("{}: {verdict} (max error {})", spec.command, table.meta_value("max_error").unwrap_or("?"));
        if verdict != "PASS" {
            return Err(CliError::numeric(spec.command, "pipeline disagrees with the dense oracle"));
        }
    }
    Ok(())
}

/// Runs the command line and returns the process exit code.
pub fn execute<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match cli().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute_matches(&matches) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("twistlab: {e}");
            e.exit_code()
        }
    }
}
