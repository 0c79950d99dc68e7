//! `thermoface` command-line tool.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thermoface::Error;

use commands::Outcome;

const EXIT_CODES: &str = "\
Exit codes:
  0  success
  1  validate-camera found a FAIL
  2  usage or configuration error
  3  data error (bad values, manifest rows)
  4  I/O error
  5  file format error
  6  compatibility error (gallery built with another model)
  7  numeric error (training diverged)
  8  subject not enrolled / empty gallery
  9  contract error
  10 dimension error";

/// Thermal face verification with a Siamese encoder.
///
/// Every command takes an optional `--config` file of `key = value` lines
/// followed by `--key value` overrides, and prints the effective
/// configuration before its results.
#[derive(Parser, Debug)]
#[command(name = "thermoface", version, after_help = EXIT_CODES)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Run {
    /// Key-value configuration file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// `--key value` or `--key=value` overrides.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "--KEY VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic thermogram dataset and its manifest.
    Synth(Run),
    /// Split a manifest, train the encoder and save model and history.
    Train(Run),
    /// Evaluate a model on balanced pairs from a test manifest.
    Eval(Run),
    /// Check a camera profile against the hardware requirements.
    ValidateCamera {
        /// Profile file with width, height, netd_mk, band_low_um,
        /// band_high_um and frame_rate_hz.
        profile: PathBuf,
        #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "--KEY VALUE")]
        overrides: Vec<String>,
    },
    /// Add a subject's frames to a gallery.
    Enroll(Run),
    /// Accept or reject a probe as a claimed subject.
    Verify(Run),
    /// Find the enrolled subject closest to a probe, or UNKNOWN.
    Identify(Run),
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 2,
        Error::Data(_) => 3,
        Error::Io { .. } => 4,
        Error::Format(_) => 5,
        Error::Compatibility(_) => 6,
        Error::Numeric { .. } => 7,
        Error::NotEnrolled(_) => 8,
        Error::Contract(_) => 9,
        Error::Dimension(_) => 10,
    }
}

fn run(command: Command) -> thermoface::Result<Outcome> {
    let with = |run: Run, keys: Vec<&'static str>, f: fn(&thermoface::kv::KeyValues) -> thermoface::Result<Outcome>| {
        let kv = config::merge(run.config.as_deref(), &run.overrides, &keys)?;
        f(&kv)
    };
    match command {
        Command::Synth(r) => with(r, commands::synth_keys(), commands::synth),
        Command::Train(r) => with(r, commands::train_keys(), commands::train_cmd),
        Command::Eval(r) => with(r, commands::eval_keys(), commands::eval),
        Command::ValidateCamera { profile, overrides } => commands::validate_camera_cmd(&profile, &overrides),
        Command::Enroll(r) => with(r, commands::enroll_keys(), commands::enroll),
        Command::Verify(r) => with(r, commands::verify_keys(), commands::verify),
        Command::Identify(r) => with(r, commands::identify_keys(), commands::identify),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::Rejected) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
