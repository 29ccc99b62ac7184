//! `ttcast` binary: estimation, synthesis, feature building, tuning,
//! training, prediction, evaluation, and importance reporting behind one
//! executable.
//!
//! Failures print exactly one stderr line of the form
//! `error: category=<cat> message="..."` and exit nonzero (2 for usage,
//! 1 otherwise). Categories: usage, io, format, validation,
//! model-version, model-corrupt.

mod commands;
mod manifest;
mod opts;

use clap::error::ErrorKind;
use clap::Parser;

use opts::{Command, Opts, SynthCommand};

/// Command failure: either a library error carrying its category or a
/// flag combination clap cannot express.
#[derive(Debug)]
pub enum CliError {
    Core(ttcast_core::Error),
    Usage(String),
}

impl CliError {
    fn category(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.category(),
            CliError::Usage(_) => "usage",
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Core(e) => e.to_string(),
            CliError::Usage(m) => m.clone(),
        }
    }

    fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(_) => 1,
        }
    }
}

impl From<ttcast_core::Error> for CliError {
    fn from(e: ttcast_core::Error) -> Self {
        CliError::Core(e)
    }
}

fn main() {
    std::process::exit(run());
}

fn run() -> i32 {
    let opts = match Opts::try_parse() {
        Ok(opts) => opts,
        Err(e) => {
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return 0;
            }
            report(&CliError::Usage(clap_message(&e)));
            return 2;
        }
    };
    if let Some(workers) = opts.workers {
        if workers == 0 {
            report(&CliError::Usage("--workers must be at least 1".to_string()));
            return 2;
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(workers).build_global() {
            report(&CliError::Core(ttcast_core::Error::Validation(format!(
                "worker pool setup failed: {e}"
            ))));
            return 1;
        }
    }
    match dispatch(&opts.command) {
        Ok(()) => 0,
        Err(e) => {
            report(&e);
            e.exit_code()
        }
    }
}

fn dispatch(command: &Command) -> Result<(), CliError> {
    match command {
        Command::Estimate(args) => commands::estimate(args),
        Command::Synth(SynthCommand::Trajectories(args)) => commands::synth_trajectories(args),
        Command::Synth(SynthCommand::Matrix(args)) => commands::synth_matrix(args),
        Command::Features(args) => commands::features(args),
        Command::Screen(args) => commands::screen(args),
        Command::Tune(args) => commands::tune(args),
        Command::Train(args) => commands::train(args),
        Command::Predict(args) => commands::predict(args),
        Command::Evaluate(args) => commands::evaluate(args),
        Command::Importance(args) => commands::importance(args),
    }
}

fn report(e: &CliError) {
    eprintln!("error: category={} message={:?}", e.category(), e.message());
}

/// First line of a clap error, without its own `error: ` prefix. A line
/// ending in `:` introduces an indented list (missing arguments), which
/// gets folded in.
fn clap_message(e: &clap::Error) -> String {
    let text = e.to_string();
    let mut lines = text.lines();
    let first = lines.next().unwrap_or("bad arguments");
    let mut msg = first.strip_prefix("error: ").unwrap_or(first).to_string();
    if msg.ends_with(':') {
        let items: Vec<&str> =
            lines.map(str::trim).take_while(|l| !l.is_empty()).collect();
        if !items.is_empty() {
            msg.push(' ');
            msg.push_str(&items.join(", "));
        }
    }
    msg
}
