//! The `evpred` command-line tool.

mod args;
mod commands;
mod config;
pub mod synth;

use std::ffi::OsString;
use std::io::Write;

use clap::Parser;

pub use args::{
    Cli, Command, EvaluateArgs, GradcheckArgs, OnOff, PredictArgs, SplitArgs, SplitMode, SynthArgs, TrainArgs,
};
pub use commands::{
    load_model, metrics, predict_lines, resolve_run_config, train_with_config, EvalInputs, TrainSummary,
    CHECKPOINT_FILE, CONFIG_FILE, HISTORY_FILE, HISTORY_HEADER, SYNTH_CORPUS_FILE, SYNTH_INVENTORY_FILE,
    SYNTH_SUCCESSORS_FILE, VOCAB_FILE,
};
pub use config::{RunConfig, DEFAULT_VOCAB_SIZE};
pub use synth::{SyntheticCorpus, SyntheticSpec};

use crate::error::Result;

pub fn execute(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    match &cli.command {
        Command::Split(a) => commands::split(a, out),
        Command::Train(a) => commands::train(a, out),
        Command::Predict(a) => commands::predict(a, out),
        Command::Evaluate(a) => commands::evaluate(a, out),
        Command::Gradcheck(a) => commands::gradcheck(a, out),
        Command::Synth(a) => commands::synth(a, out),
    }
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let result = execute(&cli, &mut out);
    let _ = out.flush();
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
