//! `layerflow`: evaluate, sweep, fit, validate and bound designed flows.
//!
//! Exit codes: 0 success, 2 configuration error, 3 solver failure,
//! 4 invariant failure.

mod commands;
mod config;

use clap::Parser;
use config::{Cli, Command, RunConfig};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            e.print().ok();
            std::process::exit(code);
        }
    };
    let (command, flags) = cli.command.split();
    let result = RunConfig::resolve(command, flags).and_then(|cfg| match cfg.command {
        Command::Evaluate => commands::evaluate(&cfg),
        Command::Sweep => commands::sweep(&cfg),
        Command::Fit => commands::fit(&cfg),
        Command::Validate => commands::validate(&cfg),
        Command::Bound => commands::bound(&cfg),
    });
    if let Err(e) = result {
        eprintln!("error: {e:#}");
        std::process::exit(commands::exit_code(&e));
    }
}
