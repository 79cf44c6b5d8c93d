mod args;
mod commands;
mod config;
mod failure;
mod output;

use clap::Parser;

use args::{Cli, Command};
use config::Settings;
use failure::CliError;

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Fit(a) => {
            let settings = Settings::merge(a.config.as_deref(), &a.pairs())?;
            commands::cmd_fit(&config::fit_config(&settings)?)
        }
        Command::Bootstrap(a) => {
            let settings = Settings::merge(a.fit.config.as_deref(), &a.pairs())?;
            commands::cmd_bootstrap(&config::bootstrap_config(&settings)?)
        }
        Command::Simulate(a) => {
            let settings = Settings::merge(a.config.as_deref(), &a.pairs())?;
            commands::cmd_simulate(&config::simulate_config(&settings)?)
        }
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            print!("{e}");
            return;
        }
        Err(e) => {
            let err = CliError::usage(e.to_string().trim_end());
            eprintln!("{}", err.to_json());
            std::process::exit(err.exit_code);
        }
    };
    if let Err(err) = run(cli) {
        eprintln!("{}", err.to_json());
        std::process::exit(err.exit_code);
    }
}
