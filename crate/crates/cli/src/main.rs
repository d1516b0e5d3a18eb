mod args;
mod run;

use clap::Parser;
use std::process::ExitCode;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = args::Cli::parse();
    let resolved = match args::resolve(cli.command.raw()) {
        Ok(resolved) => resolved,
        Err(err) => {
            eprintln!("error: {err:#}");
            return ExitCode::from(1);
        }
    };
    let outcome = match &cli.command {
        args::Command::Generate(_) => run::cmd_generate(&resolved),
        args::Command::Popularity(_) => run::cmd_popularity(&resolved),
        args::Command::Score(_) => run::cmd_score(&resolved),
        args::Command::Evaluate(_) => run::cmd_evaluate(&resolved),
        args::Command::Gridsearch(_) => run::cmd_gridsearch(&resolved),
    };
    match outcome {
        Ok(code) => ExitCode::from(code as u8),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}
