use std::process::ExitCode;

use clap::Parser;
use cognitrade_cli::{run, Cli, CliError, EXIT_RUNTIME, EXIT_VALIDATION};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_VALIDATION) } else { ExitCode::SUCCESS };
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(e.downcast_ref::<CliError>().map_or(EXIT_RUNTIME, CliError::exit_code))
        }
    }
}

fn execute(cli: &Cli) -> anyhow::Result<()> {
    let summary = run(cli)?;
    print!("{summary}");
    Ok(())
}
