mod args;
mod commands;
mod ingest;

use clap::Parser;

/// Exit codes: 0 ok, 2 configuration, 3 data, 4 numerical, 5 budget.
fn main() {
    let cli = args::Cli::parse();
    let code = match commands::dispatch(cli) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err:#}");
            commands::exit_code(&err)
        }
    };
    std::process::exit(code);
}
