mod args;
mod error;
mod experiments;
mod output;

use clap::error::ErrorKind;
use clap::Parser;

use crate::args::Cli;
use crate::error::CliError;

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            e.exit()
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments");
            fail(CliError::usage(first.trim_start_matches("error: ")))
        }
    };
    match experiments::run(cli) {
        Ok(files) => {
            for f in files {
                println!("{f}");
            }
        }
        Err(e) => fail(e),
    }
}

fn fail(e: CliError) -> ! {
    eprintln!("{}", e.line());
    std::process::exit(e.exit_code())
}
