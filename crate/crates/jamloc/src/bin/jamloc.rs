//! `jamloc` binary: parse arguments and dispatch to the pipeline.

use clap::Parser;
use jamloc::cli::{exit_code, run, Cli};

fn main() {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // clap renders its own usage/help text; help and version requests
            // are successes, anything else is a validation error
            let ok = e.use_stderr();
            let _ = e.print();
            std::process::exit(if ok { 1 } else { 0 });
        }
    };
    if let Err(err) = run(cli) {
        eprintln!("error: {err}");
        std::process::exit(exit_code(&err));
    }
}
