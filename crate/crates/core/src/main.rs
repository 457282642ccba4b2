// SPDX-License-Identifier: Apache-2.0

mod cli;

use clap::Parser;

fn main() {
    let args = cli::Cli::parse();
    let level = match args.global.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    std::process::exit(cli::run(args));
}
