// Copyright 2026 qheom Contributors
// SPDX-License-Identifier: Apache-2.0

//! Command-line front end; all logic lives in [`qheom::cli`].

use clap::Parser;

fn main() {
    let cli = qheom::cli::Cli::parse();
    if let Err(e) = cli.execute() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
