//! Plugin-protocol test fixture backed by the baseline models.
//!
//! Flags: `--bad-probability`, `--crash-on-predict`, `--silent`.

use std::io::{stdin, stdout};
use std::process::ExitCode;

use kgda_core::models::{serve_echo, EchoOptions};

fn main() -> ExitCode {
    let mut opts = EchoOptions::default();
    for arg in std::env::args().skip(1) {
        match arg.as_str() {
            "--bad-probability" => opts.bad_probability = true,
            "--crash-on-predict" => opts.crash_on_predict = true,
            "--silent" => opts.silent = true,
            other => {
                eprintln!("kgda-echo-plugin: unknown flag {other}");
                return ExitCode::from(1);
            }
        }
    }
    match serve_echo(stdin().lock(), stdout().lock(), opts) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("kgda-echo-plugin: {e}");
            ExitCode::from(101)
        }
    }
}
