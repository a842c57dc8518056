mod args;
mod commands;

use std::io::Write;
use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use commands::Context;

fn run(argv: impl IntoIterator<Item = std::ffi::OsString>) -> u8 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let ctx = Context::new(cli.seed, cli.no_timestamp);
    let result = match &cli.command {
        Command::Synth(a) => commands::synth(&ctx, a),
        Command::Prepare(a) => commands::prepare(&ctx, a),
        Command::Train(a) => commands::train(&ctx, a),
        Command::PowellTrain(a) => commands::powell_train_cmd(&ctx, a),
        Command::Search(a) => commands::search_cmd(&ctx, a),
        Command::Eval(a) => commands::eval(&ctx, a),
    };
    match result {
        Ok(out) => {
            let mut stdout = std::io::stdout().lock();
            let _ = stdout.write_all(out.as_bytes());
            let _ = stdout.flush();
            0
        }
        Err(f) => {
            eprintln!("error: {}", f.message());
            f.exit_code()
        }
    }
}

fn main() -> ExitCode {
    ExitCode::from(run(std::env::args_os()))
}
