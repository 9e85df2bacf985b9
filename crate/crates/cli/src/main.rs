use std::io;
use std::process::ExitCode;

use clap::Parser;

use reliefplan_cli::{Cli, Io, execute};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let stdout = io::stdout();
    let stderr = io::stderr();
    let stdin = io::stdin();
    let mut io = Io {
        out: &mut stdout.lock(),
        prompt: &mut stderr.lock(),
        input: &mut stdin.lock(),
    };
    match execute(&cli, &mut io) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = io.out.flush();
            eprintln!("error[{}]: {e}", e.code());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
