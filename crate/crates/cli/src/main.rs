use std::process::ExitCode;

use clap::Parser;
use cogbench::{error, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Some(n) = std::env::var("COGBENCH_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("COGBENCH_THREADS ignored: {e}");
        }
    }
    let json = cli.json_errors;
    match cogbench::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if json {
                eprintln!("{}", error::to_json(&e));
            } else {
                eprintln!("{}", error::to_text(&e));
            }
            ExitCode::from(error::exit_code(&e))
        }
    }
}
