use clap::Parser;

use heston_rv::cli::{error_report, execute, exit_code, Cli};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(Some(outcome)) => {
            for f in &outcome.files {
                println!("{}", outcome.dir.join(f).display());
            }
        }
        Ok(None) => {}
        Err(e) => {
            eprintln!("{}", error_report(&e));
            std::process::exit(exit_code(&e));
        }
    }
}
