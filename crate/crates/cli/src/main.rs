use clap::Parser;
use lms_cli::{run, thread_limit, Cli, CliError};

fn configure_threads() -> Result<(), CliError> {
    let var = std::env::var("LMS_THREADS").ok();
    if let Some(n) = thread_limit(var.as_deref())? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::config(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|_| run(&cli.command));
    match result {
        Ok(dir) => println!("{}", dir.display()),
        Err(e) => {
            eprintln!("{}", e.line());
            std::process::exit(e.exit_code());
        }
    }
}
