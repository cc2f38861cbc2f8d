use clap::Parser;
use crafem::cli::{run, workers_from_env, Cli, ERROR_EXIT};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let code = match workers_from_env().and_then(|w| {
        if let Some(n) = w {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| crafem::Error::InvalidParameter(e.to_string()))?;
        }
        run(&cli)
    }) {
        Ok(outcome) => outcome.exit_code(),
        Err(e) => {
            eprintln!("error: {e}");
            ERROR_EXIT
        }
    };
    std::process::exit(code);
}
