use clap::Parser;
use vefx_eval::cli::{run, Cli};

fn main() {
    // VEFX_EVAL_THREADS caps internal parallelism; outputs are identical
    // for any worker count.
    if let Ok(value) = std::env::var("VEFX_EVAL_THREADS") {
        if let Ok(threads) = value.parse::<usize>() {
            if threads > 0 {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(threads)
                    .build_global()
                    .ok();
            }
        }
    }
    let cli = Cli::parse();
    if let Err(error) = run(cli) {
        let record = serde_json::to_string(&error.error_record())
            .unwrap_or_else(|_| format!("{{\"kind\":\"internal\",\"message\":\"{error}\"}}"));
        eprintln!("{record}");
        std::process::exit(1);
    }
}
