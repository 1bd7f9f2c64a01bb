use std::io::{self, BufReader};

fn main() {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info")),
        )
        .with_writer(io::stderr)
        .init();
    let mut input = BufReader::new(io::stdin());
    let code = stepwise::cli::run(std::env::args_os(), &mut input, &mut io::stdout(), &mut io::stderr());
    std::process::exit(code);
}
