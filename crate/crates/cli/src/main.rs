use clap::Parser;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    std::process::exit(lapopt_cli::run(lapopt_cli::Cli::parse()));
}
