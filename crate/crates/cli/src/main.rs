use clap::Parser;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = glassbox_cli::commands::Cli::parse();
    std::process::exit(glassbox_cli::commands::run(cli));
}
