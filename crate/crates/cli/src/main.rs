use clap::Parser;

fn main() {
    std::process::exit(fk_eit_cli::run(fk_eit_cli::Cli::parse()));
}
