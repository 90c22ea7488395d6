use clap::Parser;
use polyfk_cli::commands::{dispatch, Cli};

fn main() {
    let cli = Cli::parse();
    let command_line = std::env::args().collect::<Vec<_>>().join(" ");
    if let Err(e) = polyfk_cli::init_threads().and_then(|()| dispatch(cli, &command_line)) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
