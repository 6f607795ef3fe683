use clap::Parser;

use mimic_cli::{exit, run, Cli};

fn main() {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(()) => exit::OK,
        Err(e) => {
            eprintln!("mimic: {e}");
            e.exit_code()
        }
    };
    std::process::exit(code);
}
