use atom_mirror_cli::{exit_code, run, Cli};
use clap::Parser;

fn main() {
    let cli = Cli::parse();
    let result = run(&cli.command);
    match &result {
        Ok(outcome) => {
            for f in &outcome.files {
                println!("wrote {}", f.display());
            }
            if !outcome.passed {
                eprintln!("numerical check failed");
            }
        }
        Err(e) => eprintln!("error: {e}"),
    }
    std::process::exit(exit_code(&result));
}
