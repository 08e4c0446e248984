use clap::Parser;
use wfr_cli::commands::{run, Cli};

fn main() {
    match run(Cli::parse()) {
        Ok(v) => println!("{}", serde_json::to_string_pretty(&v).expect("json output")),
        Err(e) => {
            eprintln!("wfr: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
