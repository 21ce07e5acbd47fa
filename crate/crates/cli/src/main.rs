use clap::Parser;
use seqadv_cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(out) => print!("{out}"),
        Err(e) => {
            eprintln!("seqadv: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
