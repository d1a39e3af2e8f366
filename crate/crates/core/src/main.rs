use std::io::Write;

use clap::Parser;
use sleepmine::cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    let mut out = std::io::stdout().lock();
    let code = run(cli, &mut out, &mut std::io::stderr().lock());
    let _ = out.flush();
    std::process::exit(code);
}
