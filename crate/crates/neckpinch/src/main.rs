use anyhow::Result;

fn main() -> Result<()> {
    let argv: Vec<String> = std::env::args().skip(1).collect();
    std::process::exit(neckpinch::cli::dispatch(&argv));
}
