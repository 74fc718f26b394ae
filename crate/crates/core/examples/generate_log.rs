//! Writes a synthetic tab-separated session log to stdout (or the path given
//! as the first argument).

use embsr::synthetic::{random_log, LogConfig};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let text = random_log(&LogConfig { sessions: 800, ..Default::default() });
    match std::env::args().nth(1) {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
