//! Regenerate the bundled demo project: `cargo run -p reliascan --example make_demo -- demo`

use std::path::PathBuf;

#[path = "../tests/common/demo.rs"]
mod demo;

fn main() -> std::io::Result<()> {
    let dir = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| "demo".into());
    demo::write(&dir)?;
    println!("wrote demo project to {}", dir.display());
    Ok(())
}
