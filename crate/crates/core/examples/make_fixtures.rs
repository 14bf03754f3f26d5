//! Regenerates the files under `crates/core/fixtures/`.
//!
//! Usage: `cargo run -p freqtag --example make_fixtures [out_dir]`

use std::path::PathBuf;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::args_os()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(freqtag::fixtures::shipped_dir);
    std::fs::create_dir_all(&dir)?;
    for (name, bytes) in freqtag::fixtures::shipped_files() {
        std::fs::write(dir.join(name), &bytes)?;
        println!("{:>10} bytes  {}", bytes.len(), dir.join(name).display());
    }
    Ok(())
}
