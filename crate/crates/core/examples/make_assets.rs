//! Regenerates the bundled test images under `data/`.
//!
//! `edge_sigma2.pgm`: 128×128 edge slanted 5° from vertical, blurred by a
//! Gaussian of σ = 2 px. Its MTF50 is √(ln2/2)/(2π) ≈ 0.0937 cy/px.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use beamsim::imaging::{blurred_edge_pattern, write_pgm};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    std::fs::create_dir_all(&dir)?;
    let img = blurred_edge_pattern((128, 128), 5.0, 2.0, 20, 235)?;
    let path = dir.join("edge_sigma2.pgm");
    write_pgm(&img, BufWriter::new(File::create(&path)?))?;
    println!("wrote {}", path.display());
    Ok(())
}
