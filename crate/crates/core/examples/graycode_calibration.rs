//! Offline projector-camera calibration: project Gray-code patterns, observe
//! them through a simulated camera, decode per-pixel projector coordinates
//! and fit the camera → projector homography.

use std::time::Instant;

use beamsim::simkit::{
    calibrate_from_patterns, graycode_generate, random_camera_mapping, simulate_observation, DEFAULT_DECODE_THRESHOLD,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let size = (854, 480);
    let stack = graycode_generate(size)?;
    println!(
        "{}×{} projector: {} column + {} row bits, {} images with inverses",
        size.0,
        size.1,
        stack.col_bits,
        stack.row_bits,
        stack.patterns.len()
    );

    let h0 = random_camera_mapping(&mut ChaCha8Rng::seed_from_u64(11), size);
    let start = Instant::now();
    let observed = simulate_observation(&stack, &h0, size);
    let (h, pairs) = calibrate_from_patterns(&stack, &observed, DEFAULT_DECODE_THRESHOLD)?;
    println!("decoded {} camera pixels in {:.2?}", pairs.len(), start.elapsed());
    println!("true H0:\n{:.6}", h0.matrix());
    println!("recovered H:\n{:.6}", h.matrix());
    println!("max entry difference {:.2e}", h.max_entry_diff(&h0));
    println!("max reprojection error {:.2e} px", pairs.max_reprojection_error(&h));
    Ok(())
}
