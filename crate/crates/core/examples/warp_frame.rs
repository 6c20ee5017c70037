//! Pre-warps a test frame with a keystone homography, the way the projector
//! content is warped onto a tilted screen, and writes both as PGM files to
//! the system temporary directory.

use std::fs::File;
use std::io::BufWriter;

use beamsim::geometry::{estimate_homography, CorrespondenceSet};
use beamsim::imaging::{warp_image, write_pgm, GrayImage};
use nalgebra::Point2;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (w, h) = (854u32, 480u32);
    let frame = GrayImage::from_fn(w, h, |x, y| if (x / 61 + y / 60) % 2 == 0 { 230 } else { 30 });

    // The frame corners go to a keystoned quad.
    let (wf, hf) = ((w - 1) as f64, (h - 1) as f64);
    let src = [(0.0, 0.0), (wf, 0.0), (wf, hf), (0.0, hf)];
    let dst = [(60.0, 20.0), (wf - 30.0, 0.0), (wf, hf), (0.0, hf - 40.0)];
    let set = CorrespondenceSet::new(
        src.iter()
            .zip(dst.iter())
            .map(|(a, b)| (Point2::new(a.0, a.1), Point2::new(b.0, b.1)))
            .collect(),
    );
    let hom = estimate_homography(&set)?;
    let warped = warp_image(&frame, &hom, (w, h))?;
    println!("H =\n{:.6}", hom.matrix());
    println!("corner reprojection error {:.2e} px", set.max_reprojection_error(&hom));

    let dir = std::env::temp_dir();
    for (name, img) in [("frame.pgm", &frame), ("frame_warped.pgm", &warped)] {
        let path = dir.join(name);
        write_pgm(img, BufWriter::new(File::create(&path)?))?;
        println!("wrote {}", path.display());
    }
    Ok(())
}
