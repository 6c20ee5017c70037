use nalgebra::Vector3;

use super::{to_u8, GrayImage, ImagingError};
use crate::geometry::Homography;

// Coordinates within this distance of an integer are snapped to it, so that
// integer translations survive the scale normalization of the matrix.
const SNAP: f64 = 1e-9;

fn snap(v: f64) -> f64 {
    let r = v.round();
    if (v - r).abs() < SNAP {
        r
    } else {
        v
    }
}

/// Resamples `src` through `h` (source → destination) by inverse mapping with
/// bilinear interpolation. Samples that fall outside the source are 0.
/// Pixel `(x, y)` is taken to sit at integer coordinates.
pub fn warp_image(src: &GrayImage, h: &Homography, out_size: (u32, u32)) -> Result<GrayImage, ImagingError> {
    let inv = h.inverse().map_err(|_| ImagingError::DegenerateHomography)?;
    let m = *inv.matrix();
    let (w, hgt) = (src.width() as f64, src.height() as f64);
    let out = GrayImage::from_fn(out_size.0, out_size.1, |x, y| {
        let v = m * Vector3::new(x as f64, y as f64, 1.0);
        if v.z.abs() < 1e-12 {
            return 0;
        }
        let sx = snap(v.x / v.z);
        let sy = snap(v.y / v.z);
        if !(sx >= 0.0 && sy >= 0.0 && sx <= w - 1.0 && sy <= hgt - 1.0) {
            return 0;
        }
        to_u8(bilinear(src, sx, sy))
    });
    Ok(out)
}

fn bilinear(src: &GrayImage, sx: f64, sy: f64) -> f64 {
    let x0 = sx.floor() as u32;
    let y0 = sy.floor() as u32;
    let fx = sx - x0 as f64;
    let fy = sy - y0 as f64;
    let x1 = (x0 + 1).min(src.width() - 1);
    let y1 = (y0 + 1).min(src.height() - 1);
    let p = |x, y| src.get(x, y) as f64;
    let top = p(x0, y0) * (1.0 - fx) + p(x1, y0) * fx;
    let bottom = p(x0, y1) * (1.0 - fx) + p(x1, y1) * fx;
    top * (1.0 - fy) + bottom * fy
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Frame;
    use nalgebra::Matrix3;

    fn noise_image(w: u32, h: u32) -> GrayImage {
        GrayImage::from_fn(w, h, |x, y| ((x * 7919 + y * 104_729) % 251) as u8)
    }

    #[test]
    fn identity_is_exact() {
        let img = noise_image(40, 30);
        let id = Homography::identity(Frame::Camera, Frame::Projector);
        assert_eq!(warp_image(&img, &id, (40, 30)).unwrap(), img);
    }

    #[test]
    fn integer_translation_is_exact_with_zero_fill() {
        let img = noise_image(40, 30);
        let h = Homography::new(
            Matrix3::new(1.0, 0.0, 5.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0),
            Frame::Camera,
            Frame::Projector,
        )
        .unwrap();
        let out = warp_image(&img, &h, (40, 30)).unwrap();
        for y in 0..30 {
            for x in 0..40 {
                let expect = if x >= 5 { img.get(x - 5, y) } else { 0 };
                assert_eq!(out.get(x, y), expect, "({x},{y})");
            }
        }
    }

    #[test]
    fn rank_deficient_matrix_is_not_a_homography() {
        let m = Matrix3::new(1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0);
        assert!(Homography::new(m, Frame::Camera, Frame::Projector).is_err());
    }
}
