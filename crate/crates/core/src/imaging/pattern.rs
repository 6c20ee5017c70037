use super::{to_u8, GrayImage, ImagingError};

const SUPERSAMPLE: u32 = 4;

fn check_slant(angle_deg: f64) -> Result<f64, ImagingError> {
    if (2.0..=10.0).contains(&angle_deg.abs()) {
        Ok(angle_deg.to_radians())
    } else {
        Err(ImagingError::AngleOutOfRange(angle_deg))
    }
}

/// Straight edge through the image center, `angle_deg` from vertical, `low`
/// on the left and `high` on the right. Each pixel is the 4×4 area average.
pub fn slanted_edge_pattern(size: (u32, u32), angle_deg: f64, low: u8, high: u8) -> Result<GrayImage, ImagingError> {
    let slope = check_slant(angle_deg)?.tan();
    let (cx, cy) = (size.0 as f64 / 2.0, size.1 as f64 / 2.0);
    let n = (SUPERSAMPLE * SUPERSAMPLE) as f64;
    Ok(GrayImage::from_fn(size.0, size.1, |x, y| {
        let mut hits = 0u32;
        for sy in 0..SUPERSAMPLE {
            let py = y as f64 + (sy as f64 + 0.5) / SUPERSAMPLE as f64;
            let edge_x = cx + slope * (py - cy);
            for sx in 0..SUPERSAMPLE {
                let px = x as f64 + (sx as f64 + 0.5) / SUPERSAMPLE as f64;
                if px > edge_x {
                    hits += 1;
                }
            }
        }
        to_u8(low as f64 + (high as f64 - low as f64) * hits as f64 / n)
    }))
}

/// Same geometry as [`slanted_edge_pattern`], but each pixel center samples an
/// ideal edge convolved with an isotropic Gaussian of `sigma` pixels, so the
/// image carries no pixel-aperture blur.
pub fn blurred_edge_pattern(
    size: (u32, u32),
    angle_deg: f64,
    sigma: f64,
    low: u8,
    high: u8,
) -> Result<GrayImage, ImagingError> {
    let a = check_slant(angle_deg)?;
    if !(sigma > 0.0) {
        return Err(ImagingError::InvalidImage("edge blur must be positive".into()));
    }
    let (cx, cy) = (size.0 as f64 / 2.0, size.1 as f64 / 2.0);
    let (slope, cos) = (a.tan(), a.cos());
    Ok(GrayImage::from_fn(size.0, size.1, |x, y| {
        let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
        let d = (px - cx - slope * (py - cy)) * cos;
        let cdf = 0.5 * libm::erfc(-d / (sigma * std::f64::consts::SQRT_2));
        to_u8(low as f64 + (high as f64 - low as f64) * cdf)
    }))
}

/// Normalized 1-D Gaussian taps over `-r..=r`, `r = ceil(4σ)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let r = (4.0 * sigma).ceil() as i64;
    let mut k: Vec<f64> = (-r..=r)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// Separable Gaussian blur with edge replication; `sigma == 0` is a copy.
pub fn gaussian_blur(src: &GrayImage, sigma: f64) -> GrayImage {
    if !(sigma > 0.0) {
        return src.clone();
    }
    let k = gaussian_kernel(sigma);
    let r = (k.len() / 2) as i64;
    let (w, h) = (src.width() as i64, src.height() as i64);
    let at = |x: i64, y: i64| src.get(x.clamp(0, w - 1) as u32, y.clamp(0, h - 1) as u32) as f64;

    let mut rows = vec![0.0; (w * h) as usize];
    for y in 0..h {
        for x in 0..w {
            rows[(y * w + x) as usize] = k.iter().enumerate().map(|(i, kv)| kv * at(x + i as i64 - r, y)).sum();
        }
    }
    let row_at = |x: i64, y: i64| rows[(y.clamp(0, h - 1) * w + x) as usize];
    GrayImage::from_fn(w as u32, h as u32, |x, y| {
        let (x, y) = (x as i64, y as i64);
        to_u8(
            k.iter()
                .enumerate()
                .map(|(i, kv)| kv * row_at(x, y + i as i64 - r))
                .sum(),
        )
    })
}
