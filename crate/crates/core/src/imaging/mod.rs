//! 8-bit grayscale rasters: homography warping, slanted-edge pattern
//! synthesis, and slanted-edge MTF measurement.

mod mtf;
mod pattern;
mod pgm;
mod warp;

pub use mtf::{esf_from_roi, mtf50, mtf_from_esf, write_mtf_csv, EdgeProfile, MtfCurve, OVERSAMPLE};
pub use pattern::{blurred_edge_pattern, gaussian_blur, gaussian_kernel, slanted_edge_pattern};
pub use pgm::{read_pgm, write_pgm};
pub use warp::warp_image;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ImagingError {
    #[error("homography is degenerate")]
    DegenerateHomography,
    #[error("edge angle {0}° outside the usable slant range 2°..10°")]
    AngleOutOfRange(f64),
    #[error("no edge found: {0}")]
    NoEdgeFound(&'static str),
    #[error("edge profile too short ({0} bins, need at least 32)")]
    ProfileTooShort(usize),
    #[error("MTF never falls through half contrast")]
    NoHalfContrastCrossing,
    #[error("invalid image: {0}")]
    InvalidImage(String),
    #[error("region of interest {0:?} does not fit in the image")]
    RoiOutOfBounds((u32, u32, u32, u32)),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: u32,
    height: u32,
    samples: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            samples: vec![0; width as usize * height as usize],
        }
    }

    pub fn from_samples(width: u32, height: u32, samples: Vec<u8>) -> Result<Self, ImagingError> {
        if samples.len() != width as usize * height as usize {
            return Err(ImagingError::InvalidImage(format!(
                "{} samples for a {}x{} image",
                samples.len(),
                width,
                height
            )));
        }
        Ok(Self { width, height, samples })
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> u8) -> Self {
        let mut samples = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                samples.push(f(x, y));
            }
        }
        Self { width, height, samples }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn samples(&self) -> &[u8] {
        &self.samples
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.samples[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, v: u8) {
        let w = self.width as usize;
        self.samples[y as usize * w + x as usize] = v;
    }

    pub fn mean(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().map(|&v| v as f64).sum::<f64>() / self.samples.len() as f64
    }

    /// Copy of the `(x, y, w, h)` region.
    pub fn crop(&self, roi: (u32, u32, u32, u32)) -> Result<GrayImage, ImagingError> {
        let (x0, y0, w, h) = roi;
        if w == 0
            || h == 0
            || x0.checked_add(w).is_none_or(|r| r > self.width)
            || y0.checked_add(h).is_none_or(|b| b > self.height)
        {
            return Err(ImagingError::RoiOutOfBounds(roi));
        }
        Ok(GrayImage::from_fn(w, h, |x, y| self.get(x0 + x, y0 + y)))
    }

    pub fn flip_vertical(&self) -> GrayImage {
        GrayImage::from_fn(self.width, self.height, |x, y| self.get(x, self.height - 1 - y))
    }
}

pub(crate) fn to_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}
