//! Structured-light calibration with reflected-Gray column and row codes.
//!
//! Patterns are shown with their inverses; a camera pixel reads each bit as
//! the ratio `on / (on + off)`. A pixel that straddles two projector columns
//! sees a fractional value on exactly one bit, because adjacent Gray codes
//! differ in one bit, and that value is the interpolation weight between the
//! two columns. Decoding therefore returns sub-pixel projector coordinates.

use nalgebra::{Matrix3, Point2, Vector3};

use super::SimError;
use crate::geometry::{estimate_homography_between, CorrespondenceSet, Frame, Homography};
use crate::imaging::GrayImage;

/// Bits within this distance of 0 or 1 count as crisp.
pub const DEFAULT_DECODE_THRESHOLD: f64 = 1e-6;
/// Pixels whose `on + off` falls below this are treated as unlit.
const MIN_TOTAL: f64 = 0.5;
/// DLT input is thinned to at most this many correspondences.
const MAX_FIT_PAIRS: usize = 20_000;

pub fn gray_encode(n: u32) -> u32 {
    n ^ (n >> 1)
}

pub fn gray_decode(mut g: u32) -> u32 {
    let mut n = g;
    while g > 1 {
        g >>= 1;
        n ^= g;
    }
    n
}

fn bits_for(n: u32) -> u32 {
    if n <= 1 {
        0
    } else {
        32 - (n - 1).leading_zeros()
    }
}

/// Column patterns (MSB first) then row patterns, each followed by its
/// inverse.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternStack {
    pub width: u32,
    pub height: u32,
    pub col_bits: u32,
    pub row_bits: u32,
    pub patterns: Vec<GrayImage>,
}

impl PatternStack {
    /// Number of (pattern, inverse) pairs.
    pub fn pair_count(&self) -> usize {
        (self.col_bits + self.row_bits) as usize
    }

    /// Value (0 or 1) of bit `b` (MSB first) of column `x`.
    fn col_bit(&self, b: u32, x: u32) -> f64 {
        ((gray_encode(x) >> (self.col_bits - 1 - b)) & 1) as f64
    }

    fn row_bit(&self, b: u32, y: u32) -> f64 {
        ((gray_encode(y) >> (self.row_bits - 1 - b)) & 1) as f64
    }
}

pub fn graycode_generate(resolution: (u32, u32)) -> Result<PatternStack, SimError> {
    let (w, h) = resolution;
    if w < 2 || h < 2 {
        return Err(SimError::ConfigInvalid(format!(
            "pattern resolution {w}x{h} is below 2x2"
        )));
    }
    let mut stack = PatternStack {
        width: w,
        height: h,
        col_bits: bits_for(w),
        row_bits: bits_for(h),
        patterns: Vec::new(),
    };
    let mut patterns = Vec::with_capacity(2 * stack.pair_count());
    for b in 0..stack.col_bits {
        patterns.push(GrayImage::from_fn(w, h, |x, _| 255 * stack.col_bit(b, x) as u8));
        patterns.push(GrayImage::from_fn(w, h, |x, _| 255 - 255 * stack.col_bit(b, x) as u8));
    }
    for b in 0..stack.row_bits {
        patterns.push(GrayImage::from_fn(w, h, |_, y| 255 * stack.row_bit(b, y) as u8));
        patterns.push(GrayImage::from_fn(w, h, |_, y| 255 - 255 * stack.row_bit(b, y) as u8));
    }
    stack.patterns = patterns;
    Ok(stack)
}

/// Camera images of a pattern stack, normalized to [0, 1], in stack order.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedStack {
    pub width: u32,
    pub height: u32,
    pub images: Vec<Vec<f32>>,
}

fn snap(v: f64) -> f64 {
    let r = v.round();
    if (v - r).abs() < 1e-9 {
        r
    } else {
        v
    }
}

/// Renders what a camera of size `camera` sees when each camera pixel views
/// projector point `h0(pixel)`, with bilinear interpolation between projector
/// pixels and black outside the projector frame.
pub fn simulate_observation(stack: &PatternStack, h0: &Homography, camera: (u32, u32)) -> ObservedStack {
    let (cw, ch) = camera;
    let n = (cw * ch) as usize;
    let mut images = vec![vec![0f32; n]; stack.patterns.len()];
    let m = h0.matrix();
    let (pw, ph) = (stack.width as f64, stack.height as f64);
    for y in 0..ch {
        for x in 0..cw {
            let v = m * Vector3::new(x as f64, y as f64, 1.0);
            if v.z.abs() < 1e-12 {
                continue;
            }
            let (sx, sy) = (snap(v.x / v.z), snap(v.y / v.z));
            if !(sx >= 0.0 && sy >= 0.0 && sx <= pw - 1.0 && sy <= ph - 1.0) {
                continue;
            }
            let idx = (y * cw + x) as usize;
            let (x0, fx) = (sx.floor() as u32, sx - sx.floor());
            let (y0, fy) = (sy.floor() as u32, sy - sy.floor());
            let x1 = (x0 + 1).min(stack.width - 1);
            let y1 = (y0 + 1).min(stack.height - 1);
            let mut k = 0;
            // Column patterns are constant along y, so bilinear reduces to a
            // 1-D blend in x (and likewise for rows).
            for b in 0..stack.col_bits {
                let on = (1.0 - fx) * stack.col_bit(b, x0) + fx * stack.col_bit(b, x1);
                images[k][idx] = on as f32;
                images[k + 1][idx] = (1.0 - on) as f32;
                k += 2;
            }
            for b in 0..stack.row_bits {
                let on = (1.0 - fy) * stack.row_bit(b, y0) + fy * stack.row_bit(b, y1);
                images[k][idx] = on as f32;
                images[k + 1][idx] = (1.0 - on) as f32;
                k += 2;
            }
        }
    }
    ObservedStack {
        width: cw,
        height: ch,
        images,
    }
}

/// Decodes one axis from `bits` (on-ratios, MSB first). `None` for
/// ambiguous pixels.
fn decode_axis(ratios: &[f64], limit: u32, threshold: f64) -> Option<f64> {
    let mut code = 0u32;
    let mut soft: Option<(usize, f64)> = None;
    for (i, &v) in ratios.iter().enumerate() {
        code <<= 1;
        if v >= 1.0 - threshold {
            code |= 1;
        } else if v > threshold {
            if soft.is_some() {
                return None;
            }
            soft = Some((i, v));
        }
    }
    let n = ratios.len();
    match soft {
        None => {
            let a = gray_decode(code);
            (a < limit).then_some(a as f64)
        }
        Some((i, v)) => {
            let a = gray_decode(code);
            let b = gray_decode(code | 1 << (n - 1 - i));
            if a.abs_diff(b) != 1 || a >= limit || b >= limit {
                return None;
            }
            Some(a as f64 + v * (b as f64 - a as f64))
        }
    }
}

/// Camera-pixel → projector-pixel correspondences for every decodable pixel.
/// A pixel is kept when it is lit and at most one bit per axis is
/// fractional (beyond `threshold`), with that bit bridging adjacent codes.
pub fn graycode_decode(
    stack: &PatternStack,
    observed: &ObservedStack,
    threshold: f64,
) -> Result<CorrespondenceSet, SimError> {
    let expect = 2 * stack.pair_count();
    if observed.images.len() != expect {
        return Err(SimError::ConfigInvalid(format!(
            "observed {} images, generator produced {expect}",
            observed.images.len()
        )));
    }
    let n = (observed.width * observed.height) as usize;
    if observed.images.iter().any(|im| im.len() != n) {
        return Err(SimError::ConfigInvalid("observed image size mismatch".into()));
    }
    let nc = stack.col_bits as usize;
    let mut ratios = vec![0.0; stack.pair_count()];
    let mut set = CorrespondenceSet::default();
    'pixel: for idx in 0..n {
        for (k, r) in ratios.iter_mut().enumerate() {
            let on = observed.images[2 * k][idx] as f64;
            let off = observed.images[2 * k + 1][idx] as f64;
            let total = on + off;
            if total < MIN_TOTAL {
                continue 'pixel;
            }
            *r = on / total;
        }
        let Some(px) = decode_axis(&ratios[..nc], stack.width, threshold) else {
            continue;
        };
        let Some(py) = decode_axis(&ratios[nc..], stack.height, threshold) else {
            continue;
        };
        let (x, y) = (idx as u32 % observed.width, idx as u32 / observed.width);
        set.push(Point2::new(x as f64, y as f64), Point2::new(px, py));
    }
    if set.len() < 4 {
        return Err(SimError::InsufficientCorrespondences(set.len()));
    }
    Ok(set)
}

/// Decodes the stack and fits the camera → projector homography, thinning
/// the correspondences evenly when there are very many.
pub fn calibrate_from_patterns(
    stack: &PatternStack,
    observed: &ObservedStack,
    threshold: f64,
) -> Result<(Homography, CorrespondenceSet), SimError> {
    let all = graycode_decode(stack, observed, threshold)?;
    let stride = all.len().div_ceil(MAX_FIT_PAIRS);
    let fit = if stride > 1 {
        CorrespondenceSet::new(all.pairs.iter().step_by(stride).copied().collect())
    } else {
        all.clone()
    };
    let h = estimate_homography_between(&fit, Frame::Camera, Frame::Projector)?;
    Ok((h, all))
}

/// Near-identity camera → projector homography about the frame center:
/// scale 0.9–1.1, rotation within ±3°, shift within ±3% of the frame and a
/// small keystone, so most of the camera still sees the projector.
pub fn random_camera_mapping<R: rand::Rng + ?Sized>(rng: &mut R, size: (u32, u32)) -> Homography {
    let (w, h) = (size.0 as f64, size.1 as f64);
    let (cx, cy) = ((w - 1.0) / 2.0, (h - 1.0) / 2.0);
    let s = rng.random_range(0.9..1.1);
    let a = rng.random_range(-3f64..3.0).to_radians();
    let (tx, ty) = (rng.random_range(-0.03..0.03) * w, rng.random_range(-0.03..0.03) * h);
    let (px, py) = (rng.random_range(-0.05..0.05) / w, rng.random_range(-0.05..0.05) / h);
    let to_origin = Matrix3::new(1.0, 0.0, -cx, 0.0, 1.0, -cy, 0.0, 0.0, 1.0);
    let back = Matrix3::new(1.0, 0.0, cx + tx, 0.0, 1.0, cy + ty, 0.0, 0.0, 1.0);
    let core = Matrix3::new(
        s * a.cos(),
        -s * a.sin(),
        0.0,
        s * a.sin(),
        s * a.cos(),
        0.0,
        px,
        py,
        1.0,
    );
    Homography::new(back * core * to_origin, Frame::Camera, Frame::Projector).expect("near-identity map is invertible")
}
