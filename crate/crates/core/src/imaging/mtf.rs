//! Slanted-edge MTF: edge location per row, least-squares edge line,
//! 4× oversampled edge-spread function, windowed line-spread spectrum.

use std::io::Write;

use rustfft::{num_complex::Complex, FftPlanner};

use super::{GrayImage, ImagingError};

/// Bins per pixel along the edge normal.
pub const OVERSAMPLE: usize = 4;

// Rows whose total derivative is below this many intensity levels carry no edge.
const MIN_ROW_CONTRAST: f64 = 8.0;
const MAX_LINE_RESIDUAL: f64 = 2.0;
const MIN_PROFILE_BINS: usize = 32;
const MIN_FFT_LEN: usize = 1024;

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeProfile {
    /// Bin centers along the edge normal, in pixels.
    pub positions: Vec<f64>,
    pub esf: Vec<f64>,
    pub oversample: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MtfCurve {
    /// Cycles per pixel, up to the oversampled Nyquist limit.
    pub frequencies: Vec<f64>,
    pub response: Vec<f64>,
}

impl MtfCurve {
    /// The part of the curve at or below the sensor Nyquist frequency (0.5 cy/px).
    pub fn reported(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.frequencies
            .iter()
            .copied()
            .zip(self.response.iter().copied())
            .take_while(|&(f, _)| f <= 0.5 + 1e-12)
    }

    /// Linear interpolation of the response at `f` cycles per pixel.
    pub fn at(&self, f: f64) -> f64 {
        let i = self.frequencies.partition_point(|&x| x <= f);
        if i == 0 {
            return self.response[0];
        }
        if i >= self.frequencies.len() {
            return *self.response.last().unwrap();
        }
        let (f0, f1) = (self.frequencies[i - 1], self.frequencies[i]);
        let (r0, r1) = (self.response[i - 1], self.response[i]);
        r0 + (f - f0) / (f1 - f0) * (r1 - r0)
    }
}

/// Builds the oversampled edge-spread function of a near-vertical edge.
pub fn esf_from_roi(roi: &GrayImage) -> Result<EdgeProfile, ImagingError> {
    let (w, h) = (roi.width() as usize, roi.height() as usize);
    if w < 4 || h < 2 {
        return Err(ImagingError::NoEdgeFound("region too small"));
    }

    let total: f64 = (0..h)
        .map(|y| roi.get(w as u32 - 1, y as u32) as f64 - roi.get(0, y as u32) as f64)
        .sum();
    let polarity = if total < 0.0 { -1.0 } else { 1.0 };

    // Derivative centroid per row; the difference between pixels i and i+1
    // sits at x = i + 1 with pixel centers at i + 0.5.
    let mut rows = Vec::with_capacity(h);
    for y in 0..h {
        let (mut sum, mut moment) = (0.0, 0.0);
        for x in 0..w - 1 {
            let d = polarity * (roi.get(x as u32 + 1, y as u32) as f64 - roi.get(x as u32, y as u32) as f64);
            sum += d;
            moment += d * (x + 1) as f64;
        }
        if sum >= MIN_ROW_CONTRAST {
            rows.push((y as f64 + 0.5, moment / sum));
        }
    }
    if rows.len() < 2 {
        return Err(ImagingError::NoEdgeFound("derivative energy below threshold"));
    }

    let (intercept, slope) = fit_line(&rows);
    let worst = rows
        .iter()
        .map(|&(y, x)| (x - (intercept + slope * y)).abs())
        .fold(0.0, f64::max);
    if worst > MAX_LINE_RESIDUAL {
        return Err(ImagingError::NoEdgeFound("edge is not straight"));
    }

    let cos = slope.atan().cos();
    let normal = |x: f64, y: f64| polarity * (x - (intercept + slope * y)) * cos;

    // Keep only the span of normal distances that every row reaches.
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for y in 0..h {
        let yc = y as f64 + 0.5;
        let a = normal(0.5, yc);
        let b = normal(w as f64 - 0.5, yc);
        lo = lo.max(a.min(b));
        hi = hi.min(a.max(b));
    }
    let step = 1.0 / OVERSAMPLE as f64;
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    if last - first < MIN_PROFILE_BINS as i64 {
        return Err(ImagingError::NoEdgeFound("edge too close to the region border"));
    }
    let nbins = (last - first) as usize;
    let mut sums = vec![0.0; nbins];
    let mut counts = vec![0u32; nbins];
    for y in 0..h {
        for x in 0..w {
            let d = normal(x as f64 + 0.5, y as f64 + 0.5);
            let k = (d / step).floor() as i64 - first;
            if (0..nbins as i64).contains(&k) {
                sums[k as usize] += roi.get(x as u32, y as u32) as f64;
                counts[k as usize] += 1;
            }
        }
    }
    let mut esf: Vec<Option<f64>> = sums
        .iter()
        .zip(&counts)
        .map(|(&s, &c)| (c > 0).then(|| s / c as f64))
        .collect();
    fill_gaps(&mut esf);
    let positions = (0..nbins)
        .map(|k| (first + k as i64) as f64 * step + 0.5 * step)
        .collect();
    Ok(EdgeProfile {
        positions,
        esf: esf.into_iter().map(|v| v.unwrap_or(0.0)).collect(),
        oversample: OVERSAMPLE,
    })
}

fn fit_line(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    let my = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mx = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxy, mut syy) = (0.0, 0.0);
    for &(y, x) in pts {
        sxy += (y - my) * (x - mx);
        syy += (y - my) * (y - my);
    }
    let slope = if syy > 0.0 { sxy / syy } else { 0.0 };
    (mx - slope * my, slope)
}

fn fill_gaps(v: &mut [Option<f64>]) {
    let known: Vec<usize> = (0..v.len()).filter(|&i| v[i].is_some()).collect();
    if known.is_empty() {
        return;
    }
    for i in 0..v.len() {
        if v[i].is_some() {
            continue;
        }
        let next = known.partition_point(|&k| k < i);
        let val = match (next.checked_sub(1).map(|p| known[p]), known.get(next).copied()) {
            (Some(a), Some(b)) => {
                let (va, vb) = (v[a].unwrap(), v[b].unwrap());
                va + (vb - va) * (i - a) as f64 / (b - a) as f64
            }
            (Some(a), None) => v[a].unwrap(),
            (None, Some(b)) => v[b].unwrap(),
            (None, None) => unreachable!(),
        };
        v[i] = Some(val);
    }
}

/// LSF = first difference of the ESF, Hann-windowed about its peak, then the
/// DC-normalized magnitude spectrum.
pub fn mtf_from_esf(p: &EdgeProfile) -> Result<MtfCurve, ImagingError> {
    if p.esf.len() < MIN_PROFILE_BINS {
        return Err(ImagingError::ProfileTooShort(p.esf.len()));
    }
    let lsf: Vec<f64> = p.esf.windows(2).map(|w| w[1] - w[0]).collect();
    let n = lsf.len();
    let peak = lsf
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let half = (n - 1) as f64 / 2.0;
    let windowed: Vec<f64> = lsf
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let u = (i as f64 - peak as f64) / half;
            if u.abs() >= 1.0 {
                0.0
            } else {
                v * 0.5 * (1.0 + (std::f64::consts::PI * u).cos())
            }
        })
        .collect();

    let len = (n.next_power_of_two() * 4).max(MIN_FFT_LEN);
    let mut buf: Vec<Complex<f64>> = windowed.iter().map(|&v| Complex::new(v, 0.0)).collect();
    buf.resize(len, Complex::new(0.0, 0.0));
    FftPlanner::new().plan_fft_forward(len).process(&mut buf);

    let dc = buf[0].norm();
    if !(dc > 0.0) {
        return Err(ImagingError::NoEdgeFound("flat edge profile"));
    }
    let spacing = 1.0 / p.oversample as f64;
    let nyquist = len / 2;
    let frequencies = (0..=nyquist).map(|k| k as f64 / (len as f64 * spacing)).collect();
    let response = buf[..=nyquist].iter().map(|c| c.norm() / dc).collect();
    Ok(MtfCurve { frequencies, response })
}

/// Frequency of the first fall through half contrast, converted from cycles
/// per pixel to cycles per degree with `pitch` degrees per pixel. Returns
/// `(cy/px, cy/deg)`.
pub fn mtf50(curve: &MtfCurve, pitch: f64) -> Result<(f64, f64), ImagingError> {
    if !(pitch > 0.0) {
        return Err(ImagingError::InvalidImage("pixel pitch must be positive".into()));
    }
    let r = &curve.response;
    for k in 0..r.len().saturating_sub(1) {
        if r[k] >= 0.5 && r[k + 1] < 0.5 {
            let (f0, f1) = (curve.frequencies[k], curve.frequencies[k + 1]);
            let f = f0 + (r[k] - 0.5) / (r[k] - r[k + 1]) * (f1 - f0);
            return Ok((f, f / pitch));
        }
    }
    Err(ImagingError::NoHalfContrastCrossing)
}

/// `freq_cypx,response` rows up to 0.5 cy/px.
pub fn write_mtf_csv<W: Write>(curve: &MtfCurve, mut out: W) -> std::io::Result<()> {
    writeln!(out, "freq_cypx,response")?;
    for (f, r) in curve.reported() {
        writeln!(out, "{f},{r}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::{blurred_edge_pattern, gaussian_blur, slanted_edge_pattern};

    #[test]
    fn uniform_roi_has_no_edge() {
        let img = GrayImage::from_fn(64, 64, |_, _| 128);
        assert!(matches!(esf_from_roi(&img), Err(ImagingError::NoEdgeFound(_))));
    }

    #[test]
    fn step_edge_transitions_within_two_bins() {
        let img = slanted_edge_pattern((96, 96), 5.0, 0, 255).unwrap();
        let p = esf_from_roi(&img).unwrap();
        assert!(p.positions.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(p.positions.len(), p.esf.len());
        // Bins clearly inside either side are saturated; only bins within
        // half a pixel of the edge (the pixel aperture) are in between.
        let rising: Vec<_> = p
            .positions
            .iter()
            .zip(&p.esf)
            .filter(|(_, &v)| v > 0.05 * 255.0 && v < 0.95 * 255.0)
            .map(|(&x, _)| x)
            .collect();
        assert!(
            rising.iter().all(|x| x.abs() <= 0.5 + 2.0 / OVERSAMPLE as f64),
            "{rising:?}"
        );
    }

    #[test]
    fn blurred_esf_matches_erf() {
        let sigma = 2.0;
        let img = blurred_edge_pattern((96, 96), 5.0, sigma, 20, 220).unwrap();
        let p = esf_from_roi(&img).unwrap();
        let mut sq = 0.0;
        for (&x, &v) in p.positions.iter().zip(&p.esf) {
            let e = 20.0 + 200.0 * 0.5 * libm::erfc(-x / (sigma * std::f64::consts::SQRT_2));
            sq += (v - e).powi(2);
        }
        let rms = (sq / p.esf.len() as f64).sqrt();
        assert!(rms <= 2.0, "rms {rms}");
    }

    #[test]
    fn ideal_edge_is_sharp() {
        let img = slanted_edge_pattern((96, 96), 5.0, 0, 255).unwrap();
        let c = mtf_from_esf(&esf_from_roi(&img).unwrap()).unwrap();
        assert!((c.response[0] - 1.0).abs() < 1e-6);
        assert!(c.at(0.25) >= 0.8, "{}", c.at(0.25));
    }

    #[test]
    fn contrast_scaling_leaves_mtf_unchanged() {
        let base = gaussian_blur(&slanted_edge_pattern((80, 80), 5.0, 10, 110).unwrap(), 1.5);
        let doubled = GrayImage::from_fn(80, 80, |x, y| base.get(x, y) * 2);
        let offset = GrayImage::from_fn(80, 80, |x, y| base.get(x, y) + 40);
        let a = mtf_from_esf(&esf_from_roi(&base).unwrap()).unwrap();
        let b = mtf_from_esf(&esf_from_roi(&doubled).unwrap()).unwrap();
        let c = mtf_from_esf(&esf_from_roi(&offset).unwrap()).unwrap();
        for i in 0..a.response.len() {
            assert!((a.response[i] - b.response[i]).abs() < 1e-6);
            assert!((a.response[i] - c.response[i]).abs() < 1e-6);
        }
    }

    #[test]
    fn short_profile_rejected() {
        let p = EdgeProfile {
            positions: (0..10).map(|i| i as f64).collect(),
            esf: vec![0.0; 10],
            oversample: 4,
        };
        assert!(matches!(mtf_from_esf(&p), Err(ImagingError::ProfileTooShort(10))));
    }

    #[test]
    fn mtf50_unit_conversion() {
        let curve = MtfCurve {
            frequencies: vec![0.0, 0.1, 0.2, 0.3],
            response: vec![1.0, 0.75, 0.5, 0.25],
        };
        // Crossing sits exactly on a sample only when the next one is below.
        let (f, cpd) = mtf50(&curve, 0.05).unwrap();
        assert!((f - 0.2).abs() < 1e-12);
        assert!((cpd - 4.0).abs() < 1e-9);
        let flat = MtfCurve {
            frequencies: vec![0.0, 0.5],
            response: vec![1.0, 0.9],
        };
        assert!(matches!(mtf50(&flat, 0.05), Err(ImagingError::NoHalfContrastCrossing)));
    }

    #[test]
    fn csv_stops_at_nyquist() {
        let img = slanted_edge_pattern((64, 64), 5.0, 0, 255).unwrap();
        let c = mtf_from_esf(&esf_from_roi(&img).unwrap()).unwrap();
        let mut out = Vec::new();
        write_mtf_csv(&c, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("freq_cypx,response\n"));
        let last = text.lines().last().unwrap();
        let f: f64 = last.split(',').next().unwrap().parse().unwrap();
        assert!(f <= 0.5);
    }
}
