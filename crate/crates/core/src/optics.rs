//! Analytic projection-optics models: the 4F relay, the Rayleigh spot size,
//! the focus-tunable lens and the headset eyepiece field of view.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OpticsError {
    #[error("{0} must be positive")]
    NonPositiveInput(&'static str),
    #[error("distance must be positive (got {0} m)")]
    NonPositiveDistance(f64),
    #[error("wavelength {0:e} m is outside the visible band")]
    WavelengthOutOfBand(f64),
    #[error("invalid optics configuration: {0}")]
    InvalidConfig(&'static str),
}

fn positive(v: f64, name: &'static str) -> Result<f64, OpticsError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(OpticsError::NonPositiveInput(name))
    }
}

/// Visible-band wavelength in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wavelength(f64);

impl Wavelength {
    pub const MIN: f64 = 380e-9;
    pub const MAX: f64 = 780e-9;

    pub fn new(lambda: f64) -> Result<Self, OpticsError> {
        if (Self::MIN..=Self::MAX).contains(&lambda) {
            Ok(Self(lambda))
        } else {
            Err(OpticsError::WavelengthOutOfBand(lambda))
        }
    }

    pub fn meters(self) -> f64 {
        self.0
    }
}

impl Default for Wavelength {
    fn default() -> Self {
        Self(550e-9)
    }
}

/// Two-lens relay: lenses separated by `f1 + f2`, image scaled by `f2 / f1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourFSystem {
    pub f1: f64,
    pub f2: f64,
    /// Effective aperture of the second lens.
    pub aperture_d: f64,
}

impl FourFSystem {
    pub fn new(f1: f64, f2: f64, aperture_d: f64) -> Result<Self, OpticsError> {
        positive(f1, "f1")?;
        positive(f2, "f2")?;
        positive(aperture_d, "aperture")?;
        Ok(Self { f1, f2, aperture_d })
    }

    pub fn separation(&self) -> f64 {
        self.f1 + self.f2
    }

    pub fn magnification(&self) -> Magnification {
        Magnification {
            ratio: self.f2 / self.f1,
            inverted: true,
        }
    }

    pub fn spot_size(&self, d_image: f64, lambda: Wavelength) -> Result<f64, OpticsError> {
        rayleigh_spot(d_image, lambda, self.aperture_d)
    }
}

impl Default for FourFSystem {
    /// 45 mm and 75 mm achromats with a one-inch clear aperture.
    fn default() -> Self {
        Self {
            f1: 0.045,
            f2: 0.075,
            aperture_d: 0.0254,
        }
    }
}

/// Unsigned lateral magnification; a 4F relay always inverts the image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Magnification {
    pub ratio: f64,
    pub inverted: bool,
}

/// Diffraction-limited spot size `1.22 d λ / D`.
pub fn rayleigh_spot(d_image: f64, lambda: Wavelength, aperture_d: f64) -> Result<f64, OpticsError> {
    positive(d_image, "throw distance")?;
    positive(aperture_d, "aperture")?;
    Ok(1.22 * d_image * lambda.meters() / aperture_d)
}

pub fn lens_separation(f1: f64, f2: f64) -> Result<f64, OpticsError> {
    Ok(positive(f1, "f1")? + positive(f2, "f2")?)
}

pub fn magnification(f1: f64, f2: f64) -> Result<Magnification, OpticsError> {
    let f1 = positive(f1, "f1")?;
    let f2 = positive(f2, "f2")?;
    Ok(Magnification {
        ratio: f2 / f1,
        inverted: true,
    })
}

/// Electrically tunable lens with a bounded optical power range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TunableLens {
    pub min_power: f64,
    pub max_power: f64,
    pub response_time: f64,
}

impl TunableLens {
    pub fn new(min_power: f64, max_power: f64, response_time: f64) -> Result<Self, OpticsError> {
        if !(min_power < max_power) {
            return Err(OpticsError::InvalidConfig("lens min power must be below max power"));
        }
        if !(response_time >= 0.0) {
            return Err(OpticsError::InvalidConfig("lens response time must be non-negative"));
        }
        Ok(Self {
            min_power,
            max_power,
            response_time,
        })
    }
}

impl Default for TunableLens {
    fn default() -> Self {
        Self {
            min_power: -1.5,
            max_power: 3.5,
            response_time: 0.0025,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FocusCommand {
    /// Power sent to the lens, inside the lens range.
    pub diopters: f64,
    /// Unclamped power `1 / (throw + offset)`.
    pub requested: f64,
    pub clamped: bool,
}

/// Lens power that focuses at `throw + axial_offset`.
pub fn focus_power_for_throw(throw: f64, axial_offset: f64, lens: &TunableLens) -> Result<FocusCommand, OpticsError> {
    let focal = throw + axial_offset;
    if !(focal > 0.0 && focal.is_finite()) {
        return Err(OpticsError::NonPositiveDistance(focal));
    }
    let requested = 1.0 / focal;
    let diopters = requested.clamp(lens.min_power, lens.max_power);
    Ok(FocusCommand {
        diopters,
        requested,
        clamped: diopters != requested,
    })
}

/// Headset screen and its measured field of view against throw distance.
#[derive(Debug, Clone, PartialEq)]
pub struct EyepieceModel {
    pub screen_w: f64,
    pub screen_h: f64,
    /// `(throw m, horizontal deg, vertical deg)`, sorted by throw.
    fov_table: Vec<(f64, f64, f64)>,
}

impl EyepieceModel {
    pub fn new(screen_w: f64, screen_h: f64, fov_table: Vec<(f64, f64, f64)>) -> Result<Self, OpticsError> {
        positive(screen_w, "screen width")?;
        positive(screen_h, "screen height")?;
        if fov_table.len() < 2 {
            return Err(OpticsError::InvalidConfig("FoV table needs at least two entries"));
        }
        if fov_table.windows(2).any(|w| !(w[0].0 < w[1].0)) {
            return Err(OpticsError::InvalidConfig(
                "FoV table throws must be strictly increasing",
            ));
        }
        if fov_table
            .iter()
            .any(|&(t, h, v)| !(t > 0.0 && h > 0.0 && h < 180.0 && v > 0.0 && v < 180.0))
        {
            return Err(OpticsError::InvalidConfig("FoV entries must lie in (0, 180) degrees"));
        }
        Ok(Self {
            screen_w,
            screen_h,
            fov_table,
        })
    }

    pub fn fov_table(&self) -> &[(f64, f64, f64)] {
        &self.fov_table
    }
}

impl Default for EyepieceModel {
    fn default() -> Self {
        Self {
            screen_w: 0.030,
            screen_h: 0.020,
            fov_table: vec![(0.5, 24.0, 17.0), (2.0, 36.0, 24.0)],
        }
    }
}

/// Monocular `(horizontal, vertical)` FoV in degrees, piecewise linear in
/// throw and clamped to the table ends.
pub fn fov_at_throw(e: &EyepieceModel, throw: f64) -> (f64, f64) {
    let table = &e.fov_table;
    let first = table[0];
    let last = table[table.len() - 1];
    if throw <= first.0 {
        return (first.1, first.2);
    }
    if throw >= last.0 {
        return (last.1, last.2);
    }
    for w in table.windows(2) {
        let (a, b) = (w[0], w[1]);
        if throw <= b.0 {
            let s = (throw - a.0) / (b.0 - a.0);
            return (a.1 + s * (b.1 - a.1), a.2 + s * (b.2 - a.2));
        }
    }
    (last.1, last.2)
}

pub fn angular_pixel_pitch(fov_deg: f64, pixels_across: u32) -> Result<f64, OpticsError> {
    positive(fov_deg, "field of view")?;
    if pixels_across == 0 {
        return Err(OpticsError::NonPositiveInput("pixel count"));
    }
    Ok(fov_deg / pixels_across as f64)
}

/// Spot size expressed as the finest resolvable grating, in cycles per degree,
/// when the screen is viewed through `e` at `throw`.
pub fn spot_cycles_per_degree(spot: f64, e: &EyepieceModel, throw: f64) -> Result<f64, OpticsError> {
    positive(spot, "spot size")?;
    let (fov_h, _) = fov_at_throw(e, throw);
    let spot_deg = spot / e.screen_w * fov_h;
    Ok(1.0 / (2.0 * spot_deg))
}
