//! Steering mirror model, the offset-driven sequential controller, and the
//! image-shift error analysis for angular steering errors.
//!
//! Mirror angles are mechanical; the reflected beam turns by
//! `beam_deflection_factor` times as much.

use thiserror::Error;

use crate::geometry::CameraIntrinsics;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SteeringError {
    #[error("tangent singularity: projection angle {0} rad is too close to ±90°")]
    TangentSingularity(f64),
    #[error("angle {angle} rad exceeds the mirror range ±{limit} rad")]
    OutOfRange { angle: f64, limit: f64 },
    #[error("invalid mirror model: {0}")]
    InvalidModel(&'static str),
}

// cos² below this is treated as the ±90° singularity.
const MIN_COS2: f64 = 1e-12;

fn check_angle(a: f64) -> Result<(), SteeringError> {
    let c = a.cos();
    if !a.is_finite() || a.abs() >= std::f64::consts::FRAC_PI_2 || c * c < MIN_COS2 {
        Err(SteeringError::TangentSingularity(a))
    } else {
        Ok(())
    }
}

/// Lateral image shift on a screen `z` away when the projection angle
/// `theta` is perturbed by `dtheta`.
pub fn image_shift_exact(z: f64, theta: f64, dtheta: f64) -> Result<f64, SteeringError> {
    check_angle(theta)?;
    check_angle(theta + dtheta)?;
    Ok(z * ((theta + dtheta).tan() - theta.tan()))
}

/// First-order version of [`image_shift_exact`]: `z Δθ / cos²θ`.
pub fn image_shift_approx(z: f64, theta: f64, dtheta: f64) -> Result<f64, SteeringError> {
    check_angle(theta)?;
    check_angle(theta + dtheta)?;
    let c = theta.cos();
    Ok(z * dtheta / (c * c))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MirrorModel {
    pub step_resolution: f64,
    /// Per-axis optical half-cone.
    pub max_angle: f64,
    /// `(step size rad, settle time s)`, strictly increasing in step size.
    settle_points: Vec<(f64, f64)>,
    pub beam_deflection_factor: f64,
}

impl MirrorModel {
    pub fn new(
        step_resolution: f64,
        max_angle: f64,
        settle_points: Vec<(f64, f64)>,
        beam_deflection_factor: f64,
    ) -> Result<Self, SteeringError> {
        if !(step_resolution > 0.0) {
            return Err(SteeringError::InvalidModel("step resolution must be positive"));
        }
        if !(max_angle > 0.0 && max_angle < std::f64::consts::FRAC_PI_2) {
            return Err(SteeringError::InvalidModel("max angle must be in (0, 90°)"));
        }
        if settle_points.is_empty() {
            return Err(SteeringError::InvalidModel("settle table is empty"));
        }
        if settle_points.iter().any(|&(s, t)| !(s > 0.0 && t >= 0.0))
            || settle_points.windows(2).any(|w| !(w[0].0 < w[1].0))
        {
            return Err(SteeringError::InvalidModel(
                "settle steps must be positive and strictly increasing",
            ));
        }
        if !(beam_deflection_factor > 0.0) {
            return Err(SteeringError::InvalidModel("beam deflection factor must be positive"));
        }
        Ok(Self {
            step_resolution,
            max_angle,
            settle_points,
            beam_deflection_factor,
        })
    }

    pub fn settle_points(&self) -> &[(f64, f64)] {
        &self.settle_points
    }

    /// Largest quantized mechanical angle whose beam stays inside `max_angle`.
    pub fn mechanical_limit(&self) -> f64 {
        let raw = self.max_angle / self.beam_deflection_factor;
        (raw / self.step_resolution).floor() * self.step_resolution
    }
}

impl Default for MirrorModel {
    fn default() -> Self {
        Self {
            step_resolution: 22e-6,
            max_angle: 15f64.to_radians(),
            settle_points: vec![(0.1f64.to_radians(), 0.002), (20f64.to_radians(), 0.012)],
            beam_deflection_factor: 2.0,
        }
    }
}

/// Settling dead time for a step, linear between table knots with an
/// implicit `(0, 0)` knot and clamped past the last one.
pub fn settle_time(m: &MirrorModel, step: f64) -> f64 {
    let s = step.abs();
    let mut prev = (0.0, 0.0);
    for &(k, t) in &m.settle_points {
        if s <= k {
            return prev.1 + (s - prev.0) / (k - prev.0) * (t - prev.1);
        }
        prev = (k, t);
    }
    prev.1
}

/// Nearest multiple of the step resolution; exact ties round away from zero.
pub fn quantize_angle(m: &MirrorModel, angle: f64) -> Result<f64, SteeringError> {
    if !(angle.abs() <= m.max_angle) {
        return Err(SteeringError::OutOfRange {
            angle,
            limit: m.max_angle,
        });
    }
    Ok(quantize_steps(m, angle) as f64 * m.step_resolution)
}

fn quantize_steps(m: &MirrorModel, angle: f64) -> i64 {
    let r = angle / m.step_resolution;
    let whole = r.trunc();
    // Ratios like 33e-6 / 22e-6 land a few ulps off 1.5.
    if ((r - whole).abs() - 0.5).abs() < 1e-9 {
        (whole + r.signum()) as i64
    } else {
        r.round() as i64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MirrorState {
    pub theta: f64,
    pub phi: f64,
    /// Simulation time at which the last move has settled.
    pub busy_until: f64,
}

impl MirrorState {
    pub fn is_settled(&self, now: f64) -> bool {
        now >= self.busy_until
    }

    /// Whether both angles sit on the step grid and inside the mechanical limit.
    pub fn is_valid_for(&self, m: &MirrorModel) -> bool {
        let on_grid = |a: f64| {
            let r = a / m.step_resolution;
            (r - r.round()).abs() < 1e-6
        };
        let lim = m.mechanical_limit() + 1e-12;
        on_grid(self.theta) && on_grid(self.phi) && self.theta.abs() <= lim && self.phi.abs() <= lim
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteeringController {
    /// Offset magnitude (camera pixels) below which no command is issued.
    pub deadband: f64,
    /// Mechanical mirror radians per pixel of observed offset.
    pub gain: f64,
}

impl SteeringController {
    pub fn new(deadband: f64, gain: f64) -> Result<Self, SteeringError> {
        if !(deadband >= 0.0) {
            return Err(SteeringError::InvalidModel("deadband must be non-negative"));
        }
        if !(gain > 0.0) {
            return Err(SteeringError::InvalidModel("gain must be positive"));
        }
        Ok(Self { deadband, gain })
    }

    /// Gain such that one command cancels one observed pixel: the camera's
    /// angular pixel pitch divided by the beam deflection factor.
    pub fn for_camera(k: &CameraIntrinsics, m: &MirrorModel, deadband: f64) -> Result<Self, SteeringError> {
        let pitch = (1.0 / k.fx).atan();
        Self::new(deadband, pitch / m.beam_deflection_factor)
    }
}

impl Default for SteeringController {
    fn default() -> Self {
        Self {
            deadband: 2.0,
            gain: 10e-6,
        }
    }
}

/// One step of the sequential tracker. Returns the new state and whether a
/// mirror command was issued.
pub fn steer_update(
    c: &SteeringController,
    m: &MirrorModel,
    state: MirrorState,
    offset_px: (f64, f64),
    now: f64,
) -> (MirrorState, bool) {
    let (dx, dy) = offset_px;
    if dx.hypot(dy) <= c.deadband || now < state.busy_until {
        return (state, false);
    }
    let limit_steps = (m.mechanical_limit() / m.step_resolution).round() as i64;
    let step_to = |current: f64, delta: f64| {
        let cur = (current / m.step_resolution).round() as i64;
        let target = (cur + quantize_steps(m, delta)).clamp(-limit_steps, limit_steps);
        target as f64 * m.step_resolution
    };
    let theta = step_to(state.theta, c.gain * dx);
    let phi = step_to(state.phi, c.gain * dy);
    let moved = (theta - state.theta).abs().max((phi - state.phi).abs());
    if moved == 0.0 {
        return (state, false);
    }
    let next = MirrorState {
        theta,
        phi,
        busy_until: now + settle_time(m, moved),
    };
    (next, true)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorBudget {
    pub shift: f64,
    /// Shift as a fraction of the projected image height.
    pub fraction: f64,
}

/// Image misplacement caused by mirror repeatability, via the exact shift
/// formula with the beam-deflected angular error.
pub fn mirror_error_budget(
    m: &MirrorModel,
    z: f64,
    theta: f64,
    repeatability: f64,
    image_height: f64,
) -> Result<ErrorBudget, SteeringError> {
    let shift = image_shift_exact(z, theta, m.beam_deflection_factor * repeatability)?;
    Ok(ErrorBudget {
        shift,
        fraction: shift / image_height,
    })
}
