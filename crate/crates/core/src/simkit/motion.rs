use nalgebra::{Rotation3, Unit, Vector3};

use super::SimError;
use crate::geometry::{compose, Frame, RigidTransform};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MotionKind {
    Static,
    SlideX,
    DepthZ,
    Yaw,
    Pitch,
    Roll,
}

impl MotionKind {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "static" => Self::Static,
            "slide_x" => Self::SlideX,
            "depth_z" => Self::DepthZ,
            "yaw" => Self::Yaw,
            "pitch" => Self::Pitch,
            "roll" => Self::Roll,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Static => "static",
            Self::SlideX => "slide_x",
            Self::DepthZ => "depth_z",
            Self::Yaw => "yaw",
            Self::Pitch => "pitch",
            Self::Roll => "roll",
        }
    }

    pub fn is_rotation(self) -> bool {
        matches!(self, Self::Yaw | Self::Pitch | Self::Roll)
    }
}

/// Constant-speed headset motion along one axis of its start pose. The
/// motion stops once `extent` is covered and holds from then on.
///
/// Speed and extent are m/s and m for translations, rad/s and rad for
/// rotations. Rotations turn about an axis through `pivot` (headset frame),
/// which defaults to a point 0.25 m behind the screen, the wrist of the arm
/// holding the headset in the bench setup.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionScript {
    pub kind: MotionKind,
    pub speed: f64,
    pub extent: f64,
    /// World-from-headset at t = 0.
    pub start_pose: RigidTransform,
    pub pivot: Vector3<f64>,
}

impl MotionScript {
    pub fn new(kind: MotionKind, speed: f64, extent: f64, start_pose: RigidTransform) -> Result<Self, SimError> {
        if !(speed >= 0.0 && speed.is_finite()) {
            return Err(SimError::ConfigInvalid("motion speed must be non-negative".into()));
        }
        if !(extent >= 0.0 && extent.is_finite()) {
            return Err(SimError::ConfigInvalid("motion extent must be non-negative".into()));
        }
        Ok(Self {
            kind,
            speed,
            extent,
            start_pose,
            pivot: Vector3::new(0.0, 0.0, 0.25),
        })
    }

    pub fn still(start_pose: RigidTransform) -> Self {
        Self::new(MotionKind::Static, 0.0, 0.0, start_pose).expect("static motion")
    }

    /// Distance or angle covered at time `t` (seconds).
    pub fn progress(&self, t: f64) -> f64 {
        if self.kind == MotionKind::Static {
            return 0.0;
        }
        (self.speed * t.max(0.0)).min(self.extent)
    }

    /// Time at which the motion completes its extent.
    pub fn completion_time(&self) -> f64 {
        if self.kind == MotionKind::Static || self.speed == 0.0 {
            0.0
        } else {
            self.extent / self.speed
        }
    }

    /// World-from-headset pose at time `t`.
    pub fn pose_at(&self, t: f64) -> RigidTransform {
        let s = self.progress(t);
        let local = match self.kind {
            MotionKind::Static => return self.start_pose,
            MotionKind::SlideX => translation(Vector3::new(s, 0.0, 0.0)),
            MotionKind::DepthZ => translation(Vector3::new(0.0, 0.0, s)),
            MotionKind::Yaw => self.about_pivot(Vector3::y_axis(), s),
            MotionKind::Pitch => self.about_pivot(Vector3::x_axis(), s),
            MotionKind::Roll => self.about_pivot(Vector3::z_axis(), s),
        };
        compose(&local, &self.start_pose).expect("headset frames chain")
    }

    fn about_pivot(&self, axis: Unit<Vector3<f64>>, angle: f64) -> RigidTransform {
        let r = Rotation3::from_axis_angle(&axis, angle).into_inner();
        RigidTransform::new(r, self.pivot - r * self.pivot, Frame::Headset, Frame::Headset)
    }
}

fn translation(t: Vector3<f64>) -> RigidTransform {
    RigidTransform::from_translation(t, Frame::Headset, Frame::Headset)
}
