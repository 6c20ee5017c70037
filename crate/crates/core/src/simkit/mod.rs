//! The simulated rig: a steering projector with a co-axial tracking camera,
//! a passive headset carrying fiducial markers, and the three-stage
//! capture/detect/display loop that keeps the projection on the screen.
//!
//! World frame: the mirror pivot sits at the origin and the unsteered optical
//! axis is +z, x right, y down. Projector and camera share that axis, so a
//! mirror move is a pure rotation of both views about the pivot.

mod graycode;
mod motion;
mod observe;
mod pipeline;
mod scenario;

pub use graycode::{
    calibrate_from_patterns, gray_decode, gray_encode, graycode_decode, graycode_generate, random_camera_mapping,
    simulate_observation, ObservedStack, PatternStack, DEFAULT_DECODE_THRESHOLD,
};
pub use motion::{MotionKind, MotionScript};
pub use observe::{
    compute_screen_offset, estimate_throw, observe_markers, screen_homography, steer_rotation, MarkerObservation,
};
pub use pipeline::{
    run_scenario, trajectory_stats, write_trace_csv, AxisStats, DisplaySample, PipelineConfig, PipelineTrace, Stage,
    Toggles, TraceEvent, TrajectoryStats, TRACE_HEADER,
};
pub use scenario::{Scenario, ScenarioError};

use nalgebra::{Point2, Point3, Vector3};
use thiserror::Error;

use crate::geometry::{CameraIntrinsics, Frame, GeometryError, Homography, RigidTransform};
use crate::optics::{fov_at_throw, EyepieceModel, FourFSystem, TunableLens};
use crate::steering::{MirrorModel, SteeringController};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("no markers visible")]
    NoMarkersVisible,
    #[error("marker plane lies behind the camera")]
    BehindCamera,
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("only {0} valid correspondences decoded")]
    InsufficientCorrespondences(usize),
    #[error("trace has fewer than two samples")]
    EmptyTrace,
    #[error(transparent)]
    Geometry(GeometryError),
}

impl From<GeometryError> for SimError {
    fn from(e: GeometryError) -> Self {
        match e {
            GeometryError::BehindCamera => SimError::BehindCamera,
            other => SimError::Geometry(other),
        }
    }
}

fn invalid(msg: impl Into<String>) -> SimError {
    SimError::ConfigInvalid(msg.into())
}

/// Steering projector: DMD resolution, projection cone through the mirror,
/// relay optics, tunable lens and mirror.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectorModel {
    pub resolution: (u32, u32),
    /// Full horizontal projection angle, radians.
    pub cone: f64,
    pub optics: FourFSystem,
    pub lens: TunableLens,
    pub mirror: MirrorModel,
}

impl ProjectorModel {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.resolution.0 == 0 || self.resolution.1 == 0 {
            return Err(invalid("projector resolution must be positive"));
        }
        if !(self.cone > 0.0 && self.cone / 2.0 <= self.mirror.max_angle) {
            return Err(invalid("projection cone must be positive and inside the mirror range"));
        }
        Ok(())
    }

    pub fn intrinsics(&self) -> Result<CameraIntrinsics, SimError> {
        Ok(CameraIntrinsics::from_hfov(
            self.cone,
            self.resolution.0,
            self.resolution.1,
        )?)
    }
}

impl Default for ProjectorModel {
    fn default() -> Self {
        Self {
            resolution: (854, 480),
            cone: 6f64.to_radians(),
            optics: FourFSystem::default(),
            lens: TunableLens::default(),
            mirror: MirrorModel::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackingCamera {
    pub intrinsics: CameraIntrinsics,
    pub frame_rate: f64,
    /// Distance of the camera's optical center behind the projector's, meters.
    pub axial_offset: f64,
    /// Isotropic corner noise, pixels.
    pub noise_sigma: f64,
}

impl TrackingCamera {
    /// 1032×772 camera whose horizontal field matches the projector cone.
    pub fn coaxial_with(projector: &ProjectorModel) -> Result<Self, SimError> {
        Ok(Self {
            intrinsics: CameraIntrinsics::from_hfov(projector.cone, 1032, 772)?,
            frame_rate: 130.0,
            axial_offset: 0.05,
            noise_sigma: 0.0,
        })
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.frame_rate > 0.0) {
            return Err(invalid("camera frame rate must be positive"));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(invalid("noise sigma must be non-negative"));
        }
        if !(self.axial_offset >= 0.0) {
            return Err(invalid("axial offset must be non-negative"));
        }
        Ok(())
    }
}

/// Square fiducial in the screen plane, axis aligned.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Marker {
    pub id: u32,
    /// Center in screen coordinates, meters.
    pub center: (f64, f64),
    /// Side length, meters.
    pub size: f64,
}

impl Marker {
    /// Corners in the screen frame, ordered top-left, top-right,
    /// bottom-right, bottom-left (y down).
    pub fn corners(&self) -> [Point3<f64>; 4] {
        let h = self.size / 2.0;
        let (x, y) = self.center;
        [
            Point3::new(x - h, y - h, 0.0),
            Point3::new(x + h, y - h, 0.0),
            Point3::new(x + h, y + h, 0.0),
            Point3::new(x - h, y + h, 0.0),
        ]
    }

    /// The same corners in the marker's own frame, origin at its center.
    pub fn local_corners(&self) -> [Point2<f64>; 4] {
        let h = self.size / 2.0;
        [
            Point2::new(-h, -h),
            Point2::new(h, -h),
            Point2::new(h, h),
            Point2::new(-h, h),
        ]
    }
}

/// Passive headset. The screen plane is z = 0 of the headset frame with the
/// active area centered on the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadsetModel {
    pub screen: EyepieceModel,
    pub markers: Vec<Marker>,
    /// World-from-headset.
    pub pose: RigidTransform,
}

impl HeadsetModel {
    /// Four markers of side `size` just outside the corners of the active area.
    pub fn with_corner_markers(screen: EyepieceModel, size: f64, gap: f64, pose: RigidTransform) -> Self {
        let mx = screen.screen_w / 2.0 + gap + size / 2.0;
        let my = screen.screen_h / 2.0 + gap + size / 2.0;
        let markers = [(-mx, -my), (mx, -my), (mx, my), (-mx, my)]
            .iter()
            .enumerate()
            .map(|(i, &c)| Marker {
                id: i as u32,
                center: c,
                size,
            })
            .collect();
        Self { screen, markers, pose }
    }

    pub fn marker(&self, id: u32) -> Option<&Marker> {
        self.markers.iter().find(|m| m.id == id)
    }

    /// All marker corners, grouped per marker.
    pub fn marker_corners(&self) -> Vec<[Point3<f64>; 4]> {
        self.markers.iter().map(Marker::corners).collect()
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.markers.len() < 2 {
            return Err(invalid("headset needs at least two markers"));
        }
        let (hw, hh) = (self.screen.screen_w / 2.0, self.screen.screen_h / 2.0);
        for m in &self.markers {
            if !(m.size > 0.0) {
                return Err(invalid(format!("marker {} has no size", m.id)));
            }
            let h = m.size / 2.0;
            let overlaps_x = (m.center.0 - h) < hw && (m.center.0 + h) > -hw;
            let overlaps_y = (m.center.1 - h) < hh && (m.center.1 + h) > -hh;
            if overlaps_x && overlaps_y {
                return Err(invalid(format!("marker {} overlaps the active area", m.id)));
            }
        }
        Ok(())
    }
}

impl Default for HeadsetModel {
    fn default() -> Self {
        let pose = RigidTransform::from_translation(Vector3::new(0.0, 0.0, 1.0), Frame::Headset, Frame::World);
        Self::with_corner_markers(EyepieceModel::default(), 0.010, 0.002, pose)
    }
}

/// Pinhole at the design eye position, looking at the screen through the
/// eyepiece. The active area fills the frame width at the reference throw.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewpointCamera {
    pub intrinsics: CameraIntrinsics,
    /// Virtual eye-to-screen distance, meters.
    pub eye_distance: f64,
}

impl ViewpointCamera {
    pub fn for_eyepiece(e: &EyepieceModel, throw: f64, resolution: (u32, u32)) -> Result<Self, SimError> {
        let (h_deg, _) = fov_at_throw(e, throw);
        let half = (h_deg.to_radians() / 2.0).tan();
        let intrinsics = CameraIntrinsics::from_hfov(h_deg.to_radians(), resolution.0, resolution.1)?;
        Ok(Self {
            intrinsics,
            eye_distance: (e.screen_w / 2.0) / half,
        })
    }

    /// Viewpoint pixel of a point on the screen plane (screen meters).
    pub fn project_screen(&self, x: f64, y: f64) -> Point2<f64> {
        let k = &self.intrinsics;
        Point2::new(k.cx + k.fx * x / self.eye_distance, k.cy + k.fy * y / self.eye_distance)
    }

    pub fn principal_point(&self) -> Point2<f64> {
        self.intrinsics.principal_point()
    }
}

/// Everything the pipeline needs about the rig.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub projector: ProjectorModel,
    pub camera: TrackingCamera,
    pub headset: HeadsetModel,
    pub controller: SteeringController,
    pub viewpoint: ViewpointCamera,
}

impl Scene {
    /// Default rig with the given deadband; the controller gain follows the
    /// camera geometry.
    pub fn new(
        projector: ProjectorModel,
        camera: TrackingCamera,
        headset: HeadsetModel,
        deadband: f64,
    ) -> Result<Self, SimError> {
        let controller = SteeringController::for_camera(&camera.intrinsics, &projector.mirror, deadband)
            .map_err(|e| invalid(e.to_string()))?;
        let throw = headset.pose.translation().norm();
        let viewpoint = ViewpointCamera::for_eyepiece(&headset.screen, throw, (1032, 772))?;
        Ok(Self {
            projector,
            camera,
            headset,
            controller,
            viewpoint,
        })
    }

    pub fn validate(&self) -> Result<(), SimError> {
        self.projector.validate()?;
        self.camera.validate()?;
        self.headset.validate()
    }

    /// Camera pixels to projector pixels. Both share the optical axis, so
    /// this is `K_p · K_c⁻¹`.
    pub fn camera_to_projector(&self) -> Result<Homography, SimError> {
        let kp = self.projector.intrinsics()?;
        Ok(Homography::new(
            kp.matrix() * self.camera.intrinsics.inverse_matrix(),
            Frame::Camera,
            Frame::Projector,
        )?)
    }
}

impl Default for Scene {
    fn default() -> Self {
        let projector = ProjectorModel::default();
        let camera = TrackingCamera::coaxial_with(&projector).expect("default camera");
        Self::new(projector, camera, HeadsetModel::default(), 2.0).expect("default scene")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_scene_is_valid() {
        let s = Scene::default();
        s.validate().unwrap();
        assert_eq!(s.projector.resolution, (854, 480));
        assert_eq!((s.camera.intrinsics.width, s.camera.intrinsics.height), (1032, 772));
        assert_eq!(s.headset.markers.len(), 4);
    }

    #[test]
    fn default_markers_clear_active_area() {
        let h = HeadsetModel::default();
        for m in &h.markers {
            for c in m.corners() {
                assert!(c.x.abs() >= 0.015 || c.y.abs() >= 0.010);
            }
        }
        let mut bad = h.clone();
        bad.markers[0].center = (0.0, 0.0);
        assert!(bad.validate().is_err());
    }

    #[test]
    fn projector_cone_must_fit_mirror() {
        let p = ProjectorModel {
            cone: 40f64.to_radians(),
            ..ProjectorModel::default()
        };
        assert!(p.validate().is_err());
    }

    #[test]
    fn camera_projector_centers_coincide() {
        let s = Scene::default();
        let h = s.camera_to_projector().unwrap();
        let c = h.apply(&s.camera.intrinsics.principal_point()).unwrap();
        assert!((c - Point2::new(427.0, 240.0)).norm() < 1e-9);
    }

    #[test]
    fn viewpoint_spans_active_width() {
        let s = Scene::default();
        let v = &s.viewpoint;
        let left = v.project_screen(-0.015, 0.0);
        let right = v.project_screen(0.015, 0.0);
        assert!((right.x - left.x - 1032.0).abs() < 1e-9);
    }
}
