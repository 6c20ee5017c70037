use nalgebra::{Matrix3, Point2, Rotation3, Vector3};
use rand::Rng;
use rand_distr::StandardNormal;

use super::{HeadsetModel, SimError, TrackingCamera};
use crate::geometry::{estimate_homography_between, planar_pose_from_homography, CorrespondenceSet, Frame, Homography};
use crate::steering::{MirrorModel, MirrorState};

/// One detected marker: id and corner pixels in TL, TR, BR, BL order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarkerObservation {
    pub id: u32,
    pub corners: [Point2<f64>; 4],
}

/// World-from-camera rotation for a mirror state. Positive `theta` turns the
/// view toward +x, positive `phi` toward +y; the beam turns by
/// `beam_deflection_factor` times the mechanical angle.
pub fn steer_rotation(m: &MirrorModel, s: &MirrorState) -> Matrix3<f64> {
    let f = m.beam_deflection_factor;
    let ry = Rotation3::from_axis_angle(&Vector3::y_axis(), f * s.theta);
    let rx = Rotation3::from_axis_angle(&Vector3::x_axis(), -f * s.phi);
    (ry * rx).into_inner()
}

/// Projects every marker through the steered co-axial camera at the
/// headset's current pose and adds Gaussian corner noise. Markers with any
/// corner off the sensor are dropped. Eight normal draws are consumed per
/// marker whether or not it is visible, so the noise stream does not depend
/// on the trajectory.
pub fn observe_markers<R: Rng + ?Sized>(
    cam: &TrackingCamera,
    headset: &HeadsetModel,
    mirror: &MirrorModel,
    state: &MirrorState,
    rng: &mut R,
) -> Vec<MarkerObservation> {
    let r_t = steer_rotation(mirror, state).transpose();
    let k = &cam.intrinsics;
    let mut out = Vec::new();
    for marker in &headset.markers {
        let noise: [f64; 8] = std::array::from_fn(|_| rng.sample::<f64, _>(StandardNormal) * cam.noise_sigma);
        let mut corners = [Point2::origin(); 4];
        let mut visible = true;
        for (i, c) in marker.corners().iter().enumerate() {
            let p_cam = (r_t * headset.pose.transform_point(c).coords).into();
            match k.project(&p_cam) {
                Some(px) => {
                    let noisy = Point2::new(px.x + noise[2 * i], px.y + noise[2 * i + 1]);
                    visible &= k.contains(&noisy);
                    corners[i] = noisy;
                }
                None => visible = false,
            }
        }
        if visible {
            out.push(MarkerObservation { id: marker.id, corners });
        }
    }
    out
}

/// Screen-plane (meters) to camera-pixel homography fitted to every visible
/// corner of known markers.
pub fn screen_homography(markers: &[MarkerObservation], headset: &HeadsetModel) -> Result<Homography, SimError> {
    let mut set = CorrespondenceSet::default();
    for obs in markers {
        if let Some(m) = headset.marker(obs.id) {
            for (c, px) in m.corners().iter().zip(obs.corners.iter()) {
                set.push(Point2::new(c.x, c.y), *px);
            }
        }
    }
    if set.is_empty() {
        return Err(SimError::NoMarkersVisible);
    }
    Ok(estimate_homography_between(&set, Frame::Screen, Frame::Camera)?)
}

/// Camera-pixel offset of the screen center from `projection_center`.
pub fn compute_screen_offset(
    markers: &[MarkerObservation],
    headset: &HeadsetModel,
    projection_center: Point2<f64>,
) -> Result<(f64, f64), SimError> {
    let h = screen_homography(markers, headset)?;
    let c = h.apply(&Point2::origin())?;
    Ok((c.x - projection_center.x, c.y - projection_center.y))
}

/// Projector throw: depth of the screen center from the planar pose of all
/// visible markers (fitted jointly in screen coordinates), plus the camera's
/// axial offset behind the projector.
pub fn estimate_throw(
    markers: &[MarkerObservation],
    cam: &TrackingCamera,
    headset: &HeadsetModel,
) -> Result<f64, SimError> {
    let h = screen_homography(markers, headset)?;
    let pose = planar_pose_from_homography(&h, &cam.intrinsics, 1.0)?;
    Ok(pose.translation().z + cam.axial_offset)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Frame, RigidTransform};
    use crate::simkit::Scene;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn at(x: f64, y: f64, z: f64) -> RigidTransform {
        RigidTransform::from_translation(Vector3::new(x, y, z), Frame::Headset, Frame::World)
    }

    #[test]
    fn centered_headset_matches_pinhole() {
        let s = Scene::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let obs = observe_markers(
            &s.camera,
            &s.headset,
            &s.projector.mirror,
            &MirrorState::default(),
            &mut rng,
        );
        assert_eq!(obs.len(), 4);
        let k = &s.camera.intrinsics;
        for o in &obs {
            let m = s.headset.marker(o.id).unwrap();
            for (c, px) in m.corners().iter().zip(o.corners.iter()) {
                // Hand pinhole: u = cx + fx·X/Z with Z = 1 m.
                let u = k.cx + k.fx * c.x / 1.0;
                let v = k.cy + k.fy * c.y / 1.0;
                assert!((px.x - u).abs() < 1e-9 && (px.y - v).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn headset_outside_fov_is_lost() {
        let mut s = Scene::default();
        s.headset.pose = at(0.5, 0.0, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(observe_markers(
            &s.camera,
            &s.headset,
            &s.projector.mirror,
            &MirrorState::default(),
            &mut rng
        )
        .is_empty());
    }

    #[test]
    fn steering_brings_headset_back() {
        let mut s = Scene::default();
        s.headset.pose = at(0.2, 0.0, 1.0);
        let state = MirrorState {
            theta: 0.2f64.atan() / 2.0,
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let obs = observe_markers(&s.camera, &s.headset, &s.projector.mirror, &state, &mut rng);
        assert_eq!(obs.len(), 4);
        let (dx, dy) = compute_screen_offset(&obs, &s.headset, s.camera.intrinsics.principal_point()).unwrap();
        assert!(dx.abs() < 1e-6 && dy.abs() < 1e-6, "{dx} {dy}");
    }

    #[test]
    fn noise_standard_deviation() {
        let mut s = Scene::default();
        s.camera.noise_sigma = 0.2;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 1000;
        let mut xs = Vec::with_capacity(n);
        for _ in 0..n {
            let obs = observe_markers(
                &s.camera,
                &s.headset,
                &s.projector.mirror,
                &MirrorState::default(),
                &mut rng,
            );
            xs.push(obs[0].corners[0].x);
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        assert!((sd - 0.2).abs() / 0.2 < 0.1, "sd {sd}");
    }

    #[test]
    fn offset_of_shifted_screen() {
        let mut s = Scene::default();
        let fx = s.camera.intrinsics.fx;
        // 50 px to the right at 1 m.
        s.headset.pose = at(50.0 / fx, 0.0, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let obs = observe_markers(
            &s.camera,
            &s.headset,
            &s.projector.mirror,
            &MirrorState::default(),
            &mut rng,
        );
        let (dx, dy) = compute_screen_offset(&obs, &s.headset, s.camera.intrinsics.principal_point()).unwrap();
        assert!((dx - 50.0).abs() < 1.0 && dy.abs() < 1.0);

        let single: Vec<_> = obs.iter().filter(|o| o.id == 2).copied().collect();
        let (dx1, dy1) = compute_screen_offset(&single, &s.headset, s.camera.intrinsics.principal_point()).unwrap();
        assert!((dx1 - 50.0).abs() <= 2.0 && dy1.abs() <= 2.0);
        assert_eq!(
            compute_screen_offset(&[], &s.headset, Point2::origin()),
            Err(SimError::NoMarkersVisible)
        );
    }

    #[test]
    fn throw_contract() {
        let mut s = Scene::default();
        s.camera.axial_offset = 0.0;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let obs = observe_markers(
            &s.camera,
            &s.headset,
            &s.projector.mirror,
            &MirrorState::default(),
            &mut rng,
        );
        assert!((estimate_throw(&obs, &s.camera, &s.headset).unwrap() - 1.0).abs() < 1e-6);
        s.camera.axial_offset = 0.1;
        assert!((estimate_throw(&obs, &s.camera, &s.headset).unwrap() - 1.1).abs() < 1e-6);
        assert_eq!(
            estimate_throw(&[], &s.camera, &s.headset),
            Err(SimError::NoMarkersVisible)
        );
    }

    #[test]
    fn throw_under_noise() {
        let mut s = Scene::default();
        s.camera.axial_offset = 0.0;
        s.camera.noise_sigma = 0.2;
        s.headset.pose = at(0.0, 0.0, 1.27);
        let mut errs: Vec<f64> = (0..100)
            .map(|seed| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let obs = observe_markers(
                    &s.camera,
                    &s.headset,
                    &s.projector.mirror,
                    &MirrorState::default(),
                    &mut rng,
                );
                (estimate_throw(&obs, &s.camera, &s.headset).unwrap() - 1.27).abs() / 1.27
            })
            .collect();
        errs.sort_by(f64::total_cmp);
        assert!(errs[50] <= 0.02, "median {}", errs[50]);
    }
}
