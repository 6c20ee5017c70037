//! Headset pose from its markers: project the marker corners through the
//! tracking camera, fit the screen-plane homography, decompose it into a
//! pose and derive the projector throw and lens power.

use beamsim::geometry::{planar_pose_from_homography, Frame, RigidTransform};
use beamsim::optics::focus_power_for_throw;
use beamsim::simkit::{estimate_throw, observe_markers, screen_homography, Scene};
use beamsim::steering::MirrorState;
use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut scene = Scene::default();
    scene.headset.pose = RigidTransform::from_euler(
        0.05,
        -0.1,
        0.02,
        Vector3::new(0.01, -0.005, 1.27),
        Frame::Headset,
        Frame::World,
    );
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for sigma in [0.0, 0.2, 0.5] {
        scene.camera.noise_sigma = sigma;
        let markers = observe_markers(
            &scene.camera,
            &scene.headset,
            &scene.projector.mirror,
            &MirrorState::default(),
            &mut rng,
        );
        let h = screen_homography(&markers, &scene.headset)?;
        let pose = planar_pose_from_homography(&h, &scene.camera.intrinsics, 1.0)?;
        let (dt, dr) = pose.distance_to(&scene.headset.pose);
        let throw = estimate_throw(&markers, &scene.camera, &scene.headset)?;
        let lens = focus_power_for_throw(
            throw - scene.camera.axial_offset,
            scene.camera.axial_offset,
            &scene.projector.lens,
        )?;
        println!(
            "σ = {sigma:.1} px: {} markers, pose error {:.3} mm / {:.3}°, throw {:.4} m, lens {:.4} D",
            markers.len(),
            dt * 1e3,
            dr.to_degrees(),
            throw,
            lens.diopters
        );
    }
    Ok(())
}
