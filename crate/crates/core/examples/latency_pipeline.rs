//! Per-frame latency of the capture → detect → display pipeline during a
//! 20 deg/s head turn, against the queueing bounds.

use std::time::Instant;

use beamsim::simkit::{run_scenario, trajectory_stats, Scenario};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/yaw20.scn");
    let mut sc = Scenario::from_file(&path)?;
    let p = &sc.pipeline;
    let lo = p.delay_sum();
    let hi = lo + 1.0 / p.capture_rate + 1.0 / p.detect_rate;
    println!(
        "stages {}/{}/{} Hz, delays sum {:.2} ms, latest-wins bound [{:.2}, {:.2}] ms",
        p.capture_rate,
        p.detect_rate,
        p.display_rate,
        lo * 1e3,
        lo * 1e3,
        hi * 1e3
    );
    for seed in 0..5 {
        sc.pipeline.seed = seed;
        sc.scene.camera.noise_sigma = 0.3;
        let start = Instant::now();
        let trace = run_scenario(&sc.scene, &sc.motion, &sc.pipeline, sc.duration, sc.toggles)?;
        let wall = start.elapsed();
        let (min, max) = trace
            .samples
            .iter()
            .fold((f64::MAX, 0f64), |(a, b), s| (a.min(s.latency), b.max(s.latency)));
        let st = trajectory_stats(&trace)?;
        println!(
            "seed {seed}: {} frames, latency min {:.2} / mean {:.2} / max {:.2} ms, jitter x {:.2} px, {:.2?} wall",
            trace.samples.len(),
            min * 1e3,
            st.mean_latency * 1e3,
            max * 1e3,
            st.x.rms_jitter,
            wall
        );
    }
    Ok(())
}
