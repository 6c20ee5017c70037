//! Runs every bundled scenario with and without steering and warping and
//! prints the viewpoint trajectory statistics.

use beamsim::simkit::{run_scenario, trajectory_stats, Scenario, Toggles};

const SCENARIOS: &[&str] = &["static", "slide_x", "depth_z", "yaw20", "pitch20", "roll20"];

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios");
    let ablations = [
        ("all on", Toggles::default()),
        (
            "no steer",
            Toggles {
                steer: false,
                ..Toggles::default()
            },
        ),
        (
            "no warp",
            Toggles {
                warp: false,
                ..Toggles::default()
            },
        ),
    ];
    println!(
        "{:<8} {:<9} {:>7} {:>9} {:>9} {:>9} {:>9} {:>8}",
        "scene", "mode", "frames", "lost", "jitter_x", "jitter_y", "max_x", "lat_ms"
    );
    for name in SCENARIOS {
        let sc = Scenario::from_file(&dir.join(format!("{name}.scn")))?;
        for (label, toggles) in ablations {
            let trace = run_scenario(&sc.scene, &sc.motion, &sc.pipeline, sc.duration, toggles)?;
            let lost = trace.samples.iter().filter(|s| !s.markers_visible).count();
            match trajectory_stats(&trace) {
                Ok(st) => println!(
                    "{:<8} {:<9} {:>7} {:>9} {:>9.3} {:>9.3} {:>9.1} {:>8.2}",
                    name,
                    label,
                    trace.samples.len(),
                    lost,
                    st.x.rms_jitter,
                    st.y.rms_jitter,
                    st.x.max_excursion,
                    st.mean_latency * 1e3
                ),
                Err(e) => println!("{name:<8} {label:<9} {e}"),
            }
        }
    }
    Ok(())
}
