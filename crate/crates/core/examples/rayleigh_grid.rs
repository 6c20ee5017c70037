//! Diffraction-limited spot size over throw distance and aperture, the 4F
//! relay of the prototype, and what the spot means through the eyepiece.

use beamsim::optics::{fov_at_throw, rayleigh_spot, spot_cycles_per_degree, EyepieceModel, FourFSystem, Wavelength};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let lambda = Wavelength::new(550e-9)?;
    let apertures: Vec<f64> = (2..=8).map(|i| i as f64 * 0.01).collect();
    println!("spot size in µm at 550 nm (rows: throw in m, columns: aperture in mm)");
    print!("{:>6}", "d");
    for a in &apertures {
        print!("{:>8.0}", a * 1e3);
    }
    println!();
    for d in [0.5, 1.0, 1.5, 2.0] {
        print!("{d:>6.1}");
        for &a in &apertures {
            print!("{:>8.1}", rayleigh_spot(d, lambda, a)? * 1e6);
        }
        println!();
    }

    let relay = FourFSystem::default();
    let mag = relay.magnification();
    println!(
        "\n4F relay f1 = {} mm, f2 = {} mm: separation {} mm, magnification {}{}",
        relay.f1 * 1e3,
        relay.f2 * 1e3,
        relay.separation() * 1e3,
        mag.ratio,
        if mag.inverted { " (inverted)" } else { "" }
    );

    let eyepiece = EyepieceModel::default();
    println!("\nthrow  FoV h×v (deg)  relay spot (µm)  spot resolution (cpd)");
    for throw in [0.5, 1.0, 1.5, 2.0] {
        let (h, v) = fov_at_throw(&eyepiece, throw);
        let spot = relay.spot_size(throw, lambda)?;
        let cpd = spot_cycles_per_degree(spot, &eyepiece, throw)?;
        println!("{throw:>5.1}  {h:>5.1}×{v:<6.1}  {:>15.1}  {cpd:>21.1}", spot * 1e6);
    }
    Ok(())
}
