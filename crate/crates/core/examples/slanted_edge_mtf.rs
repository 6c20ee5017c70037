//! Slanted-edge MTF of synthetic edges with known Gaussian blur, compared
//! with the analytic exp(−2π²σ²f²) and its MTF50.

use beamsim::imaging::{blurred_edge_pattern, esf_from_roi, mtf50, mtf_from_esf, slanted_edge_pattern};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let pitch = 0.05;
    println!("σ px   mtf50 measured  analytic   (cy/px)   cpd at {pitch}°/px");
    for sigma in [0.5, 1.0, 2.0, 3.0] {
        let img = blurred_edge_pattern((128, 128), 5.0, sigma, 20, 235)?;
        let curve = mtf_from_esf(&esf_from_roi(&img)?)?;
        let (cypx, cpd) = mtf50(&curve, pitch)?;
        let expect = (2f64.ln() / 2.0).sqrt() / (std::f64::consts::PI * sigma);
        println!("{sigma:>4.1}   {cypx:>14.4}  {expect:>8.4}             {cpd:>6.2}");
    }

    let img = blurred_edge_pattern((128, 128), 5.0, 2.0, 20, 235)?;
    let curve = mtf_from_esf(&esf_from_roi(&img)?)?;
    println!("\nσ = 2 px curve:\n  f      measured  analytic");
    for (f, r) in curve.reported().step_by(8) {
        let g = (-2.0 * (std::f64::consts::PI * 2.0 * f).powi(2)).exp();
        println!("  {f:.3}  {r:>8.4}  {g:>8.4}");
    }

    let ideal = slanted_edge_pattern((128, 128), 5.0, 20, 235)?;
    let (cypx, cpd) = mtf50(&mtf_from_esf(&esf_from_roi(&ideal)?)?, pitch)?;
    println!("\nunblurred edge: mtf50 {cypx:.3} cy/px = {cpd:.1} cpd");
    Ok(())
}
