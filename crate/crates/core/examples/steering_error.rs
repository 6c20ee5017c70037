//! Screen-plane image shift caused by a mirror pointing error, the
//! small-angle approximation, and the error budget of the default mirror.

use beamsim::steering::{image_shift_approx, image_shift_exact, mirror_error_budget, MirrorModel};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (z, theta, dtheta) = (1.0, 45f64.to_radians(), 0.1f64.to_radians());
    let shift = image_shift_exact(z, theta, dtheta)?;
    println!(
        "0.1° error at 45°, 1 m: {:.3} mm ({:.1}% of a 20 mm image)",
        shift * 1e3,
        shift / 0.020 * 100.0
    );

    println!("\nshift in mm, z = 1 m (rows: error in degrees, columns: beam angle)");
    let thetas = [0.0, 15.0, 30.0, 45.0];
    print!("{:>7}", "dθ");
    for t in thetas {
        print!("{:>10}", format!("{t}°"));
    }
    println!();
    for i in 1..=10 {
        let dt = 0.02 * i as f64;
        print!("{dt:>7.2}");
        for t in thetas {
            let exact = image_shift_exact(1.0, f64::to_radians(t), dt.to_radians())?;
            let approx = image_shift_approx(1.0, f64::to_radians(t), dt.to_radians())?;
            print!("{:>10}", format!("{:.3}/{:.3}", exact * 1e3, approx * 1e3));
        }
        println!();
    }

    let m = MirrorModel::default();
    let b = mirror_error_budget(&m, 1.0, theta, 15e-6, 0.020)?;
    println!(
        "\nrepeatability 15 µrad at 45°, 1 m: {:.1} µm ({:.2}% of the image height)",
        b.shift * 1e6,
        b.fraction * 100.0
    );
    Ok(())
}
