//! Writes `boltzmann.svg`: a 1-d Carrillo function next to `exp(−V/σ)` for
//! shrinking σ. Lower σ concentrates the mass on the global minimiser.
//!
//! ```text
//! cargo run --example boltzmann_plot [out.svg]
//! ```

use sfopt::bench::plot_boltzmann;
use sfopt::targets::{Carrillo, Objective};

fn main() -> sfopt::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "boltzmann.svg".into());
    let objective = Objective::new(Carrillo::new(vec![0.5])?);
    let sigmas = [1.0, 0.5, 0.1];
    let curves = plot_boltzmann(&objective, &sigmas, -3.0, 3.0, 1001, out.as_ref())?;
    let min = curves.argmin_loss();
    println!("grid argmin of V: x = {:.3}", curves.xs[min]);
    for (k, sigma) in sigmas.iter().enumerate() {
        let ys = &curves.transformed[k];
        let mass: f64 = ys.iter().sum();
        let near: f64 = curves
            .xs
            .iter()
            .zip(ys)
            .filter(|(x, _)| (*x - 0.5).abs() < 0.5)
            .map(|(_, y)| y)
            .sum();
        println!(
            "sigma {sigma:<4} peak at x = {:.3}, share of grid mass within 0.5 of the minimiser {:.3}",
            curves.xs[curves.argmax(k)],
            near / mass
        );
    }
    println!("wrote {out}");
    Ok(())
}
