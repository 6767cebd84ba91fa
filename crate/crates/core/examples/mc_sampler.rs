//! Monte-Carlo Schrödinger-Föllmer sampling without any training.
//!
//! First samples `N(a, I)` and checks the terminal moments. For this target
//! every draw carries the same guide `a`, so the drift estimate is exact.
//! Then the sampler is used as an optimiser on a shifted Rastrigin-type
//! function at decreasing σ. With m and T held fixed, small σ makes the
//! importance weights degenerate and the paths overshoot.
//!
//! ```text
//! cargo run --release --example mc_sampler
//! ```

use sfopt::mcsfp::{mc_drift, optimise, sample_many, McDriftConfig};
use sfopt::sde::{NoiseSource, ScaleMode, TimeGrid};
use sfopt::targets::{boltzmann, Batch, Carrillo, Objective, Quadratic};

fn main() -> sfopt::Result<()> {
    let a = [1.0, -0.5];
    let target = boltzmann(Objective::new(Quadratic::new(a.to_vec())), 1.0)?;
    let cfg = McDriftConfig::new(500, ScaleMode::Standard)?;

    let est = mc_drift(&target, &Batch::Full, &[0.3, 0.3], 0.5, &cfg, NoiseSource::new(0, 0), 0)?;
    println!(
        "drift at (0.3, 0.3), t = 0.5: {:.4?} ± {:.4?} (exact {a:?}), ESS {:.0}",
        est.drift, est.std_err, est.effective_samples
    );

    let paths = sample_many(&target, &Batch::Full, TimeGrid::new(32)?, &cfg, 1, 1000)?;
    for k in 0..2 {
        let xs: Vec<f64> = paths.iter().map(|p| p.terminal()[k]).collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
        println!("coordinate {k}: mean {mean:+.4} (target {:+}), variance {var:.4}", a[k]);
    }

    let shift = vec![0.75, -0.4];
    let carrillo = Objective::new(Carrillo::new(shift.clone())?);
    println!("\nshifted Carrillo, minimum 0 at {shift:?}");
    for sigma in [1.0, 0.3, 0.1] {
        let best = optimise(&carrillo, sigma, 16, TimeGrid::new(16)?, &cfg, 2)?;
        let mean_v = best.losses.iter().sum::<f64>() / best.losses.len() as f64;
        println!(
            "sigma {sigma:<4} best V {:.4} at {:.3?}, mean V over 16 paths {mean_v:.3}",
            best.best_loss, best.best_x
        );
    }
    Ok(())
}
