//! Trains a path integral optimiser on the Gaussian target `N(a, I)` and
//! compares the learned drift with the analytic optimum (the constant `a`).
//! The trained network is checkpointed and reloaded bit-exactly.
//!
//! ```text
//! cargo run --release --example pio_gaussian
//! ```

use sfopt::driftnet::DriftNet;
use sfopt::pio::{Pio, PioConfig};
use sfopt::targets::{Batch, Objective, Quadratic};

fn main() -> sfopt::Result<()> {
    let a = vec![1.0, -0.5];
    let objective = Objective::new(Quadratic::new(a.clone()));
    let mut cfg = PioConfig::new(2);
    cfg.traj_batch = 32;
    cfg.steps_t = 32;
    cfg.lr = 5e-3;
    cfg.patience = usize::MAX;
    let mut pio = Pio::new(&objective, cfg, 7)?;
    for k in 0..500 {
        let step = pio.step(&objective, &Batch::Full)?;
        if k % 50 == 0 || k == 499 {
            println!("step {k:4}  PIS loss {:+.4}  running {:.4}", step.report.mean.total, step.report.mean.running_cost);
        }
    }
    let set = pio.select(&objective)?;
    let n = set.candidates.len() as f64;
    let mean: Vec<f64> = (0..2).map(|k| set.candidates.iter().map(|c| c.phi[k]).sum::<f64>() / n).collect();
    let drift0 = pio.net().forward(&[0.0, 0.0], 0.0, None)?;
    println!("terminal mean of {n} validation paths {mean:?} (target {a:?})");
    println!("importance-weighted mean {:?}", set.weighted_mean());
    println!("drift at origin, t = 0: {drift0:?}");

    let path = std::env::temp_dir().join("pio_gaussian.ckpt");
    pio.net().save(&path, pio.sigma())?;
    let (reloaded, sigma) = DriftNet::load(&path)?;
    assert_eq!(reloaded.theta(), pio.net().theta());
    println!("checkpoint {} ({} parameters, sigma {sigma})", path.display(), reloaded.param_count());
    Ok(())
}
