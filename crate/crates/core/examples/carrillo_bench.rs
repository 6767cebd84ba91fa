//! Every optimiser on the 2-d shifted Carrillo function, 10 seeds each,
//! with the mean ± std of the best value reached.
//!
//! ```text
//! cargo run --release --example carrillo_bench [out_dir]
//! ```

use sfopt::bench::{
    emit_curves, run_experiment, Aggregate, ExperimentConfig, ObjectiveKey, ObjectiveSpec, OptimiserKind,
    OptimiserSpec, RunSettings,
};

fn main() -> sfopt::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "runs/carrillo".into());
    let mut objective = ObjectiveSpec::new(ObjectiveKey::Carrillo);
    objective.shift = Some(vec![0.75, -0.4]);
    let lineup: [(OptimiserKind, &[(&str, f64)]); 6] = [
        (OptimiserKind::Sgd, &[("lr", 2e-3)]),
        (OptimiserKind::Adam, &[("lr", 0.1)]),
        (OptimiserKind::Adagrad, &[("lr", 0.5)]),
        (OptimiserKind::Langevin, &[("lr", 2e-3), ("sigma", 1.0)]),
        (OptimiserKind::Mcsfp, &[("sigma", 1.0)]),
        (OptimiserKind::Pio, &[("lr", 0.01), ("sigma", 1.0)]),
    ];
    let mut all = Vec::new();
    for (kind, pairs) in lineup {
        let exp = ExperimentConfig {
            objective: objective.clone(),
            optimiser: OptimiserSpec::from_pairs(kind, pairs)?,
            settings: RunSettings {
                steps: 50,
                seeds: (0..10).collect(),
                out_dir: format!("{out}/{}", kind.name()).into(),
                ..RunSettings::default()
            },
        };
        let records = run_experiment(&exp)?;
        let agg = Aggregate::of(&records);
        println!(
            "{:<9} best V {:.3} ± {:.3}  ({} of {} seeds ok)",
            kind.name(),
            agg.min_test_loss.0,
            agg.min_test_loss.1,
            agg.survivors,
            records.len()
        );
        all.extend(records);
    }
    let svg = format!("{out}/curves.svg");
    emit_curves(&all, svg.as_ref())?;
    println!("wrote {svg}");
    Ok(())
}
