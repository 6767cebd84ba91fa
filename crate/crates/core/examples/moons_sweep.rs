//! Desk-scale moons benchmark: a 16-run random sweep (64 steps each) for PIO
//! and Adam, then the winning configuration over 5 seeds for 100 steps.
//!
//! ```text
//! cargo run --release --example moons_sweep [out_dir]
//! ```

use sfopt::bench::{
    leaderboard_table, run_experiment, summary_table, sweep, ExperimentConfig, ObjectiveKey, ObjectiveSpec,
    OptimiserKind, OptimiserSpec, ParamRange, RunSettings, SweepSpec,
};

fn main() -> sfopt::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "runs/moons".into());
    let contenders: [(OptimiserKind, &[(&str, f64)], &[(&str, &str)]); 2] = [
        (
            OptimiserKind::Pio,
            &[("lr", 0.01), ("sigma", 1.0)],
            &[
                ("lr", "log:1e-3:5e-2"),
                ("grad_clip", "log:0.5:20"),
                ("batch_size", "choice:0,32,64"),
                ("sigma", "log:0.05:1"),
            ],
        ),
        (
            OptimiserKind::Adam,
            &[("lr", 0.01)],
            &[("lr", "log:1e-3:3e-1"), ("grad_clip", "log:0.5:20"), ("batch_size", "choice:0,32,64")],
        ),
    ];
    for (kind, defaults, ranges) in contenders {
        let base = ExperimentConfig {
            objective: ObjectiveSpec::new(ObjectiveKey::MoonsMlp),
            optimiser: OptimiserSpec::from_pairs(kind, defaults)?,
            settings: RunSettings {
                steps: 100,
                seeds: (0..5).collect(),
                out_dir: format!("{out}/{}", kind.name()).into(),
                ..RunSettings::default()
            },
        };
        let spec = SweepSpec {
            n_runs: 16,
            steps_per_run: 64,
            ranges: ranges
                .iter()
                .map(|(k, r)| Ok((k.to_string(), ParamRange::parse(r)?)))
                .collect::<sfopt::Result<_>>()?,
            seed: 5,
        };
        let result = sweep(&spec, &base)?;
        println!("== {} sweep ==\n{}", kind.name(), leaderboard_table(&result));
        let best = ExperimentConfig {
            optimiser: result.best,
            ..base
        };
        println!("{}", summary_table(&run_experiment(&best)?));
    }
    Ok(())
}
