//! Seeded random-search hyperparameter sweeps.
//!
//! Run 0 always uses the unswept base configuration, so the winner is never
//! worse on validation than the default. Sampling draws from its own RNG,
//! independent of the data seed and of the run seeds.

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::{ExperimentConfig, OptimiserSpec, SweepSpec};
use super::experiment::run_single;
use crate::{Error, Result};

/// Keys rounded to integers after sampling.
const ROUNDED: &[&str] = &["batch_size", "batch_laps", "num_layers", "T", "traj_batch", "m"];

#[derive(Clone, Debug, PartialEq)]
pub struct SweepEntry {
    pub index: usize,
    /// `None` when the sampled values did not form a valid optimiser.
    pub spec: Option<OptimiserSpec>,
    pub sampled: Vec<(String, f64)>,
    pub min_val_loss: f64,
    pub min_test_loss: f64,
    pub failure: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    pub best: OptimiserSpec,
    /// Successful runs by ascending validation loss (ties by index), then failures by index.
    pub leaderboard: Vec<SweepEntry>,
}

/// Values for runs `0..n_runs`; run 0 is empty (base configuration).
pub fn sample_configs(spec: &SweepSpec) -> Vec<Vec<(String, f64)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = vec![Vec::new()];
    for _ in 1..spec.n_runs {
        out.push(
            spec.ranges
                .iter()
                .map(|(k, r)| {
                    let v = r.sample(&mut rng);
                    (k.clone(), if ROUNDED.contains(&k.as_str()) { v.round() } else { v })
                })
                .collect(),
        );
    }
    out
}

fn apply(base: &OptimiserSpec, values: &[(String, f64)]) -> Result<OptimiserSpec> {
    values.iter().try_fold(base.clone(), |spec, (k, v)| spec.with(k, *v))
}

/// Runs every sampled configuration for `steps_per_run` steps on the first
/// seed of `base` and ranks them by minimum validation loss.
pub fn sweep(spec: &SweepSpec, base: &ExperimentConfig) -> Result<SweepResult> {
    spec.validate()?;
    let seed = *base
        .settings
        .seeds
        .first()
        .ok_or_else(|| Error::Config("bench.seeds must list at least one seed".into()))?;
    for (k, _) in &spec.ranges {
        if !base.optimiser.kind().allowed().contains(&k.as_str()) {
            return Err(Error::Config(format!(
                "optimiser {} has no hyperparameter '{k}' to sweep",
                base.optimiser.kind().name()
            )));
        }
    }
    let configs = sample_configs(spec);
    let entries: Vec<SweepEntry> = configs
        .into_par_iter()
        .enumerate()
        .map(|(index, sampled)| {
            let mut entry = SweepEntry {
                index,
                spec: None,
                sampled: sampled.clone(),
                min_val_loss: f64::INFINITY,
                min_test_loss: f64::INFINITY,
                failure: None,
            };
            match apply(&base.optimiser, &sampled) {
                Err(e) => entry.failure = Some(e.to_string()),
                Ok(opt) => {
                    let exp = ExperimentConfig {
                        optimiser: opt.clone(),
                        ..base.clone()
                    };
                    let rec = run_single(&exp, spec.steps_per_run, seed);
                    entry.spec = Some(opt);
                    entry.min_val_loss = rec.min_val_loss();
                    entry.min_test_loss = rec.summary.map_or(f64::INFINITY, |s| s.min_test_loss);
                    entry.failure = rec.failure;
                    if entry.failure.is_none() && !entry.min_val_loss.is_finite() {
                        entry.failure = Some("validation loss never finite".into());
                    }
                }
            }
            entry
        })
        .collect();
    let leaderboard = rank(entries);
    let best = leaderboard
        .first()
        .filter(|e| e.failure.is_none())
        .and_then(|e| e.spec.clone())
        .ok_or_else(|| Error::SweepFailure(format!("all {} sweep runs failed", spec.n_runs)))?;
    Ok(SweepResult { best, leaderboard })
}

/// Orders entries by (failed, min_val_loss, index).
pub fn rank(mut entries: Vec<SweepEntry>) -> Vec<SweepEntry> {
    entries.sort_by(|a, b| {
        a.failure
            .is_some()
            .cmp(&b.failure.is_some())
            .then(a.min_val_loss.total_cmp(&b.min_val_loss))
            .then(a.index.cmp(&b.index))
    });
    entries
}

pub fn leaderboard_table(result: &SweepResult) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:>4} {:>5} {:>14} {:>14}  config", "rank", "run", "min_val_loss", "min_test_loss");
    for (rank, e) in result.leaderboard.iter().enumerate() {
        let desc = match (&e.spec, &e.failure) {
            (_, Some(f)) => format!("failed: {f}"),
            (Some(spec), None) => spec.describe(),
            (None, None) => String::new(),
        };
        let _ = writeln!(
            s,
            "{:>4} {:>5} {:>14.6} {:>14.6}  {desc}",
            rank + 1,
            e.index,
            e.min_val_loss,
            e.min_test_loss
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::config::{ObjectiveKey, ObjectiveSpec, OptimiserKind, ParamRange, RunSettings};

    fn base(kind: OptimiserKind, pairs: &[(&str, f64)]) -> ExperimentConfig {
        ExperimentConfig {
            objective: ObjectiveSpec::new(ObjectiveKey::Quadratic),
            optimiser: OptimiserSpec::from_pairs(kind, pairs).unwrap(),
            settings: RunSettings::default(),
        }
    }

    fn lr_sweep(n_runs: usize, seed: u64) -> SweepSpec {
        SweepSpec {
            n_runs,
            steps_per_run: 20,
            ranges: vec![("lr".into(), ParamRange::LogUniform(1e-3, 1.0))],
            seed,
        }
    }

    #[test]
    fn single_run_is_best() {
        let res = sweep(&lr_sweep(1, 0), &base(OptimiserKind::Sgd, &[("lr", 0.1)])).unwrap();
        assert_eq!(res.leaderboard.len(), 1);
        assert_eq!(res.best.get("lr"), Some(0.1));
    }

    #[test]
    fn winner_is_no_worse_than_default() {
        let res = sweep(&lr_sweep(8, 3), &base(OptimiserKind::Sgd, &[("lr", 0.001)])).unwrap();
        let default = res.leaderboard.iter().find(|e| e.index == 0).unwrap();
        assert!(res.leaderboard[0].min_val_loss <= default.min_val_loss);
        assert!(res.leaderboard.windows(2).all(|w| w[0].min_val_loss <= w[1].min_val_loss));
    }

    #[test]
    fn ties_go_to_the_lower_index_regardless_of_input_order() {
        let entry = |index, v| SweepEntry {
            index,
            spec: None,
            sampled: vec![],
            min_val_loss: v,
            min_test_loss: v,
            failure: None,
        };
        let a = rank(vec![entry(3, 1.0), entry(1, 1.0), entry(2, 0.5)]);
        let b = rank(vec![entry(1, 1.0), entry(2, 0.5), entry(3, 1.0)]);
        assert_eq!(a, b);
        assert_eq!(a.iter().map(|e| e.index).collect::<Vec<_>>(), vec![2, 1, 3]);
    }

    #[test]
    fn sampled_configs_ignore_the_data_seed() {
        let spec = lr_sweep(6, 11);
        let mut b1 = base(OptimiserKind::Sgd, &[("lr", 0.1)]);
        b1.objective = ObjectiveSpec::new(ObjectiveKey::MoonsMlp);
        let mut b2 = b1.clone();
        b2.objective.data_seed = 99;
        let r1 = sweep(&spec, &b1).unwrap();
        let r2 = sweep(&spec, &b2).unwrap();
        let by_index = |r: &SweepResult| {
            let mut v: Vec<_> = r.leaderboard.iter().map(|e| (e.index, e.sampled.clone())).collect();
            v.sort_by_key(|e| e.0);
            v
        };
        assert_eq!(by_index(&r1), by_index(&r2));
        assert_eq!(sample_configs(&spec), sample_configs(&spec));
    }

    #[test]
    fn invalid_samples_fail_and_all_failing_is_an_error() {
        let spec = SweepSpec {
            n_runs: 4,
            steps_per_run: 5,
            ranges: vec![("sigma".into(), ParamRange::Uniform(2.0, 3.0))],
            seed: 0,
        };
        let b = base(OptimiserKind::Pio, &[("lr", 0.01), ("sigma", 1.0), ("T", 4.0), ("traj_batch", 2.0)]);
        let mut small = b.clone();
        small.settings.net_width = 4;
        small.settings.val_trajectories = 2;
        let res = sweep(&spec, &small).unwrap();
        assert_eq!(res.leaderboard[0].index, 0);
        assert!(res.leaderboard[1..].iter().all(|e| e.failure.is_some()));

        let bad = base(OptimiserKind::Sgd, &[("lr", 1e300)]);
        let mut bad = bad;
        bad.objective.init_scale = 1e300;
        assert!(matches!(sweep(&lr_sweep(1, 0), &bad), Err(Error::SweepFailure(_))));
        assert!(matches!(sweep(&spec, &base(OptimiserKind::Sgd, &[("lr", 0.1)])), Err(Error::Config(_))));
    }
}
