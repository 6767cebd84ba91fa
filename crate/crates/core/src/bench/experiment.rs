//! Multi-seed experiment runs and their CSV records.
//!
//! Each run writes `{optimiser}_seed{seed}.csv` with the header
//! `step,wall_seconds,train_loss,val_loss,test_metric,sigma,lr,grad_norm,test_loss`.
//! Row 0 is the evaluation before any update. `summary.csv` lists every
//! seed plus an aggregate row in `mean ± std` form. PIO runs also save their
//! drift network as `{optimiser}_seed{seed}.ckpt`, and diffusion runs can dump
//! one final-state path as `{optimiser}_seed{seed}.trajectory.csv`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use super::baselines::{Baseline, BaselineHyper, BaselineKind};
use super::config::{ExperimentConfig, OptimiserKind};
use crate::driftnet::Variant;
use crate::mcsfp::{self, argmin, McDriftConfig};
use crate::pio::{simulate_net, Pio, PioConfig, PlateauScheduler};
use crate::sde::{NoiseSource, ScaleMode, TimeGrid};
use crate::targets::{boltzmann, Batch, Objective};
use crate::{Error, Result};

pub const RUN_HEADER: [&str; 9] = [
    "step",
    "wall_seconds",
    "train_loss",
    "val_loss",
    "test_metric",
    "sigma",
    "lr",
    "grad_norm",
    "test_loss",
];

/// Monte-Carlo sampler defaults used when the optimiser spec leaves them out.
pub const MC_DEFAULT_T: usize = 16;
pub const MC_DEFAULT_M: usize = 200;
pub const MC_DEFAULT_RUNS: usize = 8;

#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub step: usize,
    pub wall_seconds: f64,
    pub train_loss: f64,
    pub val_loss: f64,
    pub test_metric: f64,
    /// Boltzmann temperature, 0 for gradient baselines other than Langevin.
    pub sigma: f64,
    /// Learning rate, 0 for the Monte-Carlo sampler.
    pub lr: f64,
    /// Gradient norm before clipping; RMS drift norm for the sampler.
    pub grad_norm: f64,
    pub test_loss: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Summary {
    pub min_test_loss: f64,
    /// Highest accuracy for classifiers, lowest test loss for analytic objectives.
    pub best_metric: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub optimiser: String,
    pub seed: u64,
    pub rows: Vec<Row>,
    /// `None` when the run failed before producing a row.
    pub summary: Option<Summary>,
    pub failure: Option<String>,
}

impl RunRecord {
    pub fn min_val_loss(&self) -> f64 {
        self.rows.iter().map(|r| r.val_loss).fold(f64::INFINITY, f64::min)
    }

    pub fn succeeded(&self) -> bool {
        self.failure.is_none()
    }

    pub fn file_name(&self) -> String {
        format!("{}_seed{}.csv", self.optimiser, self.seed)
    }
}

fn summarise(rows: &[Row], seed: u64, higher_is_better: bool) -> Option<Summary> {
    if rows.is_empty() {
        return None;
    }
    let min_test_loss = rows.iter().map(|r| r.test_loss).fold(f64::INFINITY, f64::min);
    let best_metric = if higher_is_better {
        rows.iter().map(|r| r.test_metric).fold(f64::NEG_INFINITY, f64::max)
    } else {
        rows.iter().map(|r| r.test_metric).fold(f64::INFINITY, f64::min)
    };
    Some(Summary {
        min_test_loss,
        best_metric,
        seed,
    })
}

/// φ reported for a step and the optimiser state the row records.
struct StepOutcome {
    phi: Vec<f64>,
    sigma: f64,
    lr: f64,
    grad_norm: f64,
}

enum Driver {
    Gradient {
        baseline: Baseline,
        phi: Vec<f64>,
        sigma: f64,
    },
    Pio(Box<Pio>),
    Sampler {
        sigma: f64,
        runs: usize,
        grid: TimeGrid,
        mc: McDriftConfig,
        scheduler: PlateauScheduler,
        seed: u64,
        step: usize,
    },
}

impl Driver {
    fn new(exp: &ExperimentConfig, objective: &Objective, seed: u64) -> Result<Self> {
        let spec = &exp.optimiser;
        let settings = &exp.settings;
        let kind = spec.kind();
        let baseline_kind = match kind {
            OptimiserKind::Sgd => Some(BaselineKind::Sgd),
            OptimiserKind::Adam => Some(BaselineKind::Adam),
            OptimiserKind::Adagrad => Some(BaselineKind::Adagrad),
            OptimiserKind::Langevin => Some(BaselineKind::Langevin),
            _ => None,
        };
        if let Some(bk) = baseline_kind {
            let mut hyper = BaselineHyper::new(spec.get_or("lr", 0.0));
            hyper.beta1 = spec.get_or("beta1", hyper.beta1);
            hyper.beta2 = spec.get_or("beta2", hyper.beta2);
            hyper.temp = spec.get_or("sigma", 0.0);
            hyper.grad_clip = spec.get("grad_clip");
            return Ok(Driver::Gradient {
                baseline: Baseline::new(bk, hyper, objective.dim(), seed)?,
                phi: exp.objective.init_phi(seed)?,
                sigma: hyper.temp,
            });
        }
        let sigma = spec.get_or("sigma", 1.0);
        match kind {
            OptimiserKind::Pio | OptimiserKind::PioGrad => {
                let variant = if kind == OptimiserKind::PioGrad { Variant::Grad } else { Variant::Nn };
                let mut cfg = PioConfig::new(objective.dim());
                cfg.traj_batch = spec.get_or("traj_batch", cfg.traj_batch as f64) as usize;
                cfg.steps_t = spec.get_or("T", cfg.steps_t as f64) as usize;
                cfg.lr = spec.get_or("lr", cfg.lr);
                cfg.grad_clip = spec.get("grad_clip").filter(|c| *c > 0.0);
                cfg.sigma0 = sigma;
                cfg.anneal_factor = settings.anneal;
                cfg.patience = settings.patience;
                cfg.rescaled = settings.rescaled;
                cfg.val_trajectories = settings.val_trajectories;
                cfg.truncate = settings.truncate;
                let layers = spec.get_or("num_layers", 2.0) as usize;
                cfg.net = settings.net_spec(objective.dim(), layers, variant);
                Ok(Driver::Pio(Box::new(Pio::new(objective, cfg, seed)?)))
            }
            OptimiserKind::Mcsfp => {
                let mode = if settings.rescaled {
                    ScaleMode::rescaled(sigma)?
                } else {
                    ScaleMode::Standard
                };
                Ok(Driver::Sampler {
                    sigma,
                    runs: spec.get_or("traj_batch", MC_DEFAULT_RUNS as f64) as usize,
                    grid: TimeGrid::new(spec.get_or("T", MC_DEFAULT_T as f64) as usize)?,
                    mc: McDriftConfig::new(spec.get_or("m", MC_DEFAULT_M as f64) as usize, mode)?,
                    scheduler: PlateauScheduler::new(settings.patience, settings.anneal)?,
                    seed,
                    step: 0,
                })
            }
            _ => unreachable!("gradient baselines handled above"),
        }
    }

    /// State before any update.
    fn initial(&self, objective: &Objective) -> StepOutcome {
        match self {
            Driver::Gradient { baseline, phi, sigma } => StepOutcome {
                phi: phi.clone(),
                sigma: *sigma,
                lr: baseline.lr(),
                grad_norm: 0.0,
            },
            Driver::Pio(pio) => StepOutcome {
                phi: vec![0.0; objective.dim()],
                sigma: pio.sigma(),
                lr: pio.lr(),
                grad_norm: 0.0,
            },
            Driver::Sampler { sigma, .. } => StepOutcome {
                phi: vec![0.0; objective.dim()],
                sigma: *sigma,
                lr: 0.0,
                grad_norm: 0.0,
            },
        }
    }

    fn step(&mut self, objective: &Objective, batch: &Batch) -> Result<StepOutcome> {
        match self {
            Driver::Gradient { baseline, phi, sigma } => {
                let (_, grad) = objective.value_grad(phi, batch)?;
                let lr = baseline.lr();
                let grad_norm = baseline.step(phi, &grad)?;
                crate::error::ensure_finite(phi, || "baseline parameters".into())?;
                Ok(StepOutcome {
                    phi: phi.clone(),
                    sigma: *sigma,
                    lr,
                    grad_norm,
                })
            }
            Driver::Pio(pio) => {
                let out = pio.step(objective, batch)?;
                Ok(StepOutcome {
                    phi: out.selected,
                    sigma: out.sigma,
                    lr: out.lr,
                    grad_norm: out.report.grad_norm,
                })
            }
            Driver::Sampler {
                sigma,
                runs,
                grid,
                mc,
                scheduler,
                seed,
                step,
            } => {
                let run_sigma = *sigma;
                if let ScaleMode::Rescaled(_) = mc.mode {
                    mc.mode = ScaleMode::rescaled(run_sigma)?;
                }
                let target = boltzmann(objective.clone(), run_sigma)?;
                // One noise seed per (run seed, step); streams index the paths.
                let step_seed = seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ (*step as u64);
                let paths: Vec<_> = (0..*runs as u64)
                    .into_par_iter()
                    .map(|s| mcsfp::sample(&target, batch, *grid, mc, NoiseSource::new(step_seed, s)))
                    .collect::<Result<_>>()?;
                *step += 1;
                let vals = paths
                    .iter()
                    .map(|p| objective.validation_loss(p.terminal()))
                    .collect::<Result<Vec<_>>>()?;
                let train = paths
                    .iter()
                    .map(|p| objective.value(p.terminal(), &Batch::Full))
                    .collect::<Result<Vec<_>>>()?;
                let best = argmin(&vals);
                let rms_drift =
                    (paths.iter().map(|p| 2.0 * p.running_cost).sum::<f64>() / paths.len() as f64).sqrt();
                let mean_train = train.iter().sum::<f64>() / train.len() as f64;
                if let Some((_, s)) = scheduler.observe(mean_train, 0.0, *sigma) {
                    *sigma = s;
                }
                Ok(StepOutcome {
                    phi: paths[best].terminal().to_vec(),
                    sigma: run_sigma,
                    lr: 0.0,
                    grad_norm: rms_drift,
                })
            }
        }
    }
}

fn evaluate(objective: &Objective, step: usize, wall: f64, out: StepOutcome) -> Result<Row> {
    let phi = &out.phi;
    Ok(Row {
        step,
        wall_seconds: wall,
        train_loss: objective.value(phi, &Batch::Full)?,
        val_loss: objective.validation_loss(phi)?,
        test_metric: objective.test_metric(phi)?,
        sigma: out.sigma,
        lr: out.lr,
        grad_norm: out.grad_norm,
        test_loss: objective.test_loss(phi)?,
    })
}

/// One seed of `exp`, with `steps` updates after the initial evaluation.
/// Failures end the run and are recorded instead of returned.
pub fn run_single(exp: &ExperimentConfig, steps: usize, seed: u64) -> RunRecord {
    run_tracked(exp, steps, seed).0
}

fn run_tracked(exp: &ExperimentConfig, steps: usize, seed: u64) -> (RunRecord, Option<(Objective, Driver)>) {
    let mut rows = Vec::new();
    let (state, failure) = match run_rows(exp, steps, seed, &mut rows) {
        Ok(state) => (Some(state), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let record = RunRecord {
        optimiser: exp.optimiser.kind().name().to_string(),
        seed,
        summary: summarise(&rows, seed, exp.objective.key.is_dataset()),
        rows,
        failure,
    };
    (record, state)
}

fn run_rows(exp: &ExperimentConfig, steps: usize, seed: u64, rows: &mut Vec<Row>) -> Result<(Objective, Driver)> {
    let objective = exp.objective.build(exp.optimiser.batch_mode())?;
    let mut driver = Driver::new(exp, &objective, seed)?;
    let mut ctx = objective.context(seed);
    let clock = Instant::now();
    let wall = |on: bool| if on { clock.elapsed().as_secs_f64() } else { 0.0 };
    rows.push(evaluate(&objective, 0, wall(exp.settings.wall_clock), driver.initial(&objective))?);
    for step in 1..=steps {
        let batch = ctx.next_batch();
        let out = driver.step(&objective, &batch)?;
        let row = evaluate(&objective, step, wall(exp.settings.wall_clock), out)?;
        if !row.train_loss.is_finite() {
            return Err(Error::numeric("experiment", format!("non-finite training loss at step {step}")));
        }
        rows.push(row);
    }
    Ok((objective, driver))
}

/// Seed salt for the path written by `--dump-trajectory`.
const DUMP_SEED_SALT: u64 = 0xd0_0d;

/// PIO checkpoint and optional trajectory dump after a successful run.
/// Gradient baselines have no diffusion path and write neither.
fn write_artifacts(
    dir: &Path,
    rec: &RunRecord,
    objective: &Objective,
    driver: &Driver,
    dump_trajectory: bool,
) -> Result<()> {
    let stem = format!("{}_seed{}", rec.optimiser, rec.seed);
    let noise = NoiseSource::new(rec.seed ^ DUMP_SEED_SALT, 0);
    let traj = match driver {
        Driver::Gradient { .. } => return Ok(()),
        Driver::Pio(pio) => {
            pio.net().save(&dir.join(format!("{stem}.ckpt")), pio.sigma())?;
            if !dump_trajectory {
                return Ok(());
            }
            let target = pio.target(objective)?;
            let mode = pio.config().mode(pio.sigma());
            simulate_net(pio.net(), &target, &Batch::Full, pio.grid(), noise, mode)?
        }
        Driver::Sampler { sigma, grid, mc, .. } => {
            if !dump_trajectory {
                return Ok(());
            }
            let target = boltzmann(objective.clone(), *sigma)?;
            let mut mc = *mc;
            if let ScaleMode::Rescaled(_) = mc.mode {
                mc.mode = ScaleMode::rescaled(*sigma)?;
            }
            mcsfp::sample(&target, &Batch::Full, *grid, &mc, noise)?
        }
    };
    traj.write_csv(&dir.join(format!("{stem}.trajectory.csv")))
}

/// Runs every seed of `exp` concurrently and writes the CSVs into
/// `settings.out_dir`. Records come back in seed order.
pub fn run_experiment(exp: &ExperimentConfig) -> Result<Vec<RunRecord>> {
    let settings = &exp.settings;
    if settings.seeds.is_empty() {
        return Err(Error::Config("bench.seeds must list at least one seed".into()));
    }
    // Configuration errors surface before any run starts.
    let objective = exp.objective.build(exp.optimiser.batch_mode())?;
    Driver::new(exp, &objective, settings.seeds[0])?;
    let runs: Vec<_> = settings
        .seeds
        .par_iter()
        .map(|&seed| run_tracked(exp, settings.steps, seed))
        .collect();
    std::fs::create_dir_all(&settings.out_dir).map_err(|e| Error::io(&settings.out_dir, e))?;
    let mut records = Vec::with_capacity(runs.len());
    for (rec, state) in runs {
        write_run_csv(&settings.out_dir.join(rec.file_name()), &rec.rows)?;
        if let Some((objective, driver)) = &state {
            write_artifacts(&settings.out_dir, &rec, objective, driver, settings.dump_trajectory)?;
        }
        records.push(rec);
    }
    write_summary_csv(&settings.out_dir.join("summary.csv"), &records)?;
    Ok(records)
}

pub fn write_run_csv(path: &Path, rows: &[Row]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(RUN_HEADER).map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.write_record([
            r.step.to_string(),
            r.wall_seconds.to_string(),
            r.train_loss.to_string(),
            r.val_loss.to_string(),
            r.test_metric.to_string(),
            r.sigma.to_string(),
            r.lr.to_string(),
            r.grad_norm.to_string(),
            r.test_loss.to_string(),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        detail: e.to_string(),
    }
}

/// Reads a run CSV back. Rows must have strictly increasing steps.
pub fn read_run_csv(path: &Path) -> Result<Vec<Row>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let header = r.headers().map_err(|e| csv_err(path, e))?.clone();
    if header.len() < 8 || header.iter().take(8).ne(RUN_HEADER.iter().take(8).copied()) {
        return Err(Error::Format {
            path: path.to_path_buf(),
            detail: format!("unexpected header {:?}", header),
        });
    }
    let mut rows: Vec<Row> = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let f = |k: usize| -> Result<f64> {
            rec.get(k).unwrap_or("").parse::<f64>().map_err(|_| Error::Format {
                path: path.to_path_buf(),
                detail: format!("row {}: bad value in column {}", i + 1, RUN_HEADER[k]),
            })
        };
        let step = f(0)? as usize;
        if rows.last().is_some_and(|prev| prev.step >= step) {
            return Err(Error::Format {
                path: path.to_path_buf(),
                detail: format!("row {}: steps not strictly increasing", i + 1),
            });
        }
        rows.push(Row {
            step,
            wall_seconds: f(1)?,
            train_loss: f(2)?,
            val_loss: f(3)?,
            test_metric: f(4)?,
            sigma: f(5)?,
            lr: f(6)?,
            grad_norm: f(7)?,
            test_loss: if header.len() > 8 { f(8)? } else { f64::NAN },
        });
    }
    Ok(rows)
}

/// Reads a run CSV named `{optimiser}_seed{seed}.csv`.
pub fn read_record(path: &Path, higher_is_better: bool) -> Result<RunRecord> {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("");
    let (optimiser, seed) = stem
        .rsplit_once("_seed")
        .and_then(|(o, s)| Some((o.to_string(), s.parse::<u64>().ok()?)))
        .ok_or_else(|| Error::Format {
            path: path.to_path_buf(),
            detail: "file name must look like <optimiser>_seed<N>.csv".into(),
        })?;
    let rows = read_run_csv(path)?;
    Ok(RunRecord {
        optimiser,
        seed,
        summary: summarise(&rows, seed, higher_is_better),
        rows,
        failure: None,
    })
}

/// Every `<optimiser>_seed<N>.csv` in `dir`, sorted by file name.
pub fn read_records_dir(dir: &Path, higher_is_better: bool) -> Result<Vec<RunRecord>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension().is_some_and(|x| x == "csv")
                && p.file_stem()
                    .and_then(|s| s.to_str())
                    .and_then(|s| s.rsplit_once("_seed"))
                    .is_some_and(|(_, seed)| seed.parse::<u64>().is_ok())
        })
        .collect();
    paths.sort();
    paths.iter().map(|p| read_record(p, higher_is_better)).collect()
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// `m ± s` with three decimals.
pub fn format_pm(mean: f64, std: f64) -> String {
    format!("{mean:.3} ± {std:.3}")
}

/// Aggregate over the runs that did not fail.
#[derive(Clone, Debug, PartialEq)]
pub struct Aggregate {
    pub min_test_loss: (f64, f64),
    pub best_metric: (f64, f64),
    pub survivors: usize,
    pub failures: usize,
}

impl Aggregate {
    pub fn of(records: &[RunRecord]) -> Self {
        let ok: Vec<&Summary> = records
            .iter()
            .filter(|r| r.succeeded())
            .filter_map(|r| r.summary.as_ref())
            .collect();
        let losses: Vec<f64> = ok.iter().map(|s| s.min_test_loss).collect();
        let metrics: Vec<f64> = ok.iter().map(|s| s.best_metric).collect();
        Self {
            min_test_loss: mean_std(&losses),
            best_metric: mean_std(&metrics),
            survivors: ok.len(),
            failures: records.len() - ok.len(),
        }
    }
}

pub fn write_summary_csv(path: &Path, records: &[RunRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(["optimiser", "seed", "min_test_loss", "best_test_metric", "status"])
        .map_err(|e| csv_err(path, e))?;
    for rec in records {
        let (loss, metric) = rec
            .summary
            .as_ref()
            .map(|s| (s.min_test_loss.to_string(), s.best_metric.to_string()))
            .unwrap_or_default();
        let status = rec.failure.clone().map_or("ok".to_string(), |f| format!("failed: {f}"));
        w.write_record([rec.optimiser.clone(), rec.seed.to_string(), loss, metric, status])
            .map_err(|e| csv_err(path, e))?;
    }
    let agg = Aggregate::of(records);
    let name = records.first().map(|r| r.optimiser.clone()).unwrap_or_default();
    w.write_record([
        name,
        "all".to_string(),
        format_pm(agg.min_test_loss.0, agg.min_test_loss.1),
        format_pm(agg.best_metric.0, agg.best_metric.1),
        format!("{}/{} ok", agg.survivors, records.len()),
    ])
    .map_err(|e| csv_err(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Plain-text table of per-seed results and the aggregate.
pub fn summary_table(records: &[RunRecord]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<10} {:>6} {:>14} {:>14}  status", "optimiser", "seed", "min_test_loss", "best_metric");
    for rec in records {
        let (l, m) = rec
            .summary
            .as_ref()
            .map_or((f64::NAN, f64::NAN), |s| (s.min_test_loss, s.best_metric));
        let status = rec.failure.as_deref().unwrap_or("ok");
        let _ = writeln!(s, "{:<10} {:>6} {:>14.6} {:>14.6}  {status}", rec.optimiser, rec.seed, l, m);
    }
    let agg = Aggregate::of(records);
    let _ = writeln!(
        s,
        "aggregate over {}/{} runs: min test loss {}, best metric {}",
        agg.survivors,
        records.len(),
        format_pm(agg.min_test_loss.0, agg.min_test_loss.1),
        format_pm(agg.best_metric.0, agg.best_metric.1)
    );
    s
}
