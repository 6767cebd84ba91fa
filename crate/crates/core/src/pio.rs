//! Path integral optimiser: a drift network trained on the path-integral
//! control loss so that its terminal law approaches the Boltzmann target.
//!
//! Per trajectory the loss is
//!
//! ```text
//! running  = s · Σᵢ ‖bᵢ‖² / (2T)
//! wiener   = log N(X₁; 0, s·I)
//! target   = −V(X₁)/σ + log_offset
//! total    = running + wiener − target
//! ```
//!
//! with `s = 1` in standard mode and `s = σ` in rescaled mode. The terminal
//! target term is unnormalised; the missing normaliser is constant in θ.
//! Gradients flow through the whole unrolled path with the Wiener increments
//! held fixed.

use rayon::prelude::*;

use crate::driftnet::{AdamState, DriftNet, DriftNetSpec, Variant};
use crate::error::ensure_finite;
use crate::gradtape::{Tape, Tensor, Var};
use crate::mcsfp::argmin;
use crate::sde::{simulate_with, wiener_terminal_logdensity, NoiseSource, ScaleMode, TimeGrid, Trajectory};
use crate::targets::{boltzmann, Batch, BoltzmannTarget, Objective};
use crate::{Error, Result};

/// Seed perturbation that separates selection paths from training paths.
const SELECTION_SEED_SALT: u64 = 0x5e1e_c7ed_0000_0001;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PisLossBreakdown {
    pub running_cost: f64,
    pub wiener_term: f64,
    pub target_term: f64,
    pub total: f64,
}

impl PisLossBreakdown {
    fn accumulate(&mut self, other: &PisLossBreakdown) {
        self.running_cost += other.running_cost;
        self.wiener_term += other.wiener_term;
        self.target_term += other.target_term;
        self.total += other.total;
    }

    fn scaled(mut self, k: f64) -> Self {
        self.running_cost *= k;
        self.wiener_term *= k;
        self.target_term *= k;
        self.total *= k;
        self
    }
}

fn check_mode(mode: ScaleMode, target: &BoltzmannTarget) -> Result<()> {
    if let ScaleMode::Rescaled(s) = mode {
        if s != target.sigma() {
            return Err(Error::invalid(format!(
                "rescaled trajectory uses sigma {s} but the target has sigma {}",
                target.sigma()
            )));
        }
    }
    Ok(())
}

/// Loss breakdown of a finished trajectory.
pub fn pis_loss(traj: &Trajectory, target: &BoltzmannTarget, batch: &Batch) -> Result<PisLossBreakdown> {
    check_mode(traj.mode, target)?;
    let x1 = traj.terminal();
    let log_shape = target.log_shape(x1, batch)?;
    if !log_shape.is_finite() {
        return Err(Error::numeric("pis_loss", "non-finite V at the terminal state"));
    }
    let running_cost = traj.mode.drift_scale() * traj.running_cost;
    let wiener_term = wiener_terminal_logdensity(x1, traj.mode)?;
    let offset = target.log_offset();
    Ok(PisLossBreakdown {
        running_cost,
        wiener_term,
        target_term: log_shape + offset,
        total: (running_cost + wiener_term - log_shape) - offset,
    })
}

/// Loss of one path together with `∂total/∂θ`.
#[derive(Clone, Debug)]
pub struct PathGradient {
    pub loss: PisLossBreakdown,
    pub grad: Vec<f64>,
    pub trajectory: Trajectory,
}

/// Simulates one path with `net` on a tape and backpropagates its loss.
///
/// With `truncate = Some(w)` the state is detached every `w` steps, so no
/// gradient crosses those boundaries.
pub fn pis_loss_grad(
    net: &DriftNet,
    target: &BoltzmannTarget,
    batch: &Batch,
    grid: TimeGrid,
    noise: NoiseSource,
    mode: ScaleMode,
    truncate: Option<usize>,
) -> Result<PathGradient> {
    check_mode(mode, target)?;
    if truncate == Some(0) {
        return Err(Error::invalid("truncation window must be >= 1"));
    }
    let n = net.dim();
    if n != target.objective().dim() {
        return Err(Error::invalid(format!(
            "drift net has dimension {n} but the objective has {}",
            target.objective().dim()
        )));
    }
    let steps = grid.steps();
    let dt = grid.dt();
    let s = mode.drift_scale();
    let root_s = s.sqrt();
    let mut tape = Tape::new();
    let bound = net.bind(&mut tape)?;
    let mut x = tape.constant(Tensor::vector(vec![0.0; n]));
    let mut states = vec![vec![0.0; n]];
    let mut drifts = Vec::with_capacity(steps);
    let mut incs = Vec::with_capacity(steps);
    let mut energy: Option<Var> = None;
    for i in 0..steps {
        let score = match net.variant() {
            Variant::Nn => None,
            Variant::Grad => Some(target.score(tape.value(x).data(), batch)?),
        };
        let b = net.forward_tape(&mut tape, &bound, x, grid.time(i), score.as_deref())?;
        let bval = tape.value(b).data().to_vec();
        ensure_finite(&bval, || format!("drift at step {i}"))?;
        let sq = tape.squared_norm(b);
        energy = Some(match energy {
            None => sq,
            Some(e) => tape.add(e, sq)?,
        });
        let dw = noise.increment(i, n, dt);
        let sb = tape.scale(b, s);
        let step = tape.scale(sb, dt);
        let moved = tape.add(x, step)?;
        let kick = tape.constant(Tensor::vector(dw.iter().map(|w| root_s * w).collect()));
        x = tape.add(moved, kick)?;
        let xval = tape.value(x).data().to_vec();
        ensure_finite(&xval, || format!("state at step {}", i + 1))?;
        if i + 1 < steps && truncate.is_some_and(|w| (i + 1) % w == 0) {
            x = tape.constant(Tensor::vector(xval.clone()));
        }
        states.push(xval);
        drifts.push(bval);
        incs.push(dw);
    }
    let energy = energy.expect("time grid has at least one step");
    let running = tape.scale(energy, s / (2.0 * steps as f64));

    let x1 = states.last().unwrap().clone();
    let v = mode.terminal_variance();
    let sq = tape.squared_norm(x);
    let wiener = tape.scale(sq, -1.0 / (2.0 * v));
    let wiener = tape.add_const(wiener, -0.5 * n as f64 * (2.0 * std::f64::consts::PI * v).ln());
    let (log_shape, score) = target.log_shape_and_score(&x1, batch)?;
    if !log_shape.is_finite() {
        return Err(Error::numeric("pis_loss", "non-finite V at the terminal state"));
    }
    let target_node = tape.external(x, log_shape, score)?;
    let partial = tape.add(running, wiener)?;
    let total = tape.sub(partial, target_node)?;
    let grads = tape.backward(total)?;
    let grad = grads.wrt(bound.theta()).into_data();
    ensure_finite(&grad, || "PIS loss gradient".into())?;

    let offset = target.log_offset();
    let running_cost = tape.value(running).item().unwrap();
    let loss = PisLossBreakdown {
        running_cost,
        wiener_term: tape.value(wiener).item().unwrap(),
        target_term: log_shape + offset,
        total: tape.value(total).item().unwrap() - offset,
    };
    let trajectory = Trajectory {
        running_cost: crate::sde::running_cost(&drifts),
        states,
        noise: incs,
        drifts,
        mode,
    };
    Ok(PathGradient { loss, grad, trajectory })
}

/// Plain simulation of `net` without gradient recording.
pub fn simulate_net(
    net: &DriftNet,
    target: &BoltzmannTarget,
    batch: &Batch,
    grid: TimeGrid,
    noise: NoiseSource,
    mode: ScaleMode,
) -> Result<Trajectory> {
    simulate_with(net.dim(), |x, t, _| net.drift(target, batch, x, t), grid, noise, mode)
}

/// Shape of one training step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepShape {
    pub traj_batch: usize,
    pub grid: TimeGrid,
    pub mode: ScaleMode,
    pub grad_clip: Option<f64>,
    pub truncate: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct TrainStepReport {
    /// Means over surviving trajectories.
    pub mean: PisLossBreakdown,
    /// Gradient norm before clipping.
    pub grad_norm: f64,
    pub terminals: Vec<Vec<f64>>,
    /// `(trajectory index, reason)` of dropped trajectories.
    pub dropped: Vec<(usize, String)>,
}

/// Noise source of trajectory `j` within training step `step`.
pub fn training_noise(seed: u64, step: usize, traj_batch: usize, j: usize) -> NoiseSource {
    NoiseSource::new(seed, (step * traj_batch + j) as u64)
}

/// One Adam update of θ on the mean loss of `traj_batch` fresh paths.
///
/// A trajectory whose simulation fails numerically is dropped; the step
/// fails only when none survives.
pub fn train_step(
    net: &mut DriftNet,
    adam: &mut AdamState,
    target: &BoltzmannTarget,
    batch: &Batch,
    shape: &StepShape,
    seed: u64,
    step: usize,
) -> Result<TrainStepReport> {
    if shape.traj_batch == 0 {
        return Err(Error::invalid("traj_batch must be >= 1"));
    }
    let frozen: &DriftNet = net;
    let results: Vec<Result<PathGradient>> = (0..shape.traj_batch)
        .into_par_iter()
        .map(|j| {
            pis_loss_grad(
                frozen,
                target,
                batch,
                shape.grid,
                training_noise(seed, step, shape.traj_batch, j),
                shape.mode,
                shape.truncate,
            )
        })
        .collect();
    let mut grad = vec![0.0; net.param_count()];
    let mut mean = PisLossBreakdown::default();
    let mut terminals = Vec::with_capacity(results.len());
    let mut dropped = Vec::new();
    let mut first_error = None;
    for (j, r) in results.into_iter().enumerate() {
        match r {
            Ok(pg) => {
                mean.accumulate(&pg.loss);
                grad.iter_mut().zip(&pg.grad).for_each(|(g, d)| *g += d);
                terminals.push(pg.trajectory.terminal().to_vec());
            }
            Err(e @ Error::NumericFailure { .. }) => {
                dropped.push((j, e.to_string()));
                first_error.get_or_insert(e);
            }
            Err(e) => return Err(e),
        }
    }
    if terminals.is_empty() {
        let e = first_error.expect("traj_batch >= 1");
        return Err(Error::numeric(format!("train step {step}"), format!("every trajectory failed: {e}")));
    }
    let k = 1.0 / terminals.len() as f64;
    grad.iter_mut().for_each(|g| *g *= k);
    let grad_norm = adam.step(net.theta_mut(), &grad, shape.grad_clip)?;
    Ok(TrainStepReport {
        mean: mean.scaled(k),
        grad_norm,
        terminals,
        dropped,
    })
}

/// Halves learning rate and σ together when the tracked loss stalls.
#[derive(Clone, Debug, PartialEq)]
pub struct PlateauScheduler {
    pub patience: usize,
    pub factor: f64,
    pub rel_tol: f64,
    pub sigma_floor: f64,
    best: f64,
    stale: usize,
    events: usize,
}

impl PlateauScheduler {
    pub fn new(patience: usize, factor: f64) -> Result<Self> {
        if patience == 0 {
            return Err(Error::invalid("plateau patience must be >= 1"));
        }
        if !(factor > 0.0 && factor < 1.0) {
            return Err(Error::invalid(format!("anneal factor must lie in (0, 1), got {factor}")));
        }
        Ok(Self {
            patience,
            factor,
            rel_tol: 1e-3,
            sigma_floor: 1e-4,
            best: f64::INFINITY,
            stale: 0,
            events: 0,
        })
    }

    pub fn events(&self) -> usize {
        self.events
    }

    /// Feeds one loss; returns the new `(lr, σ)` when a plateau fires.
    ///
    /// After a plateau the best value is forgotten, since σ changed the
    /// loss being tracked.
    pub fn observe(&mut self, loss: f64, lr: f64, sigma: f64) -> Option<(f64, f64)> {
        if loss < self.best - self.rel_tol * self.best.abs() || self.best == f64::INFINITY {
            self.best = loss;
            self.stale = 0;
            return None;
        }
        self.stale += 1;
        if self.stale < self.patience {
            return None;
        }
        self.stale = 0;
        self.best = f64::INFINITY;
        self.events += 1;
        Some((lr * self.factor, (sigma * self.factor).max(self.sigma_floor)))
    }
}

/// Replays `history` through a fresh scheduler and returns the final `(lr, σ)`.
pub fn anneal_on_plateau(history: &[f64], patience: usize, lr: f64, sigma: f64) -> Result<(f64, f64)> {
    let mut sched = PlateauScheduler::new(patience, 0.5)?;
    let (mut lr, mut sigma) = (lr, sigma);
    for &l in history {
        if let Some((a, b)) = sched.observe(l, lr, sigma) {
            lr = a;
            sigma = b;
        }
    }
    Ok((lr, sigma))
}

/// `log w` of a path against the target, from the Girsanov density of the
/// reference process with respect to the controlled one times the terminal
/// ratio `ℙ̃(X₁)/P_W(X₁)`.
pub fn importance_log_weight(traj: &Trajectory, target: &BoltzmannTarget, batch: &Batch) -> Result<f64> {
    check_mode(traj.mode, target)?;
    let root_s = traj.mode.drift_scale().sqrt();
    let dt = 1.0 / traj.steps() as f64;
    let mut girsanov = 0.0;
    for (b, dw) in traj.drifts.iter().zip(&traj.noise) {
        let mut dot = 0.0;
        let mut sq = 0.0;
        for (bk, wk) in b.iter().zip(dw) {
            let u = root_s * bk;
            dot += u * wk;
            sq += u * u;
        }
        girsanov -= dot + 0.5 * sq * dt;
    }
    let x1 = traj.terminal();
    let log_target = target.log_unnormalised(x1, batch)?;
    let log_ref = wiener_terminal_logdensity(x1, traj.mode)?;
    let lw = girsanov + log_target - log_ref;
    if lw.is_nan() {
        return Err(Error::numeric("importance weight", "NaN log weight"));
    }
    Ok(lw)
}

pub fn importance_weight(traj: &Trajectory, target: &BoltzmannTarget, batch: &Batch) -> Result<f64> {
    Ok(importance_log_weight(traj, target, batch)?.exp())
}

/// Self-normalised weights via log-sum-exp. All `−∞` gives uniform weights.
pub fn normalise_log_weights(log_w: &[f64]) -> Vec<f64> {
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return vec![1.0 / log_w.len() as f64; log_w.len()];
    }
    let w: Vec<f64> = log_w.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Candidate {
    pub phi: Vec<f64>,
    pub val_loss: f64,
    pub log_weight: f64,
    /// Self-normalised over the set.
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CandidateSet {
    pub candidates: Vec<Candidate>,
    pub best_index: usize,
}

impl CandidateSet {
    pub fn best(&self) -> &Candidate {
        &self.candidates[self.best_index]
    }

    /// Importance-weighted mean of the candidate parameters.
    pub fn weighted_mean(&self) -> Vec<f64> {
        let n = self.candidates[0].phi.len();
        let mut out = vec![0.0; n];
        for c in &self.candidates {
            out.iter_mut().zip(&c.phi).for_each(|(o, p)| *o += c.weight * p);
        }
        out
    }

    pub fn mean_val_loss(&self) -> f64 {
        self.candidates.iter().map(|c| c.val_loss).sum::<f64>() / self.candidates.len() as f64
    }
}

/// Simulates `m` fresh paths (streams `0..m` of `seed`) without gradients and
/// keeps the terminal with the lowest validation loss.
pub fn validate_select(
    net: &DriftNet,
    target: &BoltzmannTarget,
    m: usize,
    grid: TimeGrid,
    mode: ScaleMode,
    seed: u64,
) -> Result<CandidateSet> {
    if m == 0 {
        return Err(Error::invalid("validate_select needs M >= 1"));
    }
    let objective = target.objective();
    let scored: Vec<(Vec<f64>, f64, f64)> = (0..m as u64)
        .into_par_iter()
        .map(|s| {
            let traj = simulate_net(net, target, &Batch::Full, grid, NoiseSource::new(seed, s), mode)?;
            let phi = traj.terminal().to_vec();
            let val = objective.validation_loss(&phi)?;
            let lw = importance_log_weight(&traj, target, &Batch::Full)?;
            Ok((phi, val, lw))
        })
        .collect::<Result<_>>()?;
    let log_w: Vec<f64> = scored.iter().map(|c| c.2).collect();
    let weights = normalise_log_weights(&log_w);
    let vals: Vec<f64> = scored.iter().map(|c| c.1).collect();
    let best_index = argmin(&vals);
    let candidates = scored
        .into_iter()
        .zip(weights)
        .map(|((phi, val_loss, log_weight), weight)| Candidate {
            phi,
            val_loss,
            log_weight,
            weight,
        })
        .collect();
    Ok(CandidateSet { candidates, best_index })
}

#[derive(Clone, Debug, PartialEq)]
pub struct PioConfig {
    pub traj_batch: usize,
    pub steps_t: usize,
    pub lr: f64,
    pub grad_clip: Option<f64>,
    pub sigma0: f64,
    pub anneal_factor: f64,
    pub patience: usize,
    pub rescaled: bool,
    pub val_trajectories: usize,
    pub truncate: Option<usize>,
    pub net: DriftNetSpec,
}

impl PioConfig {
    /// Defaults for an `n`-dimensional objective.
    pub fn new(n: usize) -> Self {
        Self {
            traj_batch: 16,
            steps_t: 32,
            lr: 1e-3,
            grad_clip: None,
            sigma0: 1.0,
            anneal_factor: 0.5,
            patience: 10,
            rescaled: false,
            val_trajectories: 64,
            truncate: None,
            net: DriftNetSpec::new(n),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.traj_batch == 0 {
            return Err(Error::invalid("traj_batch must be >= 1"));
        }
        if self.val_trajectories == 0 {
            return Err(Error::invalid("val_trajectories must be >= 1"));
        }
        if !(self.sigma0 > 0.0 && self.sigma0 <= 1.0) {
            return Err(Error::invalid(format!("initial sigma must lie in (0, 1], got {}", self.sigma0)));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::invalid(format!("learning rate must be finite and >= 0, got {}", self.lr)));
        }
        PlateauScheduler::new(self.patience, self.anneal_factor)?;
        TimeGrid::new(self.steps_t)?;
        self.net.param_count()?;
        Ok(())
    }

    pub fn mode(&self, sigma: f64) -> ScaleMode {
        if self.rescaled {
            ScaleMode::Rescaled(sigma)
        } else {
            ScaleMode::Standard
        }
    }
}

/// Outcome of one [`Pio::step`].
#[derive(Clone, Debug)]
pub struct PioStep {
    pub report: TrainStepReport,
    /// σ and learning rate the step ran with.
    pub sigma: f64,
    pub lr: f64,
    /// Terminal of this step with the lowest validation loss.
    pub selected: Vec<f64>,
    pub selected_val_loss: f64,
    /// Mean full-batch training loss over the step's terminals.
    pub mean_terminal_loss: f64,
    pub annealed: bool,
}

/// Training state owned by a single coordinator.
#[derive(Clone, Debug)]
pub struct Pio {
    cfg: PioConfig,
    net: DriftNet,
    adam: AdamState,
    scheduler: PlateauScheduler,
    sigma: f64,
    step: usize,
    seed: u64,
}

impl Pio {
    pub fn new(objective: &Objective, cfg: PioConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        if cfg.net.n != objective.dim() {
            return Err(Error::invalid(format!(
                "drift net dimension {} does not match objective dimension {}",
                cfg.net.n,
                objective.dim()
            )));
        }
        let net = DriftNet::new(cfg.net.clone(), seed)?;
        let adam = AdamState::new(net.param_count(), cfg.lr);
        let scheduler = PlateauScheduler::new(cfg.patience, cfg.anneal_factor)?;
        Ok(Self {
            sigma: cfg.sigma0,
            cfg,
            net,
            adam,
            scheduler,
            step: 0,
            seed,
        })
    }

    pub fn net(&self) -> &DriftNet {
        &self.net
    }

    pub fn config(&self) -> &PioConfig {
        &self.cfg
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn lr(&self) -> f64 {
        self.adam.lr
    }

    pub fn steps_done(&self) -> usize {
        self.step
    }

    pub fn grid(&self) -> TimeGrid {
        TimeGrid::new(self.cfg.steps_t).expect("validated")
    }

    pub fn target(&self, objective: &Objective) -> Result<BoltzmannTarget> {
        boltzmann(objective.clone(), self.sigma)
    }

    /// One training step on `batch`, followed by the plateau check on the
    /// mean terminal training loss.
    pub fn step(&mut self, objective: &Objective, batch: &Batch) -> Result<PioStep> {
        let target = self.target(objective)?;
        let shape = StepShape {
            traj_batch: self.cfg.traj_batch,
            grid: self.grid(),
            mode: self.cfg.mode(self.sigma),
            grad_clip: self.cfg.grad_clip,
            truncate: self.cfg.truncate,
        };
        let (sigma, lr) = (self.sigma, self.adam.lr);
        let report = train_step(&mut self.net, &mut self.adam, &target, batch, &shape, self.seed, self.step)?;
        self.step += 1;
        let vals = report
            .terminals
            .iter()
            .map(|phi| objective.validation_loss(phi))
            .collect::<Result<Vec<_>>>()?;
        let best = argmin(&vals);
        let train = report
            .terminals
            .iter()
            .map(|phi| objective.value(phi, &Batch::Full))
            .collect::<Result<Vec<_>>>()?;
        let mean_terminal_loss = train.iter().sum::<f64>() / train.len() as f64;
        let annealed = match self.scheduler.observe(mean_terminal_loss, self.adam.lr, self.sigma) {
            Some((lr, sigma)) => {
                self.adam.lr = lr;
                self.sigma = sigma;
                true
            }
            None => false,
        };
        Ok(PioStep {
            selected: report.terminals[best].clone(),
            selected_val_loss: vals[best],
            mean_terminal_loss,
            report,
            sigma,
            lr,
            annealed,
        })
    }

    /// Validation-argmin over `val_trajectories` fresh paths of the current net.
    pub fn select(&self, objective: &Objective) -> Result<CandidateSet> {
        let target = self.target(objective)?;
        validate_select(
            &self.net,
            &target,
            self.cfg.val_trajectories,
            self.grid(),
            self.cfg.mode(self.sigma),
            self.seed ^ SELECTION_SEED_SALT,
        )
    }
}
