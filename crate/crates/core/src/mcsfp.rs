//! Monte-Carlo Schrödinger-Föllmer sampler.
//!
//! The drift at `(x, t)` is `∇ log E_Z[f(x + √(1−t) Z)]` with
//! `f = dℙ/dN(0, I)`. It is estimated by self-normalised importance
//! weighting over `m` Gaussian draws, in log space:
//!
//! ```text
//! y_j       = x + √(1−t) Z_j
//! log f(y)  = −V(y)/σ + ‖y‖²/2          (normaliser dropped)
//! ∇f/f (y)  = −∇V(y)/σ + y
//! drift     = Σ_j softmax_j(log f(y_j)) · ∇f/f (y_j)
//! ```
//!
//! Any constant factor on the density shifts every `log f(y_j)` equally and
//! cancels inside the softmax, so the estimator only ever looks at the
//! offset-free part of the target.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::sde::{simulate_with, NoiseDomain, NoiseSource, ScaleMode, TimeGrid, Trajectory};
use crate::targets::{boltzmann, Batch, BoltzmannTarget, Objective};
use crate::{Error, Result};

pub const DEFAULT_SAMPLES: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McDriftConfig {
    pub samples_m: usize,
    pub mode: ScaleMode,
}

impl Default for McDriftConfig {
    fn default() -> Self {
        Self {
            samples_m: DEFAULT_SAMPLES,
            mode: ScaleMode::Standard,
        }
    }
}

impl McDriftConfig {
    pub fn new(samples_m: usize, mode: ScaleMode) -> Result<Self> {
        if samples_m == 0 {
            return Err(Error::invalid("Monte-Carlo sample count must be >= 1"));
        }
        Ok(Self { samples_m, mode })
    }
}

/// Drift estimate with its diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct McDriftEstimate {
    pub drift: Vec<f64>,
    /// Self-normalised importance weights, one per draw.
    pub weights: Vec<f64>,
    /// Delta-method standard error per coordinate.
    pub std_err: Vec<f64>,
    /// Kish effective sample size `1 / Σ w²`.
    pub effective_samples: f64,
}

/// Drift estimate at `(x, t)` using draws from `rng`.
pub fn mc_drift_with(
    target: &BoltzmannTarget,
    batch: &Batch,
    x: &[f64],
    t: f64,
    samples_m: usize,
    rng: &mut impl Rng,
) -> Result<McDriftEstimate> {
    if !(0.0..1.0).contains(&t) {
        return Err(Error::invalid(format!("drift time must lie in [0, 1), got {t}")));
    }
    if samples_m == 0 {
        return Err(Error::invalid("Monte-Carlo sample count must be >= 1"));
    }
    let n = x.len();
    let spread = (1.0 - t).sqrt();
    let mut log_w = Vec::with_capacity(samples_m);
    let mut guides = Vec::with_capacity(samples_m);
    let mut y = vec![0.0; n];
    for _ in 0..samples_m {
        for (yk, xk) in y.iter_mut().zip(x) {
            let z: f64 = StandardNormal.sample(rng);
            *yk = xk + spread * z;
        }
        let (log_shape, mut g) = target.log_shape_and_score(&y, batch)?;
        let half_sq: f64 = 0.5 * y.iter().map(|v| v * v).sum::<f64>();
        g.iter_mut().zip(&y).for_each(|(gk, yk)| *gk += yk);
        log_w.push(log_shape + half_sq);
        guides.push(g);
    }
    if log_w.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
        return Err(Error::numeric(format!("mc_drift at t={t}"), "non-finite log weight"));
    }
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::numeric(format!("mc_drift at t={t}"), "all importance weights underflow"));
    }
    let mut weights: Vec<f64> = log_w.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);

    let mut drift = vec![0.0; n];
    for (w, g) in weights.iter().zip(&guides) {
        if *w == 0.0 {
            continue;
        }
        crate::error::ensure_finite(g, || format!("mc_drift guide at t={t}"))?;
        drift.iter_mut().zip(g).for_each(|(d, gk)| *d += w * gk);
    }
    let mut var = vec![0.0; n];
    for (w, g) in weights.iter().zip(&guides) {
        for k in 0..n {
            var[k] += w * w * (g[k] - drift[k]).powi(2);
        }
    }
    let effective_samples = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();
    Ok(McDriftEstimate {
        drift,
        weights,
        std_err: var.into_iter().map(f64::sqrt).collect(),
        effective_samples,
    })
}

/// Drift estimate whose draws are keyed by `(noise, step)`. Fresh draws for
/// every step and trajectory.
pub fn mc_drift(
    target: &BoltzmannTarget,
    batch: &Batch,
    x: &[f64],
    t: f64,
    cfg: &McDriftConfig,
    noise: NoiseSource,
    step: usize,
) -> Result<McDriftEstimate> {
    let mut rng = noise.rng(step, NoiseDomain::MonteCarlo);
    mc_drift_with(target, batch, x, t, cfg.samples_m, &mut rng)
}

/// One Euler-Maruyama path driven by the Monte-Carlo drift.
pub fn sample(
    target: &BoltzmannTarget,
    batch: &Batch,
    grid: TimeGrid,
    cfg: &McDriftConfig,
    noise: NoiseSource,
) -> Result<Trajectory> {
    let n = target.objective().dim();
    simulate_with(
        n,
        |x, t, step| Ok(mc_drift(target, batch, x, t, cfg, noise, step)?.drift),
        grid,
        noise,
        cfg.mode,
    )
}

/// `runs` independent paths (streams `0..runs`), in stream order.
pub fn sample_many(
    target: &BoltzmannTarget,
    batch: &Batch,
    grid: TimeGrid,
    cfg: &McDriftConfig,
    seed: u64,
    runs: usize,
) -> Result<Vec<Trajectory>> {
    (0..runs as u64)
        .into_par_iter()
        .map(|s| sample(target, batch, grid, cfg, NoiseSource::new(seed, s)))
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct McOptimum {
    pub best_x: Vec<f64>,
    pub best_loss: f64,
    pub best_index: usize,
    pub terminals: Vec<Vec<f64>>,
    pub losses: Vec<f64>,
}

/// Runs `runs` sampler paths at temperature `sigma` and returns the terminal
/// with the lowest full-batch loss (ties to the lower run index).
pub fn optimise(
    objective: &Objective,
    sigma: f64,
    runs: usize,
    grid: TimeGrid,
    cfg: &McDriftConfig,
    seed: u64,
) -> Result<McOptimum> {
    if runs == 0 {
        return Err(Error::invalid("optimise needs runs >= 1"));
    }
    let target = boltzmann(objective.clone(), sigma)?;
    let trajectories = sample_many(&target, &Batch::Full, grid, cfg, seed, runs)?;
    let terminals: Vec<Vec<f64>> = trajectories.into_iter().map(|t| t.terminal().to_vec()).collect();
    let losses = terminals
        .iter()
        .map(|x| objective.value(x, &Batch::Full))
        .collect::<Result<Vec<_>>>()?;
    let best_index = argmin(&losses);
    Ok(McOptimum {
        best_x: terminals[best_index].clone(),
        best_loss: losses[best_index],
        best_index,
        terminals,
        losses,
    })
}

/// Index of the smallest value; NaN never wins, ties go to the first index.
pub(crate) fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if v < &values[best] || values[best].is_nan() {
            best = i;
        }
    }
    best
}
