//! Global optimisation by Schrödinger-Föllmer diffusion.
//!
//! Minimising a loss `V` is recast as sampling from its Boltzmann density
//! `exp(-V/σ)`. Samples are produced by a unit-time diffusion started at the
//! origin whose drift transports the Dirac start onto the target. The drift
//! is either estimated by Monte-Carlo ([`mcsfp`]) or learned by a small
//! time-conditioned network trained on the path-integral control loss
//! ([`pio`]).
//!
//! Module map:
//!
//! - [`targets`]: objectives, toy datasets, tiny classifiers, the Boltzmann transform.
//! - [`sde`]: time grids, counter-based Wiener noise, Euler-Maruyama simulation.
//! - [`mcsfp`]: Monte-Carlo drift estimator and the sampler/optimiser on top of it.
//! - [`gradtape`]: reverse-mode automatic differentiation over dense tensors.
//! - [`driftnet`]: Fourier-feature drift networks and Adam.
//! - [`pio`]: the path integral optimiser (training, annealing, selection, weights).
//! - [`bounds`]: failure-probability bound and its parameter solvers.
//! - [`bench`]: baselines, experiment harness, sweeps, CSV and SVG output.

pub mod bench;
pub mod bounds;
pub mod driftnet;
mod error;
pub mod gradtape;
pub mod mcsfp;
pub mod pio;
pub mod sde;
pub mod targets;

#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
