//! Gradient baselines: SGD, Adam, Adagrad and unadjusted Langevin dynamics.

use rand_distr::{Distribution, StandardNormal};

use crate::driftnet::{global_norm, AdamState};
use crate::error::ensure_finite;
use crate::sde::{NoiseDomain, NoiseSource};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BaselineKind {
    Sgd,
    Adam,
    Adagrad,
    Langevin,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BaselineHyper {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// Langevin temperature.
    pub temp: f64,
    pub grad_clip: Option<f64>,
}

impl BaselineHyper {
    pub fn new(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            temp: 0.0,
            grad_clip: None,
        }
    }
}

const ADAGRAD_EPS: f64 = 1e-10;

#[derive(Clone, Debug)]
enum State {
    Sgd,
    Adam(AdamState),
    Adagrad(Vec<f64>),
    Langevin { noise: NoiseSource },
}

/// One baseline optimiser bound to a parameter dimension.
#[derive(Clone, Debug)]
pub struct Baseline {
    kind: BaselineKind,
    hyper: BaselineHyper,
    state: State,
    steps: usize,
}

impl Baseline {
    /// `seed` keys the Langevin noise; other kinds ignore it.
    pub fn new(kind: BaselineKind, hyper: BaselineHyper, dim: usize, seed: u64) -> Result<Self> {
        if !(hyper.lr >= 0.0 && hyper.lr.is_finite()) {
            return Err(Error::invalid(format!("learning rate must be finite and >= 0, got {}", hyper.lr)));
        }
        if !(hyper.temp >= 0.0 && hyper.temp.is_finite()) {
            return Err(Error::invalid(format!("Langevin temperature must be >= 0, got {}", hyper.temp)));
        }
        let state = match kind {
            BaselineKind::Sgd => State::Sgd,
            BaselineKind::Adam => State::Adam(AdamState::new(dim, hyper.lr).with_betas(hyper.beta1, hyper.beta2)?),
            BaselineKind::Adagrad => State::Adagrad(vec![0.0; dim]),
            BaselineKind::Langevin => State::Langevin {
                noise: NoiseSource::new(seed, 0),
            },
        };
        Ok(Self {
            kind,
            hyper,
            state,
            steps: 0,
        })
    }

    pub fn kind(&self) -> BaselineKind {
        self.kind
    }

    pub fn lr(&self) -> f64 {
        self.hyper.lr
    }

    /// Updates `phi` in place; returns the gradient norm before clipping.
    pub fn step(&mut self, phi: &mut [f64], grad: &[f64]) -> Result<f64> {
        if phi.len() != grad.len() {
            return Err(Error::invalid(format!(
                "parameter length {} does not match gradient length {}",
                phi.len(),
                grad.len()
            )));
        }
        ensure_finite(grad, || format!("{:?} gradient", self.kind))?;
        let norm = global_norm(grad);
        if let State::Adam(adam) = &mut self.state {
            self.steps += 1;
            return adam.step(phi, grad, self.hyper.grad_clip);
        }
        let scale = match self.hyper.grad_clip {
            Some(c) if c > 0.0 && norm > c => c / norm,
            _ => 1.0,
        };
        let lr = self.hyper.lr;
        match &mut self.state {
            State::Sgd => phi.iter_mut().zip(grad).for_each(|(p, g)| *p -= lr * scale * g),
            State::Adagrad(acc) => {
                for i in 0..phi.len() {
                    let g = scale * grad[i];
                    acc[i] += g * g;
                    phi[i] -= lr * g / (acc[i].sqrt() + ADAGRAD_EPS);
                }
            }
            State::Langevin { noise } => {
                let amp = (2.0 * lr * self.hyper.temp).sqrt();
                let mut rng = noise.rng(self.steps, NoiseDomain::Langevin);
                for (p, g) in phi.iter_mut().zip(grad) {
                    let xi: f64 = StandardNormal.sample(&mut rng);
                    *p += -lr * scale * g + amp * xi;
                }
            }
            State::Adam(_) => unreachable!(),
        }
        self.steps += 1;
        Ok(norm)
    }
}
