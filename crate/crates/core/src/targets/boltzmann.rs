use super::objective::{Batch, Objective};
use crate::{Error, Result};

/// Unnormalised Boltzmann density `exp(−V(φ)/σ)` of an objective.
///
/// `log_offset` multiplies the density by a constant `exp(log_offset)`; it
/// exists to exercise scale invariance and never changes any drift.
#[derive(Clone, Debug)]
pub struct BoltzmannTarget {
    objective: Objective,
    sigma: f64,
    log_offset: f64,
}

/// Wraps `objective` at temperature `sigma ∈ (0, 1]`.
pub fn boltzmann(objective: Objective, sigma: f64) -> Result<BoltzmannTarget> {
    check_sigma(sigma)?;
    Ok(BoltzmannTarget {
        objective,
        sigma,
        log_offset: 0.0,
    })
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma > 0.0 && sigma <= 1.0) {
        return Err(Error::invalid(format!("sigma must lie in (0, 1], got {sigma}")));
    }
    Ok(())
}

impl BoltzmannTarget {
    pub fn objective(&self) -> &Objective {
        &self.objective
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn log_offset(&self) -> f64 {
        self.log_offset
    }

    pub fn with_sigma(&self, sigma: f64) -> Result<Self> {
        check_sigma(sigma)?;
        Ok(Self {
            sigma,
            ..self.clone()
        })
    }

    /// Scales the unnormalised density by `exp(log_offset)`.
    pub fn with_log_offset(&self, log_offset: f64) -> Self {
        Self {
            log_offset,
            ..self.clone()
        }
    }

    /// `−V(φ)/σ`, the offset-free part of the log density.
    pub fn log_shape(&self, phi: &[f64], batch: &Batch) -> Result<f64> {
        Ok(-self.objective.value(phi, batch)? / self.sigma)
    }

    /// `−V(φ)/σ + log_offset`; no normaliser is ever computed.
    pub fn log_unnormalised(&self, phi: &[f64], batch: &Batch) -> Result<f64> {
        Ok(self.log_shape(phi, batch)? + self.log_offset)
    }

    /// `∇ log density = −∇V(φ)/σ`.
    pub fn score(&self, phi: &[f64], batch: &Batch) -> Result<Vec<f64>> {
        Ok(self.log_shape_and_score(phi, batch)?.1)
    }

    pub fn log_shape_and_score(&self, phi: &[f64], batch: &Batch) -> Result<(f64, Vec<f64>)> {
        let (v, mut g) = self.objective.value_grad(phi, batch)?;
        g.iter_mut().for_each(|x| *x = -*x / self.sigma);
        Ok((-v / self.sigma, g))
    }
}
