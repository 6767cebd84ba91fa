use std::f64::consts::PI;
use std::fmt;

use super::objective::{Batch, Loss};
use crate::{Error, Result};

/// `V(x) = ‖x − c‖² / (2s²)`, the Boltzmann potential of `N(c, s²I)` at σ = 1.
#[derive(Clone, Debug, PartialEq)]
pub struct Quadratic {
    center: Vec<f64>,
    scale: f64,
}

impl Quadratic {
    pub fn new(center: Vec<f64>) -> Self {
        Self { center, scale: 1.0 }
    }

    pub fn with_scale(center: Vec<f64>, scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::invalid(format!("quadratic scale must be positive, got {scale}")));
        }
        Ok(Self { center, scale })
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }
}

impl Loss for Quadratic {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn value(&self, phi: &[f64], _: &Batch) -> f64 {
        let s2 = self.scale * self.scale;
        phi.iter()
            .zip(&self.center)
            .map(|(x, c)| (x - c) * (x - c))
            .sum::<f64>()
            / (2.0 * s2)
    }

    fn value_grad(&self, phi: &[f64], batch: &Batch) -> (f64, Vec<f64>) {
        let s2 = self.scale * self.scale;
        let grad = phi.iter().zip(&self.center).map(|(x, c)| (x - c) / s2).collect();
        (self.value(phi, batch), grad)
    }
}

/// Shifted Rastrigin-type multimodal benchmark:
/// `V(x) = (1/n) Σᵢ [(xᵢ − Bᵢ)² − 10 cos(2π(xᵢ − Bᵢ)) + 10]`.
///
/// Global minimum `V(B) = 0`, local minima near integer offsets from `B`.
#[derive(Clone, Debug, PartialEq)]
pub struct Carrillo {
    shift: Vec<f64>,
}

impl Carrillo {
    pub fn new(shift: Vec<f64>) -> Result<Self> {
        if shift.is_empty() {
            return Err(Error::invalid("carrillo needs dim >= 1"));
        }
        Ok(Self { shift })
    }

    pub fn centered(dim: usize) -> Result<Self> {
        Self::new(vec![0.0; dim])
    }

    pub fn shift(&self) -> &[f64] {
        &self.shift
    }
}

/// Direct evaluation with dimension checking.
pub fn carrillo(dim: usize, shift: &[f64], x: &[f64]) -> Result<f64> {
    if dim == 0 || shift.len() != dim || x.len() != dim {
        return Err(Error::invalid(format!(
            "carrillo dimension mismatch: dim={dim}, len(shift)={}, len(x)={}",
            shift.len(),
            x.len()
        )));
    }
    Ok(carrillo_value(shift, x))
}

fn carrillo_value(shift: &[f64], x: &[f64]) -> f64 {
    let n = x.len() as f64;
    x.iter()
        .zip(shift)
        .map(|(xi, bi)| {
            let d = xi - bi;
            d * d - 10.0 * (2.0 * PI * d).cos() + 10.0
        })
        .sum::<f64>()
        / n
}

impl Loss for Carrillo {
    fn dim(&self) -> usize {
        self.shift.len()
    }

    fn value(&self, phi: &[f64], _: &Batch) -> f64 {
        carrillo_value(&self.shift, phi)
    }

    fn value_grad(&self, phi: &[f64], batch: &Batch) -> (f64, Vec<f64>) {
        let n = phi.len() as f64;
        let grad = phi
            .iter()
            .zip(&self.shift)
            .map(|(xi, bi)| {
                let d = xi - bi;
                (2.0 * d + 20.0 * PI * (2.0 * PI * d).sin()) / n
            })
            .collect();
        (self.value(phi, batch), grad)
    }
}

type ValueGradFn = dyn Fn(&[f64]) -> (f64, Vec<f64>) + Send + Sync;

/// Loss from a closure returning value and gradient.
pub struct FnLoss {
    dim: usize,
    f: Box<ValueGradFn>,
}

impl FnLoss {
    pub fn new(dim: usize, f: impl Fn(&[f64]) -> (f64, Vec<f64>) + Send + Sync + 'static) -> Self {
        Self { dim, f: Box::new(f) }
    }
}

impl fmt::Debug for FnLoss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnLoss").field("dim", &self.dim).finish_non_exhaustive()
    }
}

impl Loss for FnLoss {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, phi: &[f64], _: &Batch) -> f64 {
        (self.f)(phi).0
    }

    fn value_grad(&self, phi: &[f64], _: &Batch) -> (f64, Vec<f64>) {
        (self.f)(phi)
    }
}
