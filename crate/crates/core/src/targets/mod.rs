//! Optimisation objectives and their Boltzmann transformation.
//!
//! An [`Objective`] maps a parameter vector `φ` to a scalar loss `V(φ)` and
//! its gradient. Analytic test functions ignore batching; classifier losses
//! over a [`Dataset`] evaluate on whichever [`Batch`] an [`EvalContext`]
//! hands out.

mod analytic;
mod boltzmann;
mod dataset;
mod model;
mod objective;

pub use analytic::{carrillo, Carrillo, FnLoss, Quadratic};
pub use boltzmann::{boltzmann, BoltzmannTarget};
pub use dataset::{make_circles, make_moons, Dataset, Split, SplitFractions};
pub use model::{model_objective, Activation, LossKind, ModelLoss, TargetModel};
pub use objective::{Batch, BatchMode, EvalContext, Loss, Objective, ObjectiveKind};
