use std::fmt;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// The set of training rows a loss is evaluated on.
#[derive(Clone, Debug, PartialEq)]
pub enum Batch {
    /// Every training row (and the only batch analytic losses know about).
    Full,
    Rows { index: usize, rows: Arc<[usize]> },
}

impl Batch {
    pub fn index(&self) -> usize {
        match self {
            Batch::Full => 0,
            Batch::Rows { index, .. } => *index,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BatchMode {
    Full,
    /// `size` rows per batch, each batch reused for `laps` consecutive evaluations.
    Minibatch { size: usize, laps: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ObjectiveKind {
    Analytic,
    ModelOnDataset,
}

/// A parameters-to-loss function `V: ℝⁿ → ℝ`.
///
/// Implementations are immutable; batching state lives in [`EvalContext`].
pub trait Loss: Send + Sync {
    fn dim(&self) -> usize;

    /// Number of training rows available for mini-batching (0 when not data-driven).
    fn train_len(&self) -> usize {
        0
    }

    fn value(&self, phi: &[f64], batch: &Batch) -> f64;

    fn value_grad(&self, phi: &[f64], batch: &Batch) -> (f64, Vec<f64>);

    fn validation_loss(&self, phi: &[f64]) -> f64 {
        self.value(phi, &Batch::Full)
    }

    fn test_loss(&self, phi: &[f64]) -> f64 {
        self.value(phi, &Batch::Full)
    }

    /// Accuracy for classification tasks, raw loss otherwise.
    fn test_metric(&self, phi: &[f64]) -> f64 {
        self.test_loss(phi)
    }

    fn kind(&self) -> ObjectiveKind {
        ObjectiveKind::Analytic
    }
}

/// A shareable handle to a [`Loss`] together with its batching policy.
#[derive(Clone)]
pub struct Objective {
    loss: Arc<dyn Loss>,
    batch_mode: BatchMode,
}

impl fmt::Debug for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Objective")
            .field("dim", &self.dim())
            .field("kind", &self.kind())
            .field("batch_mode", &self.batch_mode)
            .finish()
    }
}

impl Objective {
    pub fn new(loss: impl Loss + 'static) -> Self {
        Self::from_arc(Arc::new(loss))
    }

    pub fn from_arc(loss: Arc<dyn Loss>) -> Self {
        Self {
            loss,
            batch_mode: BatchMode::Full,
        }
    }

    /// Switches to mini-batch evaluation. Analytic losses have no rows to
    /// batch over and stay in full mode.
    pub fn with_batch_mode(mut self, mode: BatchMode) -> Result<Self> {
        if let BatchMode::Minibatch { size, laps } = mode {
            if size == 0 || laps == 0 {
                return Err(Error::invalid(format!(
                    "mini-batch size and laps must be positive (got size={size}, laps={laps})"
                )));
            }
            if self.loss.train_len() == 0 {
                return Ok(self);
            }
        }
        self.batch_mode = mode;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.loss.dim()
    }

    pub fn kind(&self) -> ObjectiveKind {
        self.loss.kind()
    }

    pub fn batch_mode(&self) -> BatchMode {
        self.batch_mode
    }

    pub fn loss(&self) -> &Arc<dyn Loss> {
        &self.loss
    }

    fn check_dim(&self, phi: &[f64]) -> Result<()> {
        if phi.len() != self.dim() {
            return Err(Error::invalid(format!(
                "objective expects {} parameters, got {}",
                self.dim(),
                phi.len()
            )));
        }
        Ok(())
    }

    pub fn value(&self, phi: &[f64], batch: &Batch) -> Result<f64> {
        self.check_dim(phi)?;
        Ok(self.loss.value(phi, batch))
    }

    pub fn value_grad(&self, phi: &[f64], batch: &Batch) -> Result<(f64, Vec<f64>)> {
        self.check_dim(phi)?;
        Ok(self.loss.value_grad(phi, batch))
    }

    pub fn validation_loss(&self, phi: &[f64]) -> Result<f64> {
        self.check_dim(phi)?;
        Ok(self.loss.validation_loss(phi))
    }

    pub fn test_loss(&self, phi: &[f64]) -> Result<f64> {
        self.check_dim(phi)?;
        Ok(self.loss.test_loss(phi))
    }

    pub fn test_metric(&self, phi: &[f64]) -> Result<f64> {
        self.check_dim(phi)?;
        Ok(self.loss.test_metric(phi))
    }

    /// Fresh evaluation context; batch selection is keyed by `seed`.
    pub fn context(&self, seed: u64) -> EvalContext {
        EvalContext {
            objective: self.clone(),
            seed,
            evaluations: 0,
            current: None,
        }
    }
}

/// Per-run batch cursor. One context belongs to exactly one worker.
#[derive(Debug)]
pub struct EvalContext {
    objective: Objective,
    seed: u64,
    evaluations: usize,
    current: Option<Batch>,
}

impl EvalContext {
    pub fn objective(&self) -> &Objective {
        &self.objective
    }

    /// Batch for the next evaluation. The k-th call (0-based) uses batch
    /// index `k / laps`, so each batch serves `laps` consecutive calls.
    pub fn next_batch(&mut self) -> Batch {
        let k = self.evaluations;
        self.evaluations += 1;
        let (size, laps) = match self.objective.batch_mode {
            BatchMode::Full => return Batch::Full,
            BatchMode::Minibatch { size, laps } => (size, laps),
        };
        let index = k / laps;
        if let Some(b) = &self.current {
            if b.index() == index {
                return b.clone();
            }
        }
        let batch = batch_rows(self.objective.loss.train_len(), size, self.seed, index);
        self.current = Some(batch.clone());
        batch
    }

    pub fn evaluations(&self) -> usize {
        self.evaluations
    }

    /// Number of distinct batches handed out so far.
    pub fn distinct_batches(&self) -> usize {
        match self.objective.batch_mode {
            BatchMode::Full => usize::from(self.evaluations > 0),
            BatchMode::Minibatch { laps, .. } => self.evaluations.div_ceil(laps),
        }
    }
}

/// Rows of batch `index`: the training rows are shuffled once per epoch
/// (keyed by seed and epoch) and cut into consecutive chunks.
fn batch_rows(train_len: usize, size: usize, seed: u64, index: usize) -> Batch {
    let size = size.min(train_len).max(1);
    let per_epoch = train_len.div_ceil(size);
    let epoch = index / per_epoch;
    let pos = index % per_epoch;
    let mut order: Vec<usize> = (0..train_len).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6261_7463_6821_u64);
    rng.set_stream(epoch as u64);
    order.shuffle(&mut rng);
    let end = ((pos + 1) * size).min(train_len);
    Batch::Rows {
        index,
        rows: order[pos * size..end].into(),
    }
}
