use std::sync::Arc;

use super::dataset::Dataset;
use super::objective::{Batch, BatchMode, Loss, Objective, ObjectiveKind};
use crate::{Error, Result};

/// Hidden-layer activation. The output layer is always sigmoid (one output,
/// BCE) or softmax (several outputs, cross-entropy).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Relu,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LossKind {
    Bce,
    CrossEntropy,
}

const BCE_CLAMP: f64 = 1e-7;

/// A small fully connected classifier whose flat parameter vector is the
/// optimisation variable. Layout per layer: weights row-major `(out, in)`,
/// then the `out` biases.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TargetModel {
    widths: Vec<usize>,
    activation: Activation,
}

impl TargetModel {
    pub fn new(widths: Vec<usize>, activation: Activation) -> Result<Self> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(Error::invalid(format!(
                "model widths need >= 2 positive entries, got {widths:?}"
            )));
        }
        Ok(Self { widths, activation })
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn input_width(&self) -> usize {
        self.widths[0]
    }

    pub fn output_width(&self) -> usize {
        *self.widths.last().unwrap()
    }

    pub fn param_count(&self) -> usize {
        self.widths.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    /// Splits a flat parameter vector into per-layer `(weights, biases)`.
    pub fn unflatten(&self, phi: &[f64]) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
        if phi.len() != self.param_count() {
            return Err(Error::invalid(format!(
                "model has {} parameters, got {}",
                self.param_count(),
                phi.len()
            )));
        }
        let mut off = 0;
        Ok(self
            .widths
            .windows(2)
            .map(|w| {
                let (i, o) = (w[0], w[1]);
                let weights = phi[off..off + i * o].to_vec();
                let biases = phi[off + i * o..off + i * o + o].to_vec();
                off += i * o + o;
                (weights, biases)
            })
            .collect())
    }

    pub fn flatten(layers: &[(Vec<f64>, Vec<f64>)]) -> Vec<f64> {
        layers.iter().flat_map(|(w, b)| w.iter().chain(b).copied()).collect()
    }

    fn hidden(&self, z: f64) -> f64 {
        match self.activation {
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
        }
    }

    fn hidden_deriv(&self, activated: f64) -> f64 {
        match self.activation {
            Activation::Tanh => 1.0 - activated * activated,
            Activation::Relu => f64::from(u8::from(activated > 0.0)),
        }
    }

    /// Layer activations for one input; the last entry holds output logits.
    fn forward_all(&self, phi: &[f64], input: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = vec![input.to_vec()];
        let mut off = 0;
        let layers = self.widths.len() - 1;
        for (l, w) in self.widths.windows(2).enumerate() {
            let (ni, no) = (w[0], w[1]);
            let weights = &phi[off..off + ni * no];
            let biases = &phi[off + ni * no..off + ni * no + no];
            off += ni * no + no;
            let prev = acts.last().unwrap();
            let out: Vec<f64> = (0..no)
                .map(|o| {
                    let z = biases[o] + dot(&weights[o * ni..(o + 1) * ni], prev);
                    if l + 1 < layers {
                        self.hidden(z)
                    } else {
                        z
                    }
                })
                .collect();
            acts.push(out);
        }
        acts
    }

    /// Output logits for one input row.
    pub fn logits(&self, phi: &[f64], input: &[f64]) -> Vec<f64> {
        self.forward_all(phi, input).pop().unwrap()
    }

    /// Per-example loss and its gradient w.r.t. the logits.
    fn loss_on_logits(kind: LossKind, logits: &[f64], label: usize) -> (f64, Vec<f64>) {
        match kind {
            LossKind::Bce => {
                let z = logits[0];
                let p = sigmoid(z);
                let pc = p.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
                let y = label as f64;
                let loss = -(y * pc.ln() + (1.0 - y) * (1.0 - pc).ln());
                // clamped region has zero gradient
                let dz = if p == pc { p - y } else { 0.0 };
                (loss, vec![dz])
            }
            LossKind::CrossEntropy => {
                let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lse = m + logits.iter().map(|z| (z - m).exp()).sum::<f64>().ln();
                let grad = logits
                    .iter()
                    .enumerate()
                    .map(|(k, z)| (z - lse).exp() - f64::from(u8::from(k == label)))
                    .collect();
                (lse - logits[label], grad)
            }
        }
    }

    fn predict(kind: LossKind, logits: &[f64]) -> usize {
        match kind {
            LossKind::Bce => usize::from(logits[0] > 0.0),
            LossKind::CrossEntropy => logits
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .map_or(0, |(k, _)| k),
        }
    }

    /// Mean loss over `rows` and, when `with_grad`, its gradient by backpropagation.
    fn mean_loss(
        &self,
        phi: &[f64],
        data: &Dataset,
        rows: &[usize],
        kind: LossKind,
        with_grad: bool,
    ) -> (f64, Vec<f64>) {
        let mut total = 0.0;
        let mut grad = if with_grad { vec![0.0; phi.len()] } else { Vec::new() };
        for &r in rows {
            let acts = self.forward_all(phi, data.row(r));
            let (loss, dlogits) = Self::loss_on_logits(kind, acts.last().unwrap(), data.label(r));
            total += loss;
            if with_grad {
                self.backprop(phi, &acts, dlogits, &mut grad);
            }
        }
        let n = rows.len().max(1) as f64;
        grad.iter_mut().for_each(|g| *g /= n);
        (total / n, grad)
    }

    fn backprop(&self, phi: &[f64], acts: &[Vec<f64>], mut delta: Vec<f64>, grad: &mut [f64]) {
        let offsets: Vec<usize> = self
            .widths
            .windows(2)
            .scan(0, |off, w| {
                let start = *off;
                *off += w[0] * w[1] + w[1];
                Some(start)
            })
            .collect();
        for l in (0..self.widths.len() - 1).rev() {
            let (ni, no) = (self.widths[l], self.widths[l + 1]);
            let off = offsets[l];
            let input = &acts[l];
            for o in 0..no {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                for i in 0..ni {
                    grad[off + o * ni + i] += d * input[i];
                }
                grad[off + ni * no + o] += d;
            }
            if l > 0 {
                let weights = &phi[off..off + ni * no];
                delta = (0..ni)
                    .map(|i| {
                        let back: f64 = (0..no).map(|o| weights[o * ni + i] * delta[o]).sum();
                        back * self.hidden_deriv(input[i])
                    })
                    .collect();
            }
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Mean classification loss of a [`TargetModel`] on a [`Dataset`].
///
/// Training batches index into the train split; validation and test losses
/// use their own splits (falling back to the train split when empty).
#[derive(Debug)]
pub struct ModelLoss {
    model: TargetModel,
    data: Arc<Dataset>,
    kind: LossKind,
}

impl ModelLoss {
    pub fn new(model: TargetModel, data: Dataset, kind: LossKind) -> Result<Self> {
        if model.input_width() != data.cols() {
            return Err(Error::invalid(format!(
                "model input width {} does not match {} dataset features",
                model.input_width(),
                data.cols()
            )));
        }
        let out = model.output_width();
        match kind {
            LossKind::Bce if out != 1 => {
                return Err(Error::invalid("BCE needs a single sigmoid output"));
            }
            LossKind::CrossEntropy if out < data.num_classes() => {
                return Err(Error::invalid(format!(
                    "cross-entropy needs {} outputs, model has {out}",
                    data.num_classes()
                )));
            }
            _ => {}
        }
        Ok(Self {
            model,
            data: Arc::new(data),
            kind,
        })
    }

    pub fn model(&self) -> &TargetModel {
        &self.model
    }

    pub fn dataset(&self) -> &Dataset {
        &self.data
    }

    fn rows<'a>(&'a self, batch: &'a Batch) -> &'a [usize] {
        match batch {
            Batch::Full => &self.data.split().train,
            Batch::Rows { rows, .. } => rows,
        }
    }

    fn split_or_train<'a>(&'a self, rows: &'a [usize]) -> &'a [usize] {
        if rows.is_empty() {
            &self.data.split().train
        } else {
            rows
        }
    }

    pub fn accuracy(&self, phi: &[f64], rows: &[usize]) -> f64 {
        let correct = rows
            .iter()
            .filter(|&&r| {
                let logits = self.model.logits(phi, self.data.row(r));
                TargetModel::predict(self.kind, &logits) == self.data.label(r)
            })
            .count();
        correct as f64 / rows.len().max(1) as f64
    }

    pub fn train_accuracy(&self, phi: &[f64]) -> f64 {
        self.accuracy(phi, &self.data.split().train)
    }
}

impl Loss for ModelLoss {
    fn dim(&self) -> usize {
        self.model.param_count()
    }

    fn train_len(&self) -> usize {
        self.data.split().train.len()
    }

    fn value(&self, phi: &[f64], batch: &Batch) -> f64 {
        let rows = self.rows(batch);
        self.model.mean_loss(phi, &self.data, rows, self.kind, false).0
    }

    fn value_grad(&self, phi: &[f64], batch: &Batch) -> (f64, Vec<f64>) {
        let rows = self.rows(batch);
        self.model.mean_loss(phi, &self.data, rows, self.kind, true)
    }

    fn validation_loss(&self, phi: &[f64]) -> f64 {
        let rows = self.split_or_train(&self.data.split().val);
        self.model.mean_loss(phi, &self.data, rows, self.kind, false).0
    }

    fn test_loss(&self, phi: &[f64]) -> f64 {
        let rows = self.split_or_train(&self.data.split().test);
        self.model.mean_loss(phi, &self.data, rows, self.kind, false).0
    }

    fn test_metric(&self, phi: &[f64]) -> f64 {
        self.accuracy(phi, self.split_or_train(&self.data.split().test))
    }

    fn kind(&self) -> ObjectiveKind {
        ObjectiveKind::ModelOnDataset
    }
}

/// Objective whose parameters are the flattened weights of `model`.
pub fn model_objective(
    model: &TargetModel,
    dataset: Dataset,
    loss: LossKind,
    batch_mode: BatchMode,
) -> Result<Objective> {
    Objective::new(ModelLoss::new(model.clone(), dataset, loss)?).with_batch_mode(batch_mode)
}
