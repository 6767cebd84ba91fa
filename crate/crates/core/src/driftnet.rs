//! Time-conditioned drift networks and the Adam optimiser over their weights.
//!
//! A [`DriftNet`] maps `(x, t)` to a drift in `ℝⁿ`. The input is `x`
//! concatenated with a fixed Fourier embedding of `t`; the output layer is
//! zero-initialised so an untrained net is the zero drift (pure Wiener
//! process). The score-guided variant adds `g(t) ⊙ score(x)` where `g` is a
//! linear gate on the embedding, also zero-initialised.
//!
//! The same weights can be evaluated in plain `f64` ([`DriftNet::forward`])
//! or recorded on a [`Tape`] for backpropagation through a whole simulated
//! path ([`DriftNet::bind`], [`DriftNet::forward_tape`]).

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::ensure_finite;
use crate::gradtape::{Tape, Tensor, Var};
use crate::targets::{Activation, Batch, BoltzmannTarget};
use crate::{Error, Result};

pub const DEFAULT_FREQUENCIES: usize = 8;
pub const DEFAULT_WIDTHS: [usize; 2] = [64, 64];

/// `t ↦ [sin 2πkt, cos 2πkt]` for `k = 1..=F`, interleaved per frequency.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FourierTimeEmbedding {
    frequencies: usize,
}

impl FourierTimeEmbedding {
    pub fn new(frequencies: usize) -> Result<Self> {
        if frequencies == 0 {
            return Err(Error::invalid("Fourier embedding needs at least one frequency"));
        }
        Ok(Self { frequencies })
    }

    pub fn frequencies(&self) -> usize {
        self.frequencies
    }

    pub fn dim(&self) -> usize {
        2 * self.frequencies
    }

    pub fn embed(&self, t: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dim());
        for k in 1..=self.frequencies {
            let a = 2.0 * PI * k as f64 * t;
            out.push(a.sin());
            out.push(a.cos());
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    /// Plain network on `[x ‖ embedding(t)]`.
    Nn,
    /// Network plus a gated target score.
    Grad,
}

impl Variant {
    pub fn name(&self) -> &'static str {
        match self {
            Variant::Nn => "nn",
            Variant::Grad => "grad",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "nn" => Ok(Variant::Nn),
            "grad" => Ok(Variant::Grad),
            other => Err(Error::Config(format!("unknown drift variant '{other}' (expected nn or grad)"))),
        }
    }
}

/// Exact number of entries of θ.
pub fn param_count(widths: &[usize], n: usize, frequencies: usize, variant: Variant) -> Result<usize> {
    if widths.is_empty() || widths.contains(&0) {
        return Err(Error::invalid(format!("hidden widths must be non-empty and positive, got {widths:?}")));
    }
    if n == 0 || frequencies == 0 {
        return Err(Error::invalid("drift net needs n >= 1 and at least one frequency"));
    }
    let mut dims = vec![n + 2 * frequencies];
    dims.extend_from_slice(widths);
    dims.push(n);
    let mlp: usize = dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
    let gate = match variant {
        Variant::Nn => 0,
        Variant::Grad => 2 * frequencies * n + n,
    };
    Ok(mlp + gate)
}

/// Static shape of a drift network.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DriftNetSpec {
    pub n: usize,
    pub widths: Vec<usize>,
    pub frequencies: usize,
    pub variant: Variant,
    pub activation: Activation,
}

impl DriftNetSpec {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            widths: DEFAULT_WIDTHS.to_vec(),
            frequencies: DEFAULT_FREQUENCIES,
            variant: Variant::Nn,
            activation: Activation::Relu,
        }
    }

    pub fn widths(mut self, widths: Vec<usize>) -> Self {
        self.widths = widths;
        self
    }

    pub fn frequencies(mut self, f: usize) -> Self {
        self.frequencies = f;
        self
    }

    pub fn variant(mut self, v: Variant) -> Self {
        self.variant = v;
        self
    }

    pub fn activation(mut self, a: Activation) -> Self {
        self.activation = a;
        self
    }

    pub fn param_count(&self) -> Result<usize> {
        param_count(&self.widths, self.n, self.frequencies, self.variant)
    }

    /// Layer sizes from input to output.
    fn dims(&self) -> Vec<usize> {
        let mut dims = vec![self.n + 2 * self.frequencies];
        dims.extend_from_slice(&self.widths);
        dims.push(self.n);
        dims
    }
}

/// A drift network together with its flat parameter vector θ.
#[derive(Clone, Debug, PartialEq)]
pub struct DriftNet {
    spec: DriftNetSpec,
    embedding: FourierTimeEmbedding,
    theta: Vec<f64>,
}

/// Parameter views of one net recorded on a tape.
#[derive(Clone, Debug)]
pub struct TapeNet {
    theta: Var,
    layers: Vec<(Var, Var)>,
    gate: Option<(Var, Var)>,
}

impl TapeNet {
    /// The leaf holding θ; its gradient is `∂loss/∂θ`.
    pub fn theta(&self) -> Var {
        self.theta
    }
}

impl DriftNet {
    /// Glorot-uniform hidden layers from `seed`; output layer and gate zero.
    pub fn new(spec: DriftNetSpec, seed: u64) -> Result<Self> {
        let count = spec.param_count()?;
        let embedding = FourierTimeEmbedding::new(spec.frequencies)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dims = spec.dims();
        let mut theta = Vec::with_capacity(count);
        let last = dims.len() - 2;
        for (l, w) in dims.windows(2).enumerate() {
            let (fan_in, fan_out) = (w[0], w[1]);
            if l == last {
                theta.extend(std::iter::repeat_n(0.0, fan_in * fan_out));
            } else {
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                theta.extend((0..fan_in * fan_out).map(|_| rng.random_range(-limit..limit)));
            }
            theta.extend(std::iter::repeat_n(0.0, fan_out));
        }
        theta.resize(count, 0.0);
        Ok(Self { spec, embedding, theta })
    }

    /// Wraps an explicit θ.
    pub fn from_theta(spec: DriftNetSpec, theta: Vec<f64>) -> Result<Self> {
        let count = spec.param_count()?;
        if theta.len() != count {
            return Err(Error::invalid(format!("drift net expects {count} parameters, got {}", theta.len())));
        }
        ensure_finite(&theta, || "drift net parameters".into())?;
        let embedding = FourierTimeEmbedding::new(spec.frequencies)?;
        Ok(Self { spec, embedding, theta })
    }

    pub fn spec(&self) -> &DriftNetSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.spec.n
    }

    pub fn variant(&self) -> Variant {
        self.spec.variant
    }

    pub fn embedding(&self) -> FourierTimeEmbedding {
        self.embedding
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn theta_mut(&mut self) -> &mut [f64] {
        &mut self.theta
    }

    pub fn param_count(&self) -> usize {
        self.theta.len()
    }

    /// Offset of the gate head inside θ (grad variant).
    fn gate_offset(&self) -> usize {
        self.spec.dims().windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    /// Sets the gate to the constant `value` on every coordinate.
    pub fn set_constant_gate(&mut self, value: f64) -> Result<()> {
        if self.spec.variant != Variant::Grad {
            return Err(Error::invalid("only the grad variant has a gate"));
        }
        let off = self.gate_offset();
        let (n, e) = (self.spec.n, self.embedding.dim());
        self.theta[off..off + n * e].iter_mut().for_each(|w| *w = 0.0);
        self.theta[off + n * e..].iter_mut().for_each(|b| *b = value);
        Ok(())
    }

    fn act(&self, z: f64) -> f64 {
        match self.spec.activation {
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
        }
    }

    fn check_input(&self, x: &[f64], t: f64) -> Result<()> {
        if x.len() != self.spec.n {
            return Err(Error::invalid(format!("drift net expects x of length {}, got {}", self.spec.n, x.len())));
        }
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::invalid(format!("drift time must lie in [0, 1], got {t}")));
        }
        Ok(())
    }

    /// The network part `MLP([x ‖ embedding(t)])`.
    fn mlp(&self, x: &[f64], emb: &[f64]) -> Vec<f64> {
        let mut h: Vec<f64> = x.iter().chain(emb).copied().collect();
        let dims = self.spec.dims();
        let layers = dims.len() - 1;
        let mut off = 0;
        for (l, w) in dims.windows(2).enumerate() {
            let (ni, no) = (w[0], w[1]);
            let weights = &self.theta[off..off + ni * no];
            let biases = &self.theta[off + ni * no..off + ni * no + no];
            off += ni * no + no;
            h = (0..no)
                .map(|o| {
                    let z = biases[o] + weights[o * ni..(o + 1) * ni].iter().zip(&h).map(|(a, b)| a * b).sum::<f64>();
                    if l + 1 < layers {
                        self.act(z)
                    } else {
                        z
                    }
                })
                .collect();
        }
        h
    }

    /// Drift `b̂_θ(x, t)`. The grad variant requires `score = −∇V(x)/σ`;
    /// the plain variant ignores it.
    pub fn forward(&self, x: &[f64], t: f64, score: Option<&[f64]>) -> Result<Vec<f64>> {
        self.check_input(x, t)?;
        let emb = self.embedding.embed(t);
        let mut out = self.mlp(x, &emb);
        if self.spec.variant == Variant::Grad {
            let score = self.checked_score(score)?;
            let gate = self.gate(&emb);
            for k in 0..self.spec.n {
                out[k] += gate[k] * score[k];
            }
        }
        Ok(out)
    }

    /// Forward with the score taken from `target` when the variant needs it.
    pub fn drift(&self, target: &BoltzmannTarget, batch: &Batch, x: &[f64], t: f64) -> Result<Vec<f64>> {
        match self.spec.variant {
            Variant::Nn => self.forward(x, t, None),
            Variant::Grad => {
                let score = target.score(x, batch)?;
                self.forward(x, t, Some(&score))
            }
        }
    }

    fn checked_score<'a>(&self, score: Option<&'a [f64]>) -> Result<&'a [f64]> {
        let score = score.ok_or_else(|| Error::invalid("grad variant needs the target score"))?;
        if score.len() != self.spec.n {
            return Err(Error::invalid(format!("score has length {}, expected {}", score.len(), self.spec.n)));
        }
        ensure_finite(score, || "target score".into())?;
        Ok(score)
    }

    fn gate(&self, emb: &[f64]) -> Vec<f64> {
        let off = self.gate_offset();
        let (n, e) = (self.spec.n, emb.len());
        let w = &self.theta[off..off + n * e];
        let b = &self.theta[off + n * e..off + n * e + n];
        (0..n)
            .map(|k| b[k] + w[k * e..(k + 1) * e].iter().zip(emb).map(|(a, c)| a * c).sum::<f64>())
            .collect()
    }

    /// Records θ as a leaf on `tape` and slices it into per-layer views.
    pub fn bind(&self, tape: &mut Tape) -> Result<TapeNet> {
        let theta = tape.leaf(Tensor::vector(self.theta.clone()));
        let dims = self.spec.dims();
        let mut off = 0;
        let mut layers = Vec::with_capacity(dims.len() - 1);
        for w in dims.windows(2) {
            let (ni, no) = (w[0], w[1]);
            let flat = tape.slice(theta, off, ni * no)?;
            let weights = tape.reshape(flat, &[no, ni])?;
            let biases = tape.slice(theta, off + ni * no, no)?;
            off += ni * no + no;
            layers.push((weights, biases));
        }
        let gate = match self.spec.variant {
            Variant::Nn => None,
            Variant::Grad => {
                let (n, e) = (self.spec.n, self.embedding.dim());
                let flat = tape.slice(theta, off, n * e)?;
                let weights = tape.reshape(flat, &[n, e])?;
                let biases = tape.slice(theta, off + n * e, n)?;
                Some((weights, biases))
            }
        };
        Ok(TapeNet { theta, layers, gate })
    }

    /// Tape version of [`DriftNet::forward`]. The score enters as a constant.
    pub fn forward_tape(&self, tape: &mut Tape, net: &TapeNet, x: Var, t: f64, score: Option<&[f64]>) -> Result<Var> {
        if tape.value(x).len() != self.spec.n {
            return Err(Error::invalid("drift net input has the wrong length"));
        }
        let emb = tape.constant(Tensor::vector(self.embedding.embed(t)));
        let mut h = tape.concat(&[x, emb])?;
        let last = net.layers.len() - 1;
        for (l, &(w, b)) in net.layers.iter().enumerate() {
            let z = tape.matmul(w, h)?;
            let z = tape.broadcast_add(z, b)?;
            h = if l < last {
                match self.spec.activation {
                    Activation::Tanh => tape.tanh(z),
                    Activation::Relu => tape.relu(z),
                }
            } else {
                z
            };
        }
        if let Some((gw, gb)) = net.gate {
            let score = self.checked_score(score)?;
            let g = tape.matmul(gw, emb)?;
            let g = tape.broadcast_add(g, gb)?;
            let s = tape.constant(Tensor::vector(score.to_vec()));
            let gs = tape.mul(g, s)?;
            h = tape.add(h, gs)?;
        }
        Ok(h)
    }

    /// Writes a plain-text header followed by one θ entry per line.
    pub fn save(&self, path: &Path, sigma: f64) -> Result<()> {
        let mut out = String::new();
        let widths: Vec<String> = self.spec.widths.iter().map(usize::to_string).collect();
        let activation = match self.spec.activation {
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
        };
        writeln!(out, "# sfopt drift net").unwrap();
        writeln!(out, "n = {}", self.spec.n).unwrap();
        writeln!(out, "widths = {}", widths.join(",")).unwrap();
        writeln!(out, "frequencies = {}", self.spec.frequencies).unwrap();
        writeln!(out, "variant = {}", self.spec.variant.name()).unwrap();
        writeln!(out, "activation = {activation}").unwrap();
        writeln!(out, "sigma = {sigma}").unwrap();
        writeln!(out, "theta = {}", self.theta.len()).unwrap();
        for v in &self.theta {
            writeln!(out, "{v}").unwrap();
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    /// Reads a checkpoint written by [`DriftNet::save`]; returns the net and
    /// the σ recorded at save time.
    pub fn load(path: &Path) -> Result<(Self, f64)> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let bad = |detail: String| Error::Format {
            path: path.to_path_buf(),
            detail,
        };
        let mut lines = text.lines().filter(|l| !l.starts_with('#'));
        let mut header = std::collections::HashMap::new();
        for line in lines.by_ref() {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| bad(format!("expected 'key = value', got '{line}'")))?;
            let (k, v) = (k.trim().to_string(), v.trim().to_string());
            let done = k == "theta";
            header.insert(k, v);
            if done {
                break;
            }
        }
        let get = |k: &str| header.get(k).ok_or_else(|| bad(format!("missing header key '{k}'")));
        let num = |k: &str| -> Result<usize> { get(k)?.parse().map_err(|_| bad(format!("bad integer for '{k}'"))) };
        let widths = get("widths")?
            .split(',')
            .map(|w| w.trim().parse::<usize>().map_err(|_| bad(format!("bad width '{w}'"))))
            .collect::<Result<Vec<_>>>()?;
        let activation = match get("activation")?.as_str() {
            "tanh" => Activation::Tanh,
            "relu" => Activation::Relu,
            other => return Err(bad(format!("unknown activation '{other}'"))),
        };
        let spec = DriftNetSpec {
            n: num("n")?,
            widths,
            frequencies: num("frequencies")?,
            variant: Variant::parse(get("variant")?).map_err(|e| bad(e.to_string()))?,
            activation,
        };
        let sigma: f64 = get("sigma")?.parse().map_err(|_| bad("bad sigma".into()))?;
        let count = num("theta")?;
        let theta = lines
            .map(|l| l.trim().parse::<f64>().map_err(|_| bad(format!("bad parameter '{l}'"))))
            .collect::<Result<Vec<_>>>()?;
        if theta.len() != count {
            return Err(bad(format!("header announces {count} parameters, found {}", theta.len())));
        }
        Ok((Self::from_theta(spec, theta)?, sigma))
    }
}

/// Bias-corrected Adam with optional global-norm clipping.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub lr: f64,
}

impl AdamState {
    pub fn new(len: usize, lr: f64) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            lr,
        }
    }

    pub fn with_betas(mut self, beta1: f64, beta2: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) {
            return Err(Error::invalid(format!("Adam betas must lie in [0, 1), got {beta1}, {beta2}")));
        }
        self.beta1 = beta1;
        self.beta2 = beta2;
        Ok(self)
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self) -> &[f64] {
        &self.m
    }

    pub fn second_moment(&self) -> &[f64] {
        &self.v
    }

    /// Updates `theta` in place and returns the gradient norm before clipping.
    pub fn step(&mut self, theta: &mut [f64], grad: &[f64], clip_norm: Option<f64>) -> Result<f64> {
        if theta.len() != self.m.len() || grad.len() != self.m.len() {
            return Err(Error::invalid(format!(
                "Adam state has {} entries, got theta {} and grad {}",
                self.m.len(),
                theta.len(),
                grad.len()
            )));
        }
        ensure_finite(grad, || "Adam gradient".into())?;
        let norm = global_norm(grad);
        let scale = match clip_norm {
            Some(c) if c > 0.0 && norm > c => c / norm,
            _ => 1.0,
        };
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for i in 0..theta.len() {
            let g = grad[i] * scale;
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            theta[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(norm)
    }
}

pub fn global_norm(v: &[f64]) -> f64 {
    v.iter().map(|g| g * g).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    use super::*;
    use crate::targets::{boltzmann, Objective, Quadratic};
    use crate::testutil::{central_diff, rel_err};

    fn small_spec(variant: Variant) -> DriftNetSpec {
        DriftNetSpec::new(2)
            .widths(vec![6])
            .frequencies(3)
            .variant(variant)
            .activation(Activation::Tanh)
    }

    fn randomised(spec: DriftNetSpec, seed: u64) -> DriftNet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let count = spec.param_count().unwrap();
        let theta = (0..count).map(|_| rng.random_range(-0.8..0.8)).collect();
        DriftNet::from_theta(spec, theta).unwrap()
    }

    #[test]
    fn embedding_values() {
        let e = FourierTimeEmbedding::new(3).unwrap();
        assert_eq!(e.embed(0.0), vec![0.0, 1.0, 0.0, 1.0, 0.0, 1.0]);
        let quarter = e.embed(0.25);
        assert!((quarter[0] - 1.0).abs() < 1e-15 && quarter[1].abs() < 1e-15);
        assert!(FourierTimeEmbedding::new(0).is_err());
    }

    #[test]
    fn parameter_counts() {
        // input 2 + 8 = 10 → (10·32 + 32) + (32·2 + 2)
        assert_eq!(param_count(&[32], 2, 4, Variant::Nn).unwrap(), 418);
        assert_eq!(param_count(&[32], 2, 4, Variant::Grad).unwrap(), 418 + 8 * 2 + 2);
        assert!(param_count(&[], 2, 4, Variant::Nn).is_err());
        let net = DriftNet::new(DriftNetSpec::new(3), 0).unwrap();
        assert_eq!(net.param_count(), param_count(&DEFAULT_WIDTHS, 3, DEFAULT_FREQUENCIES, Variant::Nn).unwrap());
    }

    #[test]
    fn zero_initialised_net_is_zero_drift() {
        for variant in [Variant::Nn, Variant::Grad] {
            let net = DriftNet::new(DriftNetSpec::new(2).variant(variant), 5).unwrap();
            for i in 0..10 {
                let x = [i as f64 - 3.0, 0.5 * i as f64];
                let t = i as f64 / 10.0;
                let score = [1.0, -2.0];
                assert_eq!(net.forward(&x, t, Some(&score)).unwrap(), vec![0.0, 0.0]);
            }
        }
    }

    #[test]
    fn unit_gate_on_gaussian_target_gives_score() {
        let a = vec![1.5, -0.5];
        let target = boltzmann(Objective::new(Quadratic::new(a.clone())), 1.0).unwrap();
        let mut net = DriftNet::new(DriftNetSpec::new(2).variant(Variant::Grad), 1).unwrap();
        net.set_constant_gate(1.0).unwrap();
        for (x, t) in [([0.0, 0.0], 0.0), ([2.0, 1.0], 0.3), ([-1.0, 4.0], 0.9)] {
            let b = net.drift(&target, &Batch::Full, &x, t).unwrap();
            assert_eq!(b, vec![a[0] - x[0], a[1] - x[1]]);
        }
    }

    #[test]
    fn zero_gate_matches_plain_variant() {
        let nn = randomised(small_spec(Variant::Nn), 3);
        let mut theta = nn.theta().to_vec();
        theta.extend(std::iter::repeat_n(0.0, 3 * 2 * 2 + 2));
        let grad = DriftNet::from_theta(small_spec(Variant::Grad), theta).unwrap();
        for i in 0..10 {
            let x = [0.3 * i as f64, -0.1 * i as f64];
            let t = i as f64 / 9.0;
            assert_eq!(nn.forward(&x, t, None).unwrap(), grad.forward(&x, t, Some(&[7.0, -3.0])).unwrap());
        }
    }

    #[test]
    fn forward_errors() {
        let net = DriftNet::new(small_spec(Variant::Grad), 0).unwrap();
        assert!(net.forward(&[0.0], 0.5, Some(&[0.0, 0.0])).is_err());
        assert!(net.forward(&[0.0, 0.0], 1.5, Some(&[0.0, 0.0])).is_err());
        assert!(net.forward(&[0.0, 0.0], 0.5, None).is_err());
        assert!(matches!(
            net.forward(&[0.0, 0.0], 0.5, Some(&[f64::NAN, 0.0])),
            Err(Error::NumericFailure { .. })
        ));
    }

    #[test]
    fn tape_forward_matches_plain_forward() {
        for variant in [Variant::Nn, Variant::Grad] {
            let net = randomised(small_spec(variant).activation(Activation::Relu), 11);
            let mut tape = Tape::new();
            let bound = net.bind(&mut tape).unwrap();
            let x = [0.4, -1.2];
            let score = [0.5, 2.0];
            let xv = tape.constant(Tensor::vector(x.to_vec()));
            let out = net.forward_tape(&mut tape, &bound, xv, 0.37, Some(&score)).unwrap();
            let plain = net.forward(&x, 0.37, Some(&score)).unwrap();
            let taped = tape.value(out).data();
            for k in 0..2 {
                assert!((plain[k] - taped[k]).abs() <= 1e-14);
            }
        }
    }

    /// ∂(w·forward)/∂θ against central differences at 10 seeded (x, t).
    #[test]
    fn parameter_gradient_matches_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for variant in [Variant::Nn, Variant::Grad] {
            for _ in 0..10 {
                let net = randomised(small_spec(variant), rng.random());
                let x: Vec<f64> = (0..2).map(|_| rng.random_range(-2.0..2.0)).collect();
                let t: f64 = rng.random_range(0.0..1.0);
                let w = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
                let score = [0.7, -0.4];
                let mut tape = Tape::new();
                let bound = net.bind(&mut tape).unwrap();
                let xv = tape.constant(Tensor::vector(x.clone()));
                let out = net.forward_tape(&mut tape, &bound, xv, t, Some(&score)).unwrap();
                let wv = tape.constant(Tensor::vector(w.to_vec()));
                let prod = tape.mul(out, wv).unwrap();
                let loss = tape.sum(prod);
                let g = tape.backward(loss).unwrap().wrt(bound.theta());
                let fd = central_diff(
                    |th| {
                        let probe = DriftNet::from_theta(net.spec().clone(), th.to_vec()).unwrap();
                        let b = probe.forward(&x, t, Some(&score)).unwrap();
                        w[0] * b[0] + w[1] * b[1]
                    },
                    net.theta(),
                    1e-6,
                );
                assert!(rel_err(g.data(), &fd, 1e-10) <= 1e-3);
            }
        }
    }

    #[test]
    fn checkpoint_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.txt");
        let net = randomised(small_spec(Variant::Grad), 8);
        net.save(&path, 0.125).unwrap();
        let (back, sigma) = DriftNet::load(&path).unwrap();
        assert_eq!(sigma, 0.125);
        assert_eq!(back.spec(), net.spec());
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(back.theta()), bits(net.theta()));
    }

    #[test]
    fn checkpoint_rejects_truncated_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.txt");
        let net = randomised(small_spec(Variant::Nn), 8);
        net.save(&path, 1.0).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let cut: Vec<&str> = text.lines().collect();
        std::fs::write(&path, cut[..cut.len() - 3].join("\n")).unwrap();
        assert!(matches!(DriftNet::load(&path), Err(Error::Format { .. })));
    }

    #[test]
    fn adam_zero_gradient_leaves_theta() {
        let mut theta = vec![1.0, -2.0, 3.0];
        let mut adam = AdamState::new(3, 0.1);
        adam.step(&mut theta, &[0.0; 3], None).unwrap();
        assert_eq!(theta, vec![1.0, -2.0, 3.0]);
        assert_eq!(adam.steps_taken(), 1);
    }

    #[test]
    fn adam_first_step_is_signed_learning_rate() {
        let mut theta = vec![0.0; 3];
        let mut adam = AdamState::new(3, 0.01);
        adam.step(&mut theta, &[3.0, -0.5, 1e-3], None).unwrap();
        // −η·g/(|g| + ε) after bias correction
        for (th, g) in theta.iter().zip([3.0f64, -0.5, 1e-3]) {
            assert!((th + 0.01 * g / (g.abs() + 1e-8)).abs() < 1e-15);
        }
    }

    #[test]
    fn adam_clips_before_moments() {
        let mut theta = vec![0.0; 2];
        let mut adam = AdamState::new(2, 0.01);
        let norm = adam.step(&mut theta, &[6.0, 8.0], Some(1.0)).unwrap();
        assert_eq!(norm, 10.0);
        let m = adam.first_moment();
        assert!((m[0] - 0.1 * 0.6).abs() < 1e-15 && (m[1] - 0.1 * 0.8).abs() < 1e-15);
    }

    #[test]
    fn adam_errors() {
        let mut adam = AdamState::new(2, 0.01);
        let mut theta = vec![0.0; 2];
        assert!(adam.step(&mut theta, &[1.0], None).is_err());
        assert!(matches!(adam.step(&mut theta, &[f64::NAN, 0.0], None), Err(Error::NumericFailure { .. })));
        assert!(AdamState::new(2, 0.1).with_betas(1.0, 0.9).is_err());
    }

    proptest! {
        #[test]
        fn embedding_is_bounded(t in 0.0f64..=1.0, f in 1usize..12) {
            let e = FourierTimeEmbedding::new(f).unwrap().embed(t);
            prop_assert_eq!(e.len(), 2 * f);
            prop_assert!(e.iter().all(|v| (-1.0..=1.0).contains(v)));
        }

        #[test]
        fn forward_is_deterministic(seed in 0u64..1000, x0 in -3.0f64..3.0, t in 0.0f64..=1.0) {
            let net = randomised(small_spec(Variant::Nn), seed);
            prop_assert_eq!(net.forward(&[x0, 1.0], t, None).unwrap(), net.forward(&[x0, 1.0], t, None).unwrap());
        }

        #[test]
        fn adam_moments_track_length(len in 1usize..20, steps in 1usize..5) {
            let mut adam = AdamState::new(len, 0.01);
            let mut theta = vec![0.5; len];
            for _ in 0..steps {
                adam.step(&mut theta, &vec![1.0; len], None).unwrap();
            }
            prop_assert_eq!(adam.first_moment().len(), len);
            prop_assert_eq!(adam.steps_taken(), steps as u64);
        }
    }
}
