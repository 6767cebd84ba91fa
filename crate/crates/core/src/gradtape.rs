//! Reverse-mode automatic differentiation on an append-only tape.
//!
//! Every operation appends a node holding its forward value and the ids of
//! its inputs. Nodes are therefore stored in topological order and
//! [`Tape::backward`] is a single reverse sweep. Values are dense `f64`
//! tensors of rank 0, 1 or 2 (row-major).
//!
//! ```
//! use sfopt::gradtape::{Tape, Tensor};
//!
//! let mut tape = Tape::new();
//! let x = tape.leaf(Tensor::scalar(3.0));
//! let y = tape.mul(x, x).unwrap();
//! let grads = tape.backward(y).unwrap();
//! assert_eq!(grads.wrt(x).data(), &[6.0]);
//! ```

use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.len() > 2 {
            return Err(Error::invalid(format!("tensors have rank <= 2, got shape {shape:?}")));
        }
        if shape.iter().product::<usize>() != data.len() {
            return Err(Error::invalid(format!(
                "shape {shape:?} does not hold {} values",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn scalar(v: f64) -> Self {
        Self {
            shape: Vec::new(),
            data: vec![v],
        }
    }

    pub fn vector(data: Vec<f64>) -> Self {
        Self {
            shape: vec![data.len()],
            data,
        }
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        Self::new(vec![rows, cols], data)
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// The single value of a one-element tensor.
    pub fn item(&self) -> Option<f64> {
        (self.data.len() == 1).then(|| self.data[0])
    }
}

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Const,
    Add(Var, Var),
    Sub(Var, Var),
    Scale(Var, f64),
    AddConst(Var),
    Mul(Var, Var),
    MatMul(Var, Var),
    BroadcastAdd(Var, Var),
    Tanh(Var),
    Relu(Var),
    Sin(Var),
    Cos(Var),
    Exp(Var),
    Log(Var),
    Sum(Var),
    SquaredNorm(Var),
    Concat(Vec<Var>),
    Slice(Var, usize),
    Reshape(Var),
    /// Scalar function of the input evaluated outside the tape; carries its gradient.
    External(Var, Vec<f64>),
}

#[derive(Clone, Debug)]
struct Node {
    op: Op,
    value: Tensor,
    tracked: bool,
}

/// Single-owner recording of a computation.
#[derive(Clone, Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// `∂loss/∂node` for every tracked node.
#[derive(Clone, Debug)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<Tensor> {
        let g = self.grads.get(v.0)?.as_ref()?;
        Some(Tensor {
            shape: self.shapes[v.0].clone(),
            data: g.clone(),
        })
    }

    /// Gradient w.r.t. `v`, zero when the loss does not depend on it.
    pub fn wrt(&self, v: Var) -> Tensor {
        self.get(v).unwrap_or_else(|| Tensor::zeros(&self.shapes[v.0]))
    }
}

fn same_shape(op: &str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape != b.shape {
        return Err(Error::invalid(format!(
            "{op}: shape mismatch {:?} vs {:?}",
            a.shape, b.shape
        )));
    }
    Ok(())
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Clears every node; previously issued [`Var`]s become invalid.
    pub fn reset(&mut self) {
        self.nodes.clear();
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, op: Op, value: Tensor, inputs: &[Var]) -> Var {
        let tracked = match op {
            Op::Leaf => true,
            Op::Const => false,
            _ => inputs.iter().any(|i| self.nodes[i.0].tracked),
        };
        self.nodes.push(Node { op, value, tracked });
        Var(self.nodes.len() - 1)
    }

    /// A differentiable input.
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(Op::Leaf, value, &[])
    }

    /// A value treated as constant by [`Tape::backward`].
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(Op::Const, value, &[])
    }

    fn unary(&mut self, a: Var, op: Op, f: impl Fn(f64) -> f64) -> Var {
        let src = &self.nodes[a.0].value;
        let value = Tensor {
            shape: src.shape.clone(),
            data: src.data.iter().map(|&x| f(x)).collect(),
        };
        self.push(op, value, &[a])
    }

    fn binary(&mut self, name: &str, a: Var, b: Var, op: Op, f: impl Fn(f64, f64) -> f64) -> Result<Var> {
        let (x, y) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        same_shape(name, x, y)?;
        let value = Tensor {
            shape: x.shape.clone(),
            data: x.data.iter().zip(&y.data).map(|(&p, &q)| f(p, q)).collect(),
        };
        Ok(self.push(op, value, &[a, b]))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("add", a, b, Op::Add(a, b), |x, y| x + y)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("sub", a, b, Op::Sub(a, b), |x, y| x - y)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("mul", a, b, Op::Mul(a, b), |x, y| x * y)
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Var {
        self.unary(a, Op::Scale(a, k), |x| k * x)
    }

    pub fn add_const(&mut self, a: Var, c: f64) -> Var {
        self.unary(a, Op::AddConst(a), |x| x + c)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(a, Op::Tanh(a), f64::tanh)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.unary(a, Op::Relu(a), |x| x.max(0.0))
    }

    pub fn sin(&mut self, a: Var) -> Var {
        self.unary(a, Op::Sin(a), f64::sin)
    }

    pub fn cos(&mut self, a: Var) -> Var {
        self.unary(a, Op::Cos(a), f64::cos)
    }

    pub fn exp(&mut self, a: Var) -> Result<Var> {
        let v = self.unary(a, Op::Exp(a), f64::exp);
        if self.value(v).data.iter().any(|x| !x.is_finite()) {
            return Err(Error::numeric("tape exp", "overflow or non-finite input"));
        }
        Ok(v)
    }

    pub fn log(&mut self, a: Var) -> Result<Var> {
        if self.value(a).data.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
            return Err(Error::numeric("tape log", "argument must be positive and finite"));
        }
        Ok(self.unary(a, Op::Log(a), f64::ln))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data.iter().sum();
        self.push(Op::Sum(a), Tensor::scalar(s), &[a])
    }

    pub fn squared_norm(&mut self, a: Var) -> Var {
        let s = self.value(a).data.iter().map(|x| x * x).sum();
        self.push(Op::SquaredNorm(a), Tensor::scalar(s), &[a])
    }

    /// Matrix product `[m, k] × [k, n] → [m, n]` or matrix-vector `[m, k] × [k] → [m]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (x, y) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        let (m, k) = match x.shape[..] {
            [m, k] => (m, k),
            _ => return Err(Error::invalid(format!("matmul: left operand must be a matrix, got {:?}", x.shape))),
        };
        let (k2, n, out_shape) = match y.shape[..] {
            [k2] => (k2, 1, vec![m]),
            [k2, n] => (k2, n, vec![m, n]),
            _ => return Err(Error::invalid(format!("matmul: bad right operand shape {:?}", y.shape))),
        };
        if k != k2 {
            return Err(Error::invalid(format!("matmul: inner dimensions {k} vs {k2}")));
        }
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let row = &x.data[i * k..(i + 1) * k];
            for (p, &xv) in row.iter().enumerate() {
                if xv == 0.0 {
                    continue;
                }
                let yrow = &y.data[p * n..(p + 1) * n];
                let orow = &mut out[i * n..(i + 1) * n];
                for (o, &yv) in orow.iter_mut().zip(yrow) {
                    *o += xv * yv;
                }
            }
        }
        Ok(self.push(Op::MatMul(a, b), Tensor { shape: out_shape, data: out }, &[a, b]))
    }

    /// Adds a bias vector to a vector or to every row of a matrix.
    pub fn broadcast_add(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (x, b) = (&self.nodes[a.0].value, &self.nodes[bias.0].value);
        let cols = *x.shape.last().unwrap_or(&1);
        if b.shape != [cols] || x.shape.is_empty() {
            return Err(Error::invalid(format!(
                "broadcast_add: bias {:?} does not match {:?}",
                b.shape, x.shape
            )));
        }
        let data = x
            .data
            .iter()
            .enumerate()
            .map(|(i, v)| v + b.data[i % cols])
            .collect();
        let value = Tensor {
            shape: x.shape.clone(),
            data,
        };
        Ok(self.push(Op::BroadcastAdd(a, bias), value, &[a, bias]))
    }

    /// Concatenates vectors.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let mut data = Vec::new();
        for p in parts {
            let t = &self.nodes[p.0].value;
            if t.shape.len() != 1 {
                return Err(Error::invalid(format!("concat expects vectors, got {:?}", t.shape)));
            }
            data.extend_from_slice(&t.data);
        }
        Ok(self.push(Op::Concat(parts.to_vec()), Tensor::vector(data), parts))
    }

    /// `a[start..start + len]` of a vector (or of the flattened data of any tensor).
    pub fn slice(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let src = &self.nodes[a.0].value;
        if start + len > src.data.len() {
            return Err(Error::invalid(format!(
                "slice {start}..{} out of bounds for {} values",
                start + len,
                src.data.len()
            )));
        }
        let value = Tensor::vector(src.data[start..start + len].to_vec());
        Ok(self.push(Op::Slice(a, start), value, &[a]))
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let value = Tensor::new(shape.to_vec(), self.nodes[a.0].value.data.clone())?;
        Ok(self.push(Op::Reshape(a), value, &[a]))
    }

    /// Records a scalar `f(a)` computed elsewhere, with its gradient `∇f(a)`.
    pub fn external(&mut self, a: Var, value: f64, grad: Vec<f64>) -> Result<Var> {
        if grad.len() != self.value(a).len() {
            return Err(Error::invalid("external: gradient length does not match input"));
        }
        if !value.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::numeric("tape external", "non-finite value or gradient"));
        }
        Ok(self.push(Op::External(a, grad), Tensor::scalar(value), &[a]))
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if self.value(loss).len() != 1 {
            return Err(Error::invalid(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.value(loss).shape
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![1.0]);
        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.tracked {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.pullback(node, &g, &mut grads);
            grads[i] = Some(g);
        }
        Ok(Gradients {
            grads,
            shapes: self.nodes.iter().map(|n| n.value.shape.clone()).collect(),
        })
    }

    fn accumulate(&self, grads: &mut [Option<Vec<f64>>], v: Var, contrib: impl FnOnce(&mut [f64])) {
        if !self.nodes[v.0].tracked {
            return;
        }
        let slot = grads[v.0].get_or_insert_with(|| vec![0.0; self.nodes[v.0].value.len()]);
        contrib(slot);
    }

    fn pullback(&self, node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let val = |v: Var| &self.nodes[v.0].value.data;
        match &node.op {
            Op::Leaf | Op::Const => {}
            Op::Add(a, b) => {
                self.accumulate(grads, *a, |s| add_into(s, g));
                self.accumulate(grads, *b, |s| add_into(s, g));
            }
            Op::Sub(a, b) => {
                self.accumulate(grads, *a, |s| add_into(s, g));
                self.accumulate(grads, *b, |s| s.iter_mut().zip(g).for_each(|(x, y)| *x -= y));
            }
            Op::Scale(a, k) => self.accumulate(grads, *a, |s| s.iter_mut().zip(g).for_each(|(x, y)| *x += k * y)),
            Op::AddConst(a) | Op::Reshape(a) => self.accumulate(grads, *a, |s| add_into(s, g)),
            Op::Mul(a, b) => {
                let (av, bv) = (val(*a), val(*b));
                self.accumulate(grads, *a, |s| {
                    for i in 0..s.len() {
                        s[i] += g[i] * bv[i];
                    }
                });
                self.accumulate(grads, *b, |s| {
                    for i in 0..s.len() {
                        s[i] += g[i] * av[i];
                    }
                });
            }
            Op::MatMul(a, b) => {
                let (x, y) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                let (m, k) = (x.shape[0], x.shape[1]);
                let n = if y.shape.len() == 1 { 1 } else { y.shape[1] };
                // dA = G Yᵀ, dB = Xᵀ G
                self.accumulate(grads, *a, |s| {
                    for i in 0..m {
                        for p in 0..k {
                            let mut acc = 0.0;
                            for j in 0..n {
                                acc += g[i * n + j] * y.data[p * n + j];
                            }
                            s[i * k + p] += acc;
                        }
                    }
                });
                self.accumulate(grads, *b, |s| {
                    for i in 0..m {
                        for p in 0..k {
                            let xv = x.data[i * k + p];
                            for j in 0..n {
                                s[p * n + j] += xv * g[i * n + j];
                            }
                        }
                    }
                });
            }
            Op::BroadcastAdd(a, bias) => {
                self.accumulate(grads, *a, |s| add_into(s, g));
                self.accumulate(grads, *bias, |s| {
                    let cols = s.len();
                    for (i, gv) in g.iter().enumerate() {
                        s[i % cols] += gv;
                    }
                });
            }
            Op::Tanh(a) => {
                let out = &node.value.data;
                self.accumulate(grads, *a, |s| {
                    for i in 0..s.len() {
                        s[i] += g[i] * (1.0 - out[i] * out[i]);
                    }
                });
            }
            Op::Relu(a) => {
                let inp = val(*a);
                self.accumulate(grads, *a, |s| {
                    for i in 0..s.len() {
                        if inp[i] > 0.0 {
                            s[i] += g[i];
                        }
                    }
                });
            }
            Op::Sin(a) => {
                let inp = val(*a);
                self.accumulate(grads, *a, |s| {
                    for i in 0..s.len() {
                        s[i] += g[i] * inp[i].cos();
                    }
                });
            }
            Op::Cos(a) => {
                let inp = val(*a);
                self.accumulate(grads, *a, |s| {
                    for i in 0..s.len() {
                        s[i] -= g[i] * inp[i].sin();
                    }
                });
            }
            Op::Exp(a) => {
                let out = &node.value.data;
                self.accumulate(grads, *a, |s| {
                    for i in 0..s.len() {
                        s[i] += g[i] * out[i];
                    }
                });
            }
            Op::Log(a) => {
                let inp = val(*a);
                self.accumulate(grads, *a, |s| {
                    for i in 0..s.len() {
                        s[i] += g[i] / inp[i];
                    }
                });
            }
            Op::Sum(a) => self.accumulate(grads, *a, |s| s.iter_mut().for_each(|x| *x += g[0])),
            Op::SquaredNorm(a) => {
                let inp = val(*a);
                self.accumulate(grads, *a, |s| {
                    for i in 0..s.len() {
                        s[i] += 2.0 * g[0] * inp[i];
                    }
                });
            }
            Op::Concat(parts) => {
                let mut off = 0;
                for p in parts {
                    let len = self.nodes[p.0].value.len();
                    self.accumulate(grads, *p, |s| add_into(s, &g[off..off + len]));
                    off += len;
                }
            }
            Op::Slice(a, start) => {
                self.accumulate(grads, *a, |s| add_into(&mut s[*start..*start + g.len()], g));
            }
            Op::External(a, grad) => {
                self.accumulate(grads, *a, |s| s.iter_mut().zip(grad).for_each(|(x, d)| *x += g[0] * d));
            }
        }
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    dst.iter_mut().zip(src).for_each(|(d, s)| *d += s);
}
