//! Define-by-run reverse-mode differentiation over dense matrices.
//!
//! Every operation appends a node holding its forward value and the inputs its
//! backward rule needs. [`Tape::backward`] walks the nodes once in reverse
//! recording order and accumulates vector-Jacobian products.

use super::matrix::Matrix;
use crate::error::{Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Elementwise binary operation kind.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinaryKind {
    Add,
    Sub,
    Mul,
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Binary(BinaryKind, Var, Var),
    Scale(Var, f64),
    Transpose(Var),
    LeakyRelu(Var, f64),
    Relu(Var),
    Sigmoid(Var),
    Abs(Var),
    Powf(Var, f64),
    ClampMin(Var, f64),
    RowSum(Var),
    Sum(Var),
    BceWithLogits { logits: Var, targets: Matrix },
    Map { input: Var, derivative: fn(f64) -> f64 },
}

#[derive(Clone, Debug)]
struct Node {
    value: Matrix,
    op: Op,
}

/// Ordered record of executed operations.
#[derive(Clone, Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Result of a backward pass: one optional gradient per tape node.
#[derive(Clone, Debug)]
pub struct Gradients {
    grads: Vec<Option<Matrix>>,
    visited: usize,
}

impl Gradients {
    pub fn get(&self, var: Var) -> Option<&Matrix> {
        self.grads.get(var.0).and_then(Option::as_ref)
    }

    /// Gradient of `var`, or zeros of `shape` if nothing flowed into it.
    pub fn wrt_or_zeros(&self, var: Var, shape: (usize, usize)) -> Matrix {
        self.get(var)
            .cloned()
            .unwrap_or_else(|| Matrix::zeros(shape.0, shape.1))
    }

    /// Number of nodes the reverse sweep walked.
    pub fn visited(&self) -> usize {
        self.visited
    }
}

fn accumulate(slot: &mut Option<Matrix>, delta: Matrix) {
    match slot {
        Some(existing) => {
            for (a, b) in existing.as_mut_slice().iter_mut().zip(delta.as_slice()) {
                *a += b;
            }
        }
        None => *slot = Some(delta),
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, var: Var) -> &Matrix {
        &self.nodes[var.0].value
    }

    /// Value of a 1×1 node.
    pub fn scalar(&self, var: Var) -> f64 {
        let v = self.value(var);
        debug_assert_eq!(v.shape(), (1, 1));
        v.as_slice()[0]
    }

    fn push(&mut self, value: Matrix, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    /// Records an input (parameter or constant).
    pub fn leaf(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        Ok(self.push(value, Op::MatMul(a, b)))
    }

    pub fn elementwise(&mut self, a: Var, b: Var, kind: BinaryKind) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        let value = match kind {
            BinaryKind::Add => va.add(vb)?,
            BinaryKind::Sub => va.sub(vb)?,
            BinaryKind::Mul => va.hadamard(vb)?,
        };
        Ok(self.push(value, Op::Binary(kind, a, b)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.elementwise(a, b, BinaryKind::Add)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.elementwise(a, b, BinaryKind::Sub)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.elementwise(a, b, BinaryKind::Mul)
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let value = self.value(a).scale(c);
        self.push(value, Op::Scale(a, c))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let value = self.value(a).transpose();
        self.push(value, Op::Transpose(a))
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Var {
        let value = self.value(a).map(|x| if x > 0.0 { x } else { slope * x });
        self.push(value, Op::LeakyRelu(a, slope))
    }

    /// `max(x, 0)`; gradient flows only where `x > 0`.
    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|x| if x > 0.0 { x } else { 0.0 });
        self.push(value, Op::Relu(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let value = self.value(a).map(stable_sigmoid);
        self.push(value, Op::Sigmoid(a))
    }

    /// `|x|` with subgradient `sign(x)`, `sign(0) = 0`.
    pub fn abs(&mut self, a: Var) -> Var {
        let value = self.value(a).map(f64::abs);
        self.push(value, Op::Abs(a))
    }

    pub fn powf(&mut self, a: Var, p: f64) -> Var {
        let value = self.value(a).map(|x| x.powf(p));
        self.push(value, Op::Powf(a, p))
    }

    /// `max(x, floor)`; gradient passes where `x > floor`.
    pub fn clamp_min(&mut self, a: Var, floor: f64) -> Var {
        let value = self.value(a).map(|x| x.max(floor));
        self.push(value, Op::ClampMin(a, floor))
    }

    /// Sums each row: `r×c -> r×1`.
    pub fn row_sum(&mut self, a: Var) -> Var {
        let v = self.value(a);
        let value = Matrix::from_fn(v.rows(), 1, |i, _| v.row(i).iter().sum());
        self.push(value, Op::RowSum(a))
    }

    /// Sums all entries into a 1×1 node.
    pub fn sum(&mut self, a: Var) -> Var {
        let value = Matrix::filled(1, 1, self.value(a).sum());
        self.push(value, Op::Sum(a))
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let n = self.value(a).len().max(1) as f64;
        let s = self.sum(a);
        self.scale(s, 1.0 / n)
    }

    /// Mean binary cross-entropy over all entries of `logits` against 0/1
    /// `targets`, in the overflow-free form `max(p,0) - p*y + ln(1 + e^-|p|)`.
    pub fn bce_with_logits(&mut self, logits: Var, targets: &Matrix) -> Result<Var> {
        let p = self.value(logits);
        p.expect_same_shape(targets, "bce_with_logits")?;
        let n = p.len().max(1) as f64;
        let total: f64 = p
            .as_slice()
            .iter()
            .zip(targets.as_slice())
            .map(|(&x, &y)| bce_term(x, y))
            .sum();
        let value = Matrix::filled(1, 1, total / n);
        Ok(self.push(
            value,
            Op::BceWithLogits {
                logits,
                targets: targets.clone(),
            },
        ))
    }

    /// Elementwise `f` with a caller-supplied derivative `df`.
    pub fn map(&mut self, a: Var, f: fn(f64) -> f64, df: fn(f64) -> f64) -> Var {
        let value = self.value(a).map(f);
        self.push(value, Op::Map { input: a, derivative: df })
    }

    /// Reverse sweep seeded with `d output / d output = 1`.
    ///
    /// `output` must be a 1×1 node.
    pub fn backward(&self, output: Var) -> Result<Gradients> {
        let shape = self.value(output).shape();
        if shape != (1, 1) {
            return Err(Error::Shape {
                op: "backward",
                left: shape,
                right: (1, 1),
            });
        }
        let mut grads: Vec<Option<Matrix>> = vec![None; self.nodes.len()];
        grads[output.0] = Some(Matrix::ones(1, 1));
        let mut visited = 0;

        for idx in (0..=output.0).rev() {
            visited += 1;
            let Some(g) = grads[idx].take() else {
                continue;
            };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    let da = g.matmul(&self.value(*b).transpose())?;
                    let db = self.value(*a).transpose().matmul(&g)?;
                    accumulate(&mut grads[a.0], da);
                    accumulate(&mut grads[b.0], db);
                }
                Op::Binary(kind, a, b) => {
                    let (da, db) = match kind {
                        BinaryKind::Add => (g.clone(), g.clone()),
                        BinaryKind::Sub => (g.clone(), g.scale(-1.0)),
                        BinaryKind::Mul => (g.hadamard(self.value(*b))?, g.hadamard(self.value(*a))?),
                    };
                    accumulate(&mut grads[a.0], da);
                    accumulate(&mut grads[b.0], db);
                }
                Op::Scale(a, c) => accumulate(&mut grads[a.0], g.scale(*c)),
                Op::Transpose(a) => accumulate(&mut grads[a.0], g.transpose()),
                Op::LeakyRelu(a, slope) => {
                    let d = g.zip_with(self.value(*a), "leaky_relu", |g, x| if x > 0.0 { g } else { slope * g })?;
                    accumulate(&mut grads[a.0], d);
                }
                Op::Relu(a) => {
                    let d = g.zip_with(self.value(*a), "relu", |g, x| if x > 0.0 { g } else { 0.0 })?;
                    accumulate(&mut grads[a.0], d);
                }
                Op::Sigmoid(a) => {
                    let d = g.zip_with(&node.value, "sigmoid", |g, s| g * s * (1.0 - s))?;
                    accumulate(&mut grads[a.0], d);
                }
                Op::Abs(a) => {
                    let d = g.zip_with(self.value(*a), "abs", |g, x| g * sign(x))?;
                    accumulate(&mut grads[a.0], d);
                }
                Op::Powf(a, p) => {
                    let d = g.zip_with(self.value(*a), "powf", |g, x| g * p * x.powf(p - 1.0))?;
                    accumulate(&mut grads[a.0], d);
                }
                Op::ClampMin(a, floor) => {
                    let d = g.zip_with(self.value(*a), "clamp_min", |g, x| if x > *floor { g } else { 0.0 })?;
                    accumulate(&mut grads[a.0], d);
                }
                Op::RowSum(a) => {
                    let cols = self.value(*a).cols();
                    let d = Matrix::from_fn(g.rows(), cols, |i, _| g[(i, 0)]);
                    accumulate(&mut grads[a.0], d);
                }
                Op::Sum(a) => {
                    let (r, c) = self.value(*a).shape();
                    accumulate(&mut grads[a.0], Matrix::filled(r, c, g[(0, 0)]));
                }
                Op::BceWithLogits { logits, targets } => {
                    let p = self.value(*logits);
                    let scale = g[(0, 0)] / p.len().max(1) as f64;
                    let d = p.zip_with(targets, "bce_with_logits", |x, y| scale * (stable_sigmoid(x) - y))?;
                    accumulate(&mut grads[logits.0], d);
                }
                Op::Map { input, derivative } => {
                    let d = g.zip_with(self.value(*input), "map", |g, x| g * derivative(x))?;
                    accumulate(&mut grads[input.0], d);
                }
            }
            grads[idx] = Some(g);
        }

        Ok(Gradients { grads, visited })
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `1 / (1 + e^-x)` evaluated on the branch that never exponentiates a
/// positive argument.
pub fn stable_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Per-entry binary cross-entropy of logit `x` against target `y`.
pub fn bce_term(x: f64, y: f64) -> f64 {
    x.max(0.0) - x * y + (-x.abs()).exp().ln_1p()
}
