//! Graph convolution stack mapping label embeddings to per-label classifiers.
//!
//! Each layer computes `H' = δ(Â·H·W)` over the same normalized graph `Â`.
//! The first layer consumes the embedding matrix; the last produces one
//! `D`-dimensional classifier row per label and has no activation.

use rand::Rng;

use crate::error::{Error, Result};
use crate::labelgraph::EmbeddingMatrix;
use crate::numcore::{Matrix, Parameter, Tape, Var};

pub const DEFAULT_LEAKY_SLOPE: f64 = 0.2;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Activation {
    LeakyRelu(f64),
    None,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GcnLayer {
    pub weight: Parameter,
    pub activation: Activation,
}

impl GcnLayer {
    pub fn in_dim(&self) -> usize {
        self.weight.value.rows()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.value.cols()
    }
}

/// Widths and activation of a stack, as read from configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct StackSpec {
    /// Hidden layer widths; `None` means one hidden layer of `2·d_e`.
    pub hidden: Option<Vec<usize>>,
    pub leaky_slope: f64,
}

impl Default for StackSpec {
    fn default() -> Self {
        StackSpec {
            hidden: None,
            leaky_slope: DEFAULT_LEAKY_SLOPE,
        }
    }
}

impl StackSpec {
    pub fn hidden_widths(&self, embed_dim: usize) -> Vec<usize> {
        self.hidden.clone().unwrap_or_else(|| vec![2 * embed_dim])
    }
}

/// Label-dependent classifiers, one row per label.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassifierBank {
    pub weights: Matrix,
}

impl ClassifierBank {
    pub fn num_labels(&self) -> usize {
        self.weights.rows()
    }

    pub fn feature_dim(&self) -> usize {
        self.weights.cols()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GcnStack {
    layers: Vec<GcnLayer>,
}

impl GcnStack {
    pub fn new(layers: Vec<GcnLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Config("GCN stack needs at least one layer".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::Shape {
                    op: "gcn_stack",
                    left: pair[0].weight.shape(),
                    right: pair[1].weight.shape(),
                });
            }
        }
        if let Some(slope) = layers.iter().find_map(|l| match l.activation {
            Activation::LeakyRelu(s) if !(s > 0.0 && s < 1.0) => Some(s),
            _ => None,
        }) {
            return Err(Error::Config(format!("LeakyReLU slope must lie in (0, 1), got {slope}")));
        }
        Ok(GcnStack { layers })
    }

    /// `input_dim → hidden… → output_dim`, LeakyReLU between layers, none
    /// after the last, Glorot-uniform weights.
    pub fn init<R: Rng + ?Sized>(
        input_dim: usize,
        hidden: &[usize],
        output_dim: usize,
        slope: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let mut dims = Vec::with_capacity(hidden.len() + 2);
        dims.push(input_dim);
        dims.extend_from_slice(hidden);
        dims.push(output_dim);
        if dims.contains(&0) {
            return Err(Error::Config(format!("GCN widths must be positive, got {dims:?}")));
        }
        let n = dims.len() - 1;
        let layers = (0..n)
            .map(|l| GcnLayer {
                weight: Parameter::glorot_uniform(dims[l], dims[l + 1], rng),
                activation: if l + 1 < n {
                    Activation::LeakyRelu(slope)
                } else {
                    Activation::None
                },
            })
            .collect();
        GcnStack::new(layers)
    }

    pub fn layers(&self) -> &[GcnLayer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    pub fn params(&self) -> Vec<(String, &Parameter)> {
        self.layers
            .iter()
            .enumerate()
            .map(|(i, l)| (format!("gcn.{i}.weight"), &l.weight))
            .collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Parameter> {
        self.layers.iter_mut().map(|l| &mut l.weight).collect()
    }

    /// Threads `h` through every layer; `weights` are leaves for each layer's
    /// weight, in order.
    pub fn forward(&self, tape: &mut Tape, h: Var, a_hat: Var, weights: &[Var]) -> Result<Var> {
        let mut h = h;
        for (layer, &w) in self.layers.iter().zip(weights) {
            h = gcn_layer_forward(tape, h, a_hat, w, layer.activation)?;
        }
        Ok(h)
    }
}

/// `δ(Â·H·W)`.
pub fn gcn_layer_forward(tape: &mut Tape, h: Var, a_hat: Var, weight: Var, activation: Activation) -> Result<Var> {
    let (c, _) = tape.value(h).shape();
    let a_shape = tape.value(a_hat).shape();
    if a_shape != (c, c) {
        return Err(Error::Shape {
            op: "gcn_layer",
            left: a_shape,
            right: tape.value(h).shape(),
        });
    }
    let mixed = tape.matmul(a_hat, h)?;
    let z = tape.matmul(mixed, weight)?;
    Ok(match activation {
        Activation::LeakyRelu(slope) => tape.leaky_relu(z, slope),
        Activation::None => z,
    })
}

/// Evaluates the stack on the embeddings over a fixed normalized graph.
pub fn build_classifiers(embeddings: &EmbeddingMatrix, a_hat: &Matrix, stack: &GcnStack) -> Result<ClassifierBank> {
    if stack.input_dim() != embeddings.dim() {
        return Err(Error::Shape {
            op: "build_classifiers",
            left: embeddings.vectors().shape(),
            right: stack.layers()[0].weight.shape(),
        });
    }
    let mut tape = Tape::new();
    let e = tape.leaf(embeddings.vectors().clone());
    let a = tape.leaf(a_hat.clone());
    let ws: Vec<Var> = stack.layers().iter().map(|l| tape.leaf(l.weight.value.clone())).collect();
    let out = stack.forward(&mut tape, e, a, &ws)?;
    Ok(ClassifierBank {
        weights: tape.value(out).clone(),
    })
}
