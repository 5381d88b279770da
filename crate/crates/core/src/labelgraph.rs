//! Label correlation graphs learned from label embeddings.
//!
//! Four ways to score label pairs are provided:
//!
//! * `Default`: two per-label linear maps `φ`, `θ` and a scaled inner product,
//!   `A = (1/C)·(E·Wφ)·(E·Wθ)ᵀ`.
//! * `Cos`: fixed cosine similarity between embeddings.
//! * `Fc`: a single linear layer, `A = E·Wl`.
//! * `Dot`: the self-correlation of one linear map, `A = (1/C)·(E·Wφ)·(E·Wφ)ᵀ`.
//!
//! Raw scores of any sign are rectified before the symmetric degree
//! normalization `D^-1/2 (A⁺ + I) D^-1/2`, and [`sparse_loss`] measures the L1
//! distance of the normalized graph from the identity.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::numcore::{Matrix, Parameter, Tape, Var};

/// Floor applied to node degrees before the inverse square root.
pub const DEGREE_FLOOR: f64 = 1e-6;

/// Per-label embedding vectors, one row per label in model order.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingMatrix {
    labels: Vec<String>,
    vectors: Matrix,
}

impl EmbeddingMatrix {
    /// Label names must be unique, non-empty, and free of whitespace and commas
    /// (both are separators in the on-disk formats).
    pub fn new(labels: Vec<String>, vectors: Matrix) -> Result<Self> {
        if labels.len() != vectors.rows() {
            return Err(Error::Input(format!(
                "{} labels but {} embedding rows",
                labels.len(),
                vectors.rows()
            )));
        }
        let mut seen = HashSet::new();
        for label in &labels {
            validate_label(label)?;
            if !seen.insert(label.as_str()) {
                return Err(Error::Input(format!("duplicate label '{label}'")));
            }
        }
        Ok(EmbeddingMatrix { labels, vectors })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn vectors(&self) -> &Matrix {
        &self.vectors
    }

    pub fn num_labels(&self) -> usize {
        self.labels.len()
    }

    pub fn dim(&self) -> usize {
        self.vectors.cols()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

pub(crate) fn validate_label(label: &str) -> Result<()> {
    if label.is_empty() || label.contains(|c: char| c.is_whitespace() || c == ',') {
        return Err(Error::Input(format!(
            "label '{label}' must be non-empty and contain no whitespace or commas"
        )));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum LgVariant {
    #[default]
    Default,
    Cos,
    Fc,
    Dot,
}

impl LgVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            LgVariant::Default => "default",
            LgVariant::Cos => "cos",
            LgVariant::Fc => "fc",
            LgVariant::Dot => "dot",
        }
    }
}

impl fmt::Display for LgVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LgVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "default" => Ok(LgVariant::Default),
            "cos" | "cos-a" => Ok(LgVariant::Cos),
            "fc" | "fc-a" => Ok(LgVariant::Fc),
            "dot" | "dot-a" => Ok(LgVariant::Dot),
            other => Err(Error::Config(format!(
                "unknown label-graph variant '{other}' (expected default, cos, fc or dot)"
            ))),
        }
    }
}

/// Learnable parameters of a label-graph module. Each variant carries exactly
/// the matrices it uses.
#[derive(Clone, Debug, PartialEq)]
pub enum LgParams {
    Default {
        w_phi: Parameter,
        w_theta: Parameter,
        bias: Option<(Parameter, Parameter)>,
    },
    Cos,
    Fc {
        w_l: Parameter,
    },
    Dot {
        w_phi: Parameter,
        bias: Option<Parameter>,
    },
}

impl LgParams {
    /// Glorot-uniform weights, zero biases.
    pub fn init<R: Rng + ?Sized>(
        variant: LgVariant,
        embed_dim: usize,
        latent_dim: usize,
        num_labels: usize,
        bias: bool,
        rng: &mut R,
    ) -> Result<Self> {
        if latent_dim == 0 {
            return Err(Error::Config("label-graph latent dimension must be >= 1".into()));
        }
        let zero_bias = || Parameter::new(Matrix::zeros(1, latent_dim));
        Ok(match variant {
            LgVariant::Default => LgParams::Default {
                w_phi: Parameter::glorot_uniform(embed_dim, latent_dim, rng),
                w_theta: Parameter::glorot_uniform(embed_dim, latent_dim, rng),
                bias: bias.then(|| (zero_bias(), zero_bias())),
            },
            LgVariant::Cos => LgParams::Cos,
            LgVariant::Fc => LgParams::Fc {
                w_l: Parameter::glorot_uniform(embed_dim, num_labels, rng),
            },
            LgVariant::Dot => LgParams::Dot {
                w_phi: Parameter::glorot_uniform(embed_dim, latent_dim, rng),
                bias: bias.then(zero_bias),
            },
        })
    }

    pub fn variant(&self) -> LgVariant {
        match self {
            LgParams::Default { .. } => LgVariant::Default,
            LgParams::Cos => LgVariant::Cos,
            LgParams::Fc { .. } => LgVariant::Fc,
            LgParams::Dot { .. } => LgVariant::Dot,
        }
    }

    /// Named parameters in a fixed order.
    pub fn params(&self) -> Vec<(&'static str, &Parameter)> {
        match self {
            LgParams::Default { w_phi, w_theta, bias } => {
                let mut v = vec![("lg.w_phi", w_phi), ("lg.w_theta", w_theta)];
                if let Some((b_phi, b_theta)) = bias {
                    v.push(("lg.b_phi", b_phi));
                    v.push(("lg.b_theta", b_theta));
                }
                v
            }
            LgParams::Cos => Vec::new(),
            LgParams::Fc { w_l } => vec![("lg.w_l", w_l)],
            LgParams::Dot { w_phi, bias } => {
                let mut v = vec![("lg.w_phi", w_phi)];
                if let Some(b) = bias {
                    v.push(("lg.b_phi", b));
                }
                v
            }
        }
    }

    /// Same order as [`LgParams::params`].
    pub fn params_mut(&mut self) -> Vec<&mut Parameter> {
        match self {
            LgParams::Default { w_phi, w_theta, bias } => {
                let mut v = vec![w_phi, w_theta];
                if let Some((b_phi, b_theta)) = bias {
                    v.push(b_phi);
                    v.push(b_theta);
                }
                v
            }
            LgParams::Cos => Vec::new(),
            LgParams::Fc { w_l } => vec![w_l],
            LgParams::Dot { w_phi, bias } => {
                let mut v = vec![w_phi];
                if let Some(b) = bias {
                    v.push(b);
                }
                v
            }
        }
    }

    /// Raw correlation scores on the tape. `vars` are leaves for
    /// [`LgParams::params`], in order.
    pub fn forward(&self, tape: &mut Tape, embeddings: &EmbeddingMatrix, e: Var, vars: &[Var]) -> Result<Var> {
        match self {
            LgParams::Default { bias, .. } => {
                let biases = bias.as_ref().map(|_| (vars[2], vars[3]));
                lg_default(tape, e, vars[0], vars[1], biases)
            }
            LgParams::Cos => {
                let a = lg_cos(embeddings)?;
                Ok(tape.leaf(a))
            }
            LgParams::Fc { .. } => lg_fc(tape, e, vars[0]),
            LgParams::Dot { bias, .. } => lg_dot(tape, e, vars[0], bias.as_ref().map(|_| vars[1])),
        }
    }

    /// Raw and normalized graph for the current parameter values.
    pub fn graph(&self, embeddings: &EmbeddingMatrix) -> Result<CorrelationGraph> {
        let mut tape = Tape::new();
        let e = tape.leaf(embeddings.vectors().clone());
        let vars: Vec<Var> = self.params().iter().map(|(_, p)| tape.leaf(p.value.clone())).collect();
        let raw = self.forward(&mut tape, embeddings, e, &vars)?;
        CorrelationGraph::from_raw(tape.value(raw).clone())
    }
}

/// Learned scores and their normalized adjacency.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationGraph {
    pub raw: Matrix,
    pub normalized: Matrix,
}

impl CorrelationGraph {
    pub fn from_raw(raw: Matrix) -> Result<Self> {
        let normalized = normalize_matrix(&raw)?;
        Ok(CorrelationGraph { raw, normalized })
    }
}

/// `E·W + 1·bᵀ` when a bias is present.
fn project(tape: &mut Tape, e: Var, w: Var, bias: Option<Var>) -> Result<Var> {
    let z = tape.matmul(e, w)?;
    match bias {
        None => Ok(z),
        Some(b) => {
            let ones = tape.leaf(Matrix::ones(tape.value(e).rows(), 1));
            let spread = tape.matmul(ones, b)?;
            tape.add(z, spread)
        }
    }
}

/// `A = (1/C)·(E·Wφ)·(E·Wθ)ᵀ`.
pub fn lg_default(tape: &mut Tape, e: Var, w_phi: Var, w_theta: Var, bias: Option<(Var, Var)>) -> Result<Var> {
    let c = tape.value(e).rows();
    let phi = project(tape, e, w_phi, bias.map(|b| b.0))?;
    let theta = project(tape, e, w_theta, bias.map(|b| b.1))?;
    let theta_t = tape.transpose(theta);
    let prod = tape.matmul(phi, theta_t)?;
    Ok(tape.scale(prod, 1.0 / c as f64))
}

/// `A = (1/C)·(E·Wφ)·(E·Wφ)ᵀ`, symmetric positive semidefinite.
pub fn lg_dot(tape: &mut Tape, e: Var, w_phi: Var, bias: Option<Var>) -> Result<Var> {
    let c = tape.value(e).rows();
    let phi = project(tape, e, w_phi, bias)?;
    let phi_t = tape.transpose(phi);
    let prod = tape.matmul(phi, phi_t)?;
    Ok(tape.scale(prod, 1.0 / c as f64))
}

/// `A = E·Wl` with `Wl` of shape `d_e × C`.
pub fn lg_fc(tape: &mut Tape, e: Var, w_l: Var) -> Result<Var> {
    let (c, _) = tape.value(e).shape();
    let (_, out) = tape.value(w_l).shape();
    if out != c {
        return Err(Error::Shape {
            op: "lg_fc",
            left: tape.value(e).shape(),
            right: tape.value(w_l).shape(),
        });
    }
    tape.matmul(e, w_l)
}

/// Pairwise cosine similarity. Exactly symmetric with a unit diagonal.
pub fn lg_cos(embeddings: &EmbeddingMatrix) -> Result<Matrix> {
    let v = embeddings.vectors();
    let c = v.rows();
    let norms: Vec<f64> = (0..c).map(|i| v.row(i).iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
    for (i, &n) in norms.iter().enumerate() {
        if n == 0.0 || !n.is_finite() {
            return Err(Error::DegenerateEmbedding {
                label: embeddings.labels()[i].clone(),
            });
        }
    }
    let mut a = Matrix::identity(c);
    for i in 0..c {
        for j in 0..i {
            let dot: f64 = v.row(i).iter().zip(v.row(j)).map(|(x, y)| x * y).sum();
            let s = dot / (norms[i] * norms[j]);
            a[(i, j)] = s;
            a[(j, i)] = s;
        }
    }
    Ok(a)
}

/// `Â = D^-1/2 (max(A, 0) + I) D^-1/2` with `D_ii = max(Σ_j Ã_ij, ε)`.
pub fn normalize(tape: &mut Tape, raw: Var) -> Result<Var> {
    let (r, c) = tape.value(raw).shape();
    if r != c {
        return Err(Error::Shape {
            op: "normalize",
            left: (r, c),
            right: (c, c),
        });
    }
    let rect = tape.relu(raw);
    let eye = tape.leaf(Matrix::identity(c));
    let tilde = tape.add(rect, eye)?;
    let deg = tape.row_sum(tilde);
    let deg = tape.clamp_min(deg, DEGREE_FLOOR);
    let deg_t = tape.transpose(deg);
    // d_i·d_j, then one rounding through 1/sqrt
    let deg_outer = tape.matmul(deg, deg_t)?;
    let scale = tape.map(deg_outer, inv_sqrt, inv_sqrt_derivative);
    tape.mul(tilde, scale)
}

fn inv_sqrt(x: f64) -> f64 {
    1.0 / x.sqrt()
}

fn inv_sqrt_derivative(x: f64) -> f64 {
    -0.5 / (x * x.sqrt())
}

pub fn normalize_matrix(raw: &Matrix) -> Result<Matrix> {
    let mut tape = Tape::new();
    let r = tape.leaf(raw.clone());
    let n = normalize(&mut tape, r)?;
    Ok(tape.value(n).clone())
}

/// Reduction applied to the entrywise L1 distance from the identity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum SparseReduction {
    #[default]
    Sum,
    Mean,
}

impl FromStr for SparseReduction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "sum" => Ok(SparseReduction::Sum),
            "mean" => Ok(SparseReduction::Mean),
            other => Err(Error::Config(format!("unknown sparse reduction '{other}' (expected sum or mean)"))),
        }
    }
}

impl fmt::Display for SparseReduction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SparseReduction::Sum => "sum",
            SparseReduction::Mean => "mean",
        })
    }
}

/// `Σ_ij |Â_ij - I_ij|` (or its mean).
pub fn sparse_loss(tape: &mut Tape, normalized: Var, reduction: SparseReduction) -> Result<Var> {
    let c = tape.value(normalized).rows();
    let eye = tape.leaf(Matrix::identity(c));
    let diff = tape.sub(normalized, eye)?;
    let abs = tape.abs(diff);
    Ok(match reduction {
        SparseReduction::Sum => tape.sum(abs),
        SparseReduction::Mean => tape.mean(abs),
    })
}

pub fn sparse_loss_value(normalized: &Matrix, reduction: SparseReduction) -> Result<f64> {
    let mut tape = Tape::new();
    let n = tape.leaf(normalized.clone());
    let l = sparse_loss(&mut tape, n, reduction)?;
    Ok(tape.scalar(l))
}

/// Summary of an adjacency against a ground-truth block partition.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlockContrast {
    /// Mean off-diagonal entry between labels of the same block.
    pub intra: f64,
    /// Mean entry between labels of different blocks.
    pub cross: f64,
}

impl BlockContrast {
    /// `intra / cross`; infinite when cross is zero and intra is not, NaN
    /// when both are zero.
    pub fn ratio(&self) -> f64 {
        self.intra / self.cross
    }
}

/// `same_block` is a 0/1 matrix with 1 where two labels share a block.
pub fn block_contrast(a: &Matrix, same_block: &Matrix) -> Result<BlockContrast> {
    a.expect_same_shape(same_block, "block_contrast")?;
    let (mut intra, mut ni, mut cross, mut nc) = (0.0, 0usize, 0.0, 0usize);
    for i in 0..a.rows() {
        for j in (0..a.cols()).filter(|&j| j != i) {
            if same_block[(i, j)] != 0.0 {
                intra += a[(i, j)];
                ni += 1;
            } else {
                cross += a[(i, j)];
                nc += 1;
            }
        }
    }
    if ni == 0 || nc == 0 {
        return Err(Error::Input("block contrast needs both intra-block and cross-block pairs".into()));
    }
    Ok(BlockContrast {
        intra: intra / ni as f64,
        cross: cross / nc as f64,
    })
}

pub fn mean_diagonal(a: &Matrix) -> f64 {
    let n = a.rows().min(a.cols());
    (0..n).map(|i| a[(i, i)]).sum::<f64>() / n.max(1) as f64
}
