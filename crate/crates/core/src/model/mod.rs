//! The assembled two-branch model: label graph → GCN → classifier bank,
//! applied to precomputed features and trained end to end.

mod checkpoint;
mod config;
mod optim;
mod train;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use config::{KeyValues, ModelConfig, MODEL_KEYS};
pub use optim::{sgd_step, LrSchedule, Sgd, SgdConfig};
pub use train::{evaluate, scores, train, EpochRecord, Trainer};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::gcn::{build_classifiers, ClassifierBank, GcnStack};
use crate::labelgraph::{normalize, sparse_loss, CorrelationGraph, EmbeddingMatrix, LgParams, SparseReduction};
use crate::numcore::{bce_term, Matrix, Parameter, Tape, Var};

/// Where the normalized adjacency comes from.
// One per model; boxing the larger variant buys nothing.
#[allow(clippy::large_enum_variant)]
#[derive(Clone, Debug, PartialEq)]
pub enum GraphSource {
    /// Computed from the embeddings by a label-graph module, then normalized.
    Learned(LgParams),
    /// Supplied by the caller and used as `Â` unchanged.
    Fixed(Matrix),
}

/// Label embeddings, graph source, GCN stack and loss settings.
#[derive(Clone, Debug, PartialEq)]
pub struct AgcnModel {
    pub embeddings: EmbeddingMatrix,
    pub graph: GraphSource,
    pub stack: GcnStack,
    pub alpha: f64,
    pub sparse_reduction: SparseReduction,
}

/// Tape handles for one forward pass over a batch.
#[derive(Clone, Copy, Debug)]
pub struct ForwardPass {
    pub a_hat: Var,
    pub classifiers: Var,
    pub logits: Var,
    pub loss_cls: Var,
    /// `None` when the graph is fixed; its L1 term is then a constant.
    pub loss_a: Option<Var>,
    pub loss_total: Var,
}

#[derive(Clone, Copy)]
enum InitStream {
    LabelGraph,
    Gcn,
}

// Streams 1.. are reserved for per-epoch shuffles.
fn init_rng(seed: u64, stream: InitStream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(match stream {
        InitStream::LabelGraph => 0,
        InitStream::Gcn => u64::MAX,
    });
    rng
}

/// Checks a caller-supplied `Â`: square, matching the label count, finite.
pub fn validate_fixed_graph(graph: &Matrix, num_labels: usize) -> Result<()> {
    if graph.shape() != (num_labels, num_labels) {
        return Err(Error::Shape {
            op: "fixed_graph",
            left: graph.shape(),
            right: (num_labels, num_labels),
        });
    }
    if !graph.is_finite() {
        return Err(Error::Input("fixed graph has non-finite entries".into()));
    }
    Ok(())
}

impl AgcnModel {
    /// Initializes every parameter from `config.seed`. The label graph and
    /// the GCN stack draw from separate streams, so the stack starts from
    /// the same weights whatever the graph source.
    pub fn init(embeddings: EmbeddingMatrix, fixed_graph: Option<Matrix>, feature_dim: usize, config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        if feature_dim == 0 {
            return Err(Error::Config("feature dimension must be >= 1".into()));
        }
        let mut rng = init_rng(config.seed, InitStream::LabelGraph);
        let (c, de) = (embeddings.num_labels(), embeddings.dim());
        let graph = match fixed_graph {
            Some(g) => {
                validate_fixed_graph(&g, c)?;
                GraphSource::Fixed(g)
            }
            None => GraphSource::Learned(LgParams::init(
                config.lg_variant,
                de,
                config.latent_dim.unwrap_or(de),
                c,
                config.lg_bias,
                &mut rng,
            )?),
        };
        let stack = GcnStack::init(
            de,
            &config.stack.hidden_widths(de),
            feature_dim,
            config.stack.leaky_slope,
            &mut init_rng(config.seed, InitStream::Gcn),
        )?;
        Ok(AgcnModel {
            embeddings,
            graph,
            stack,
            alpha: config.alpha,
            sparse_reduction: config.sparse_reduction,
        })
    }

    pub fn num_labels(&self) -> usize {
        self.embeddings.num_labels()
    }

    pub fn feature_dim(&self) -> usize {
        self.stack.output_dim()
    }

    pub fn labels(&self) -> &[String] {
        self.embeddings.labels()
    }

    /// Named parameters: label graph first, then GCN layers.
    pub fn params(&self) -> Vec<(String, &Parameter)> {
        let mut v: Vec<(String, &Parameter)> = match &self.graph {
            GraphSource::Learned(lg) => lg.params().into_iter().map(|(n, p)| (n.to_string(), p)).collect(),
            GraphSource::Fixed(_) => Vec::new(),
        };
        v.extend(self.stack.params());
        v
    }

    /// Same order as [`AgcnModel::params`].
    pub fn params_mut(&mut self) -> Vec<&mut Parameter> {
        let mut v = match &mut self.graph {
            GraphSource::Learned(lg) => lg.params_mut(),
            GraphSource::Fixed(_) => Vec::new(),
        };
        v.extend(self.stack.params_mut());
        v
    }

    pub fn param_shapes(&self) -> Vec<(usize, usize)> {
        self.params().iter().map(|(_, p)| p.shape()).collect()
    }

    /// Records the full objective for features `x` (N×D) and targets `y`
    /// (N×C). `vars` are leaves for [`AgcnModel::params`], in order.
    pub fn forward(&self, tape: &mut Tape, vars: &[Var], x: &Matrix, y: &Matrix) -> Result<ForwardPass> {
        let (c, d) = (self.num_labels(), self.feature_dim());
        if x.cols() != d {
            return Err(Error::Shape {
                op: "forward_features",
                left: x.shape(),
                right: (x.rows(), d),
            });
        }
        if y.shape() != (x.rows(), c) {
            return Err(Error::Shape {
                op: "forward_targets",
                left: y.shape(),
                right: (x.rows(), c),
            });
        }
        let e = tape.leaf(self.embeddings.vectors().clone());
        let (a_hat, loss_a, gcn_vars) = match &self.graph {
            GraphSource::Learned(lg) => {
                let n = lg.params().len();
                let raw = lg.forward(tape, &self.embeddings, e, &vars[..n])?;
                let a_hat = normalize(tape, raw)?;
                let la = sparse_loss(tape, a_hat, self.sparse_reduction)?;
                (a_hat, Some(la), &vars[n..])
            }
            GraphSource::Fixed(g) => (tape.leaf(g.clone()), None, vars),
        };
        let classifiers = self.stack.forward(tape, e, a_hat, gcn_vars)?;
        let xv = tape.leaf(x.clone());
        let wt = tape.transpose(classifiers);
        let logits = tape.matmul(xv, wt)?;
        let loss_cls = tape.bce_with_logits(logits, y)?;
        let loss_total = match loss_a {
            Some(la) if self.alpha != 0.0 => {
                let weighted = tape.scale(la, self.alpha);
                tape.add(loss_cls, weighted)?
            }
            _ => loss_cls,
        };
        Ok(ForwardPass {
            a_hat,
            classifiers,
            logits,
            loss_cls,
            loss_a,
            loss_total,
        })
    }

    /// Raw scores and normalized adjacency for the current parameters. A
    /// fixed graph reports itself for both.
    pub fn correlation_graph(&self) -> Result<CorrelationGraph> {
        match &self.graph {
            GraphSource::Learned(lg) => lg.graph(&self.embeddings),
            GraphSource::Fixed(g) => Ok(CorrelationGraph {
                raw: g.clone(),
                normalized: g.clone(),
            }),
        }
    }

    pub fn a_hat(&self) -> Result<Matrix> {
        Ok(self.correlation_graph()?.normalized)
    }

    pub fn classifiers(&self) -> Result<ClassifierBank> {
        build_classifiers(&self.embeddings, &self.a_hat()?, &self.stack)
    }

    /// `N×C` logits for `N×D` features.
    pub fn logits(&self, x: &Matrix) -> Result<Matrix> {
        let bank = self.classifiers()?;
        x.matmul(&bank.weights.transpose())
    }
}

/// `p = W̄·x`.
pub fn predict(bank: &ClassifierBank, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != bank.feature_dim() {
        return Err(Error::Shape {
            op: "predict",
            left: bank.weights.shape(),
            right: (x.len(), 1),
        });
    }
    Ok((0..bank.num_labels())
        .map(|j| bank.weights.row(j).iter().zip(x).map(|(w, v)| w * v).sum())
        .collect())
}

/// Mean over labels of the stable per-label binary cross-entropy.
pub fn bce_loss(logits: &[f64], targets: &[f64]) -> Result<f64> {
    if logits.len() != targets.len() {
        return Err(Error::Shape {
            op: "bce_loss",
            left: (logits.len(), 1),
            right: (targets.len(), 1),
        });
    }
    if logits.is_empty() {
        return Err(Error::Input("bce_loss over zero labels".into()));
    }
    let total: f64 = logits.iter().zip(targets).map(|(&p, &y)| bce_term(p, y)).sum();
    Ok(total / logits.len() as f64)
}

pub fn total_loss(loss_cls: f64, loss_a: f64, alpha: f64) -> f64 {
    if alpha == 0.0 {
        return loss_cls;
    }
    loss_cls + alpha * loss_a
}
