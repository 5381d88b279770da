use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::optim::Sgd;
use super::{AgcnModel, ModelConfig};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::labelgraph::EmbeddingMatrix;
use crate::metrics::{MetricReport, TopK};
use crate::numcore::{stable_sigmoid, Matrix, Tape, Var};

/// Per-epoch training summary. Losses are sample-weighted means over the
/// epoch's minibatches.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    /// Zero-based.
    pub epoch: usize,
    pub lr: f64,
    pub loss_cls: f64,
    pub loss_a: f64,
    pub loss_total: f64,
}

/// Minibatch SGD over a model. The shuffle for epoch `t` is drawn from its
/// own seeded stream, so a resumed run replays exactly.
#[derive(Clone, Debug)]
pub struct Trainer {
    model: AgcnModel,
    optimizer: Sgd,
    config: ModelConfig,
    epochs_done: usize,
    history: Vec<EpochRecord>,
}

fn check_labels(model: &AgcnModel, data: &Dataset) -> Result<()> {
    if model.labels() != data.labels() {
        return Err(Error::Input(format!(
            "dataset label order ({} labels) does not match the model's ({} labels)",
            data.num_labels(),
            model.num_labels()
        )));
    }
    if model.feature_dim() != data.feature_dim() {
        return Err(Error::Input(format!(
            "dataset features have {} dims, model expects {}",
            data.feature_dim(),
            model.feature_dim()
        )));
    }
    Ok(())
}

impl Trainer {
    pub fn new(model: AgcnModel, config: ModelConfig) -> Self {
        let optimizer = Sgd::new(config.optimizer, &model.param_shapes());
        Trainer {
            model,
            optimizer,
            config,
            epochs_done: 0,
            history: Vec::new(),
        }
    }

    /// Continues from saved optimizer state.
    pub fn resume(model: AgcnModel, config: ModelConfig, epochs_done: usize, velocities: Vec<Matrix>) -> Result<Self> {
        let shapes = model.param_shapes();
        if velocities.len() != shapes.len() || velocities.iter().zip(&shapes).any(|(v, &s)| v.shape() != s) {
            return Err(Error::Checkpoint("optimizer state does not match model parameters".into()));
        }
        Ok(Trainer {
            model,
            optimizer: Sgd::with_velocities(config.optimizer, velocities),
            config,
            epochs_done,
            history: Vec::new(),
        })
    }

    pub fn model(&self) -> &AgcnModel {
        &self.model
    }

    pub fn into_model(self) -> AgcnModel {
        self.model
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn optimizer(&self) -> &Sgd {
        &self.optimizer
    }

    pub fn epochs_done(&self) -> usize {
        self.epochs_done
    }

    pub fn history(&self) -> &[EpochRecord] {
        &self.history
    }

    /// Batch order for `epoch`.
    pub fn epoch_order(seed: u64, epoch: usize, n: usize) -> Vec<usize> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(epoch as u64 + 1);
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut rng);
        idx
    }

    pub fn run_epoch(&mut self, data: &Dataset) -> Result<EpochRecord> {
        check_labels(&self.model, data)?;
        if data.is_empty() {
            return Err(Error::Input("cannot train on an empty dataset".into()));
        }
        let epoch = self.epochs_done;
        let lr = self.config.schedule.lr_at(self.config.optimizer.lr, epoch);
        let order = Self::epoch_order(self.config.seed, epoch, data.len());
        let (mut cls, mut la, mut tot) = (0.0, 0.0, 0.0);
        for (step, batch) in order.chunks(self.config.batch_size).enumerate() {
            let x = data.features(batch);
            let y = data.targets(batch);
            let mut tape = Tape::new();
            let vars: Vec<Var> = self.model.params().iter().map(|(_, p)| tape.leaf(p.value.clone())).collect();
            let fp = self.model.forward(&mut tape, &vars, &x, &y)?;
            let total = tape.scalar(fp.loss_total);
            if !total.is_finite() {
                return Err(Error::Divergence { epoch, step, loss: total });
            }
            let grads = tape.backward(fp.loss_total)?;
            let mut params = self.model.params_mut();
            for (p, &v) in params.iter_mut().zip(&vars) {
                p.grad = grads.wrt_or_zeros(v, p.shape());
            }
            self.optimizer.step(&mut params, lr)?;
            if params.iter().any(|p| !p.value.is_finite()) {
                return Err(Error::Divergence { epoch, step, loss: total });
            }
            let w = batch.len() as f64;
            cls += w * tape.scalar(fp.loss_cls);
            la += w * fp.loss_a.map_or(0.0, |v| tape.scalar(v));
            tot += w * total;
        }
        let n = data.len() as f64;
        let record = EpochRecord {
            epoch,
            lr,
            loss_cls: cls / n,
            loss_a: la / n,
            loss_total: tot / n,
        };
        self.epochs_done += 1;
        self.history.push(record);
        Ok(record)
    }

    /// Runs `n` more epochs, reporting each to `observer`.
    pub fn run_epochs(&mut self, data: &Dataset, n: usize, mut observer: impl FnMut(&EpochRecord)) -> Result<()> {
        for _ in 0..n {
            let r = self.run_epoch(data)?;
            observer(&r);
        }
        Ok(())
    }

    /// Runs until the configured epoch count is reached.
    pub fn run(&mut self, data: &Dataset, observer: impl FnMut(&EpochRecord)) -> Result<()> {
        let remaining = self.config.schedule.epochs.saturating_sub(self.epochs_done);
        self.run_epochs(data, remaining, observer)
    }
}

/// Initializes and trains a model for the configured number of epochs.
pub fn train(
    data: &Dataset,
    embeddings: EmbeddingMatrix,
    fixed_graph: Option<Matrix>,
    config: &ModelConfig,
) -> Result<(AgcnModel, Vec<EpochRecord>)> {
    if embeddings.labels() != data.labels() {
        return Err(Error::Input("dataset label order does not match the embedding file".into()));
    }
    let model = AgcnModel::init(embeddings, fixed_graph, data.feature_dim(), config)?;
    let mut trainer = Trainer::new(model, config.clone());
    trainer.run(data, |_| {})?;
    let history = trainer.history().to_vec();
    Ok((trainer.into_model(), history))
}

/// `N×C` confidences `σ(p)`.
pub fn scores(model: &AgcnModel, data: &Dataset) -> Result<Matrix> {
    check_labels(model, data)?;
    let logits = model.logits(&data.features(&data.all_indices()))?;
    Ok(logits.map(stable_sigmoid))
}

pub fn evaluate(model: &AgcnModel, data: &Dataset, threshold: f64, top_k: Option<TopK>) -> Result<MetricReport> {
    if data.is_empty() {
        return Err(Error::Input("cannot evaluate an empty dataset".into()));
    }
    let s = scores(model, data)?;
    MetricReport::compute(&s, &data.targets(&data.all_indices()), threshold, top_k)
}
