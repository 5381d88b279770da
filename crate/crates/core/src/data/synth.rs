//! Synthetic multi-label data with a known block co-occurrence structure.
//!
//! Labels are partitioned into blocks. Each sample draws one block uniformly;
//! labels inside it switch on with probability `p_in`, every other label with
//! `p_out`. The feature vector is the sum of the active labels' prototype
//! vectors plus isotropic Gaussian noise.
//!
//! Prototypes are `c_j = β·m_b + sqrt(1-β²)·v_j` with block vectors `m_b` and
//! label vectors `v_j` drawn i.i.d. `N(0, 1/D)` per coordinate, so
//! `E|c_j|² = 1` and same-block prototypes have expected cosine `β²`.
//! Embeddings are a fixed random projection to `d_e` dimensions of
//! `γ·m_b + sqrt(1-γ²)·c_j`, plus `N(0, τ²)` noise, all scaled by `s`. With
//! `β > 0` or `γ > 0` embedding similarity tracks block membership; `γ`
//! lets the embedding relatedness differ from the feature-space overlap.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::dataset::{Dataset, LabeledSample};
use crate::error::{Error, Result};
use crate::labelgraph::EmbeddingMatrix;
use crate::numcore::Matrix;

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub num_labels: usize,
    /// Partition of `0..num_labels` into co-occurrence groups.
    pub blocks: Vec<Vec<usize>>,
    pub embed_dim: usize,
    pub feature_dim: usize,
    pub train_samples: usize,
    pub test_samples: usize,
    pub p_in: f64,
    pub p_out: f64,
    /// Per-coordinate standard deviation of the feature noise.
    pub noise: f64,
    /// Standard deviation `τ` of the embedding noise, before scaling.
    pub embed_noise: f64,
    /// Target embedding norm scale `s`; word vectors typically have norms of
    /// a few units rather than one.
    pub embed_scale: f64,
    /// Weight `β ∈ [0, 1]` of the shared block direction in each prototype.
    pub block_share: f64,
    /// Weight `γ ∈ [0, 1]` of the block direction mixed into the vector that
    /// is projected to an embedding. Lets embeddings reflect block
    /// membership even when feature prototypes do not (`β = 0`).
    pub embed_block_share: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            num_labels: 12,
            blocks: contiguous_blocks(12, 3),
            embed_dim: 16,
            feature_dim: 64,
            train_samples: 2000,
            test_samples: 500,
            p_in: 0.6,
            p_out: 0.05,
            noise: 0.15,
            embed_noise: 0.1,
            embed_scale: 1.0,
            block_share: 0.5,
            embed_block_share: 0.0,
            seed: 0,
        }
    }
}

/// `k` contiguous groups of near-equal size covering `0..n`.
pub fn contiguous_blocks(n: usize, k: usize) -> Vec<Vec<usize>> {
    let k = k.max(1);
    (0..k).map(|b| (b * n / k..(b + 1) * n / k).collect()).collect()
}

impl SyntheticSpec {
    /// The benchmark regime: strong within-block co-occurrence, noisy
    /// 256-dimensional features, unrelated per-label prototypes and
    /// embeddings at word-vector-like norms.
    pub fn benchmark(seed: u64) -> Self {
        SyntheticSpec {
            feature_dim: 256,
            p_in: 0.9,
            p_out: 0.02,
            noise: 1.0,
            embed_scale: 3.0,
            block_share: 0.0,
            embed_block_share: 0.5,
            seed,
            ..SyntheticSpec::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.num_labels == 0 || self.embed_dim == 0 || self.feature_dim == 0 {
            return bad("label count and dimensions must be positive".into());
        }
        let mut owner = vec![None; self.num_labels];
        for (b, block) in self.blocks.iter().enumerate() {
            if block.is_empty() {
                return bad(format!("block {b} is empty"));
            }
            for &j in block {
                if j >= self.num_labels {
                    return bad(format!("block {b} names label {j} outside 0..{}", self.num_labels));
                }
                if let Some(prev) = owner[j].replace(b) {
                    return bad(format!("label {j} appears in blocks {prev} and {b}"));
                }
            }
        }
        if let Some(j) = owner.iter().position(Option::is_none) {
            return bad(format!("label {j} belongs to no block"));
        }
        for (name, p) in [("p_in", self.p_in), ("p_out", self.p_out)] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must lie in [0, 1], got {p}"));
            }
        }
        if self.p_in <= self.p_out {
            return bad(format!("p_in ({}) must exceed p_out ({})", self.p_in, self.p_out));
        }
        if !(self.noise >= 0.0 && self.embed_noise >= 0.0 && self.embed_scale > 0.0) {
            return bad("noise scales must be non-negative".into());
        }
        for (name, v) in [("block_share", self.block_share), ("embed_block_share", self.embed_block_share)] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} must lie in [0, 1], got {v}"));
            }
        }
        if self.train_samples > 0 && self.p_in == 0.0 {
            return bad("p_in = 0 can never produce a labeled training sample".into());
        }
        Ok(())
    }

    fn block_of(&self) -> Vec<usize> {
        let mut owner = vec![0; self.num_labels];
        for (b, block) in self.blocks.iter().enumerate() {
            for &j in block {
                owner[j] = b;
            }
        }
        owner
    }

    /// `b{block}_l{index}`.
    pub fn label_names(&self) -> Vec<String> {
        let owner = self.block_of();
        (0..self.num_labels).map(|j| format!("b{}_l{j:02}", owner[j])).collect()
    }

    /// `C×C` 0/1 matrix, 1 where two labels share a block.
    pub fn block_matrix(&self) -> Matrix {
        let owner = self.block_of();
        Matrix::from_fn(self.num_labels, self.num_labels, |i, j| {
            if owner[i] == owner[j] {
                1.0
            } else {
                0.0
            }
        })
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticData {
    pub embeddings: EmbeddingMatrix,
    pub train: Dataset,
    pub test: Dataset,
    pub block_matrix: Matrix,
    pub prototypes: Matrix,
}

fn gaussian<R: Rng>(rng: &mut R, std: f64) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    z * std
}

/// Generates embeddings, a training split (every sample has at least one
/// positive; empty draws are discarded and redrawn) and a test split (raw
/// draws, empty label sets allowed).
pub fn synth_generate(spec: &SyntheticSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (c, d, de) = (spec.num_labels, spec.feature_dim, spec.embed_dim);
    let owner = spec.block_of();
    let unit = 1.0 / (d as f64).sqrt();

    let block_dirs = Matrix::from_fn(spec.blocks.len(), d, |_, _| gaussian(&mut rng, unit));
    let own = (1.0 - spec.block_share * spec.block_share).sqrt();
    let prototypes = Matrix::from_fn(c, d, |j, k| {
        spec.block_share * block_dirs[(owner[j], k)] + own * gaussian(&mut rng, unit)
    });

    let projection = Matrix::from_fn(d, de, |_, _| gaussian(&mut rng, spec.embed_scale / (de as f64).sqrt()));
    let g = spec.embed_block_share;
    let g_own = (1.0 - g * g).sqrt();
    let semantic = Matrix::from_fn(c, d, |j, k| g * block_dirs[(owner[j], k)] + g_own * prototypes[(j, k)]);
    let projected = semantic.matmul(&projection)?;
    let vectors = projected.map(|v| v + gaussian(&mut rng, spec.embed_scale * spec.embed_noise));
    let embeddings = EmbeddingMatrix::new(spec.label_names(), vectors)?;

    let draw = |rng: &mut ChaCha8Rng| -> LabeledSample {
        let block = rng.random_range(0..spec.blocks.len());
        let labels: Vec<bool> = (0..c)
            .map(|j| {
                let p = if owner[j] == block { spec.p_in } else { spec.p_out };
                rng.random_bool(p)
            })
            .collect();
        let mut feature: Vec<f64> = (0..d).map(|_| gaussian(rng, spec.noise)).collect();
        for j in (0..c).filter(|&j| labels[j]) {
            for (f, &p) in feature.iter_mut().zip(prototypes.row(j)) {
                *f += p;
            }
        }
        LabeledSample { feature, labels }
    };

    let mut train = Vec::with_capacity(spec.train_samples);
    while train.len() < spec.train_samples {
        let s = draw(&mut rng);
        if s.num_positive() > 0 {
            train.push(s);
        }
    }
    let test: Vec<LabeledSample> = (0..spec.test_samples).map(|_| draw(&mut rng)).collect();

    let labels = spec.label_names();
    Ok(SyntheticData {
        embeddings,
        train: Dataset::new(labels.clone(), d, train)?,
        test: Dataset::new(labels, d, test)?,
        block_matrix: spec.block_matrix(),
        prototypes,
    })
}
