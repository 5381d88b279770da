use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{fmt_real, is_skippable};
use crate::error::{Error, Result};
use crate::numcore::Matrix;

/// A precomputed feature vector with its multi-hot label vector.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledSample {
    pub feature: Vec<f64>,
    pub labels: Vec<bool>,
}

impl LabeledSample {
    pub fn num_positive(&self) -> usize {
        self.labels.iter().filter(|&&b| b).count()
    }
}

/// Samples sharing one label order and one feature dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    labels: Vec<String>,
    feature_dim: usize,
    samples: Vec<LabeledSample>,
}

impl Dataset {
    pub fn new(labels: Vec<String>, feature_dim: usize, samples: Vec<LabeledSample>) -> Result<Self> {
        for (i, s) in samples.iter().enumerate() {
            if s.feature.len() != feature_dim {
                return Err(Error::Input(format!(
                    "sample {i}: feature has {} dims, expected {feature_dim}",
                    s.feature.len()
                )));
            }
            if s.labels.len() != labels.len() {
                return Err(Error::Input(format!(
                    "sample {i}: {} label slots, expected {}",
                    s.labels.len(),
                    labels.len()
                )));
            }
            if s.feature.iter().any(|v| !v.is_finite()) {
                return Err(Error::Input(format!("sample {i}: non-finite feature")));
            }
        }
        Ok(Dataset {
            labels,
            feature_dim,
            samples,
        })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn num_labels(&self) -> usize {
        self.labels.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn samples(&self) -> &[LabeledSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// `N×D` features of the selected samples.
    pub fn features(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(idx.len() * self.feature_dim);
        for &i in idx {
            data.extend_from_slice(&self.samples[i].feature);
        }
        Matrix::from_vec(idx.len(), self.feature_dim, data).expect("feature rows have uniform length")
    }

    /// `N×C` 0/1 targets of the selected samples.
    pub fn targets(&self, idx: &[usize]) -> Matrix {
        let c = self.labels.len();
        Matrix::from_fn(idx.len(), c, |r, j| if self.samples[idx[r]].labels[j] { 1.0 } else { 0.0 })
    }

    pub fn all_indices(&self) -> Vec<usize> {
        (0..self.samples.len()).collect()
    }

    /// Removes samples with no positive label, returning how many went.
    pub fn retain_labeled(&mut self) -> usize {
        let before = self.samples.len();
        self.samples.retain(|s| s.num_positive() > 0);
        before - self.samples.len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LoadMode {
    /// Samples with no positive label are rejected.
    Train,
    /// Samples with no positive label are kept.
    Eval,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Rejection {
    pub line: usize,
    pub reason: String,
}

/// What a loader saw: every record is either accepted or rejected with a reason.
#[derive(Clone, Debug)]
pub struct LoadReport {
    pub dataset: Dataset,
    pub records_read: usize,
    pub rejected: Vec<Rejection>,
}

/// Loads a dataset, mapping label names onto `label_order`.
pub fn load_dataset(path: impl AsRef<Path>, label_order: &[String], mode: LoadMode) -> Result<LoadReport> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::load(path, 0, format!("cannot open dataset: {e}")))?;
    let index: std::collections::HashMap<&str, usize> =
        label_order.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();

    let mut samples = Vec::new();
    let mut rejected = Vec::new();
    let mut records_read = 0;
    let mut dim: Option<usize> = None;

    for (n, line) in BufReader::new(file).lines().enumerate() {
        let lineno = n + 1;
        let line = line?;
        if is_skippable(&line) {
            continue;
        }
        let record = records_read;
        records_read += 1;
        let (label_field, feature_field) = line
            .split_once('\t')
            .ok_or_else(|| Error::load(path, lineno, format!("record {record}: expected '<labels>\\t<features>'")))?;

        let mut labels = vec![false; label_order.len()];
        for name in label_field.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let j = *index
                .get(name)
                .ok_or_else(|| Error::load(path, lineno, format!("record {record}: unknown label '{name}'")))?;
            labels[j] = true;
        }

        let feature: Vec<f64> = feature_field
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::load(path, lineno, format!("record {record}: bad feature value '{tok}'")))
            })
            .collect::<Result<_>>()?;
        match dim {
            None if feature.is_empty() => {
                return Err(Error::load(path, lineno, format!("record {record}: empty feature vector")))
            }
            None => dim = Some(feature.len()),
            Some(d) if d != feature.len() => {
                return Err(Error::load(
                    path,
                    lineno,
                    format!("record {record}: feature has {} dims, expected {d}", feature.len()),
                ))
            }
            Some(_) => {}
        }

        let sample = LabeledSample { feature, labels };
        if mode == LoadMode::Train && sample.num_positive() == 0 {
            rejected.push(Rejection {
                line: lineno,
                reason: format!("record {record}: no positive label"),
            });
            continue;
        }
        samples.push(sample);
    }

    let dataset = Dataset::new(label_order.to_vec(), dim.unwrap_or(0), samples)?;
    Ok(LoadReport {
        dataset,
        records_read,
        rejected,
    })
}

pub fn write_dataset(path: impl AsRef<Path>, dataset: &Dataset) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for s in dataset.samples() {
        let names: Vec<&str> = s
            .labels
            .iter()
            .zip(dataset.labels())
            .filter_map(|(&on, name)| on.then_some(name.as_str()))
            .collect();
        let feats: Vec<String> = s.feature.iter().map(|&v| fmt_real(v)).collect();
        writeln!(w, "{}\t{}", names.join(","), feats.join(" "))?;
    }
    w.flush()?;
    Ok(())
}
