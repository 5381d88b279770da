//! Binary checkpoint container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic      8 bytes  "AGCNCKPT"
//! version    u32      1
//! meta       u64 byte length, then UTF-8 `key = value` lines
//! labels     u32 count, then per label: u32 byte length, UTF-8 bytes
//! tensors    u32 count, then per tensor:
//!              u32 name length, UTF-8 name,
//!              u64 rows, u64 cols, rows·cols f64 (row-major, IEEE-754 LE)
//! ```
//!
//! Meta holds the model configuration plus `graph_source` (`learned` or
//! `fixed`) and `epochs_done`. Tensors are `embeddings`, `graph.fixed` for a
//! fixed graph, every parameter under its own name (`lg.w_phi`,
//! `gcn.0.weight`, ...) and one `velocity.<name>` per parameter.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::config::{KeyValues, ModelConfig};
use super::{AgcnModel, GraphSource};
use crate::error::{Error, Result};
use crate::gcn::{Activation, GcnLayer, GcnStack};
use crate::labelgraph::{EmbeddingMatrix, LgParams, LgVariant};
use crate::numcore::{Matrix, Parameter};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"AGCNCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Everything needed to evaluate a model or resume its training.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub model: AgcnModel,
    pub epochs_done: usize,
    /// Momentum buffers, in parameter order.
    pub velocities: Vec<Matrix>,
}

fn put_u32(w: &mut impl Write, v: u32) -> Result<()> {
    Ok(w.write_all(&v.to_le_bytes())?)
}

fn put_u64(w: &mut impl Write, v: u64) -> Result<()> {
    Ok(w.write_all(&v.to_le_bytes())?)
}

fn put_str(w: &mut impl Write, s: &str) -> Result<()> {
    put_u32(w, s.len() as u32)?;
    Ok(w.write_all(s.as_bytes())?)
}

fn put_tensor(w: &mut impl Write, name: &str, m: &Matrix) -> Result<()> {
    put_str(w, name)?;
    put_u64(w, m.rows() as u64)?;
    put_u64(w, m.cols() as u64)?;
    for v in m.as_slice() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn write_checkpoint(w: &mut impl Write, ckpt: &Checkpoint) -> Result<()> {
    let model = &ckpt.model;
    let mut meta = ckpt.config.to_key_values();
    let source = match model.graph {
        GraphSource::Learned(_) => "learned",
        GraphSource::Fixed(_) => "fixed",
    };
    meta.set("graph_source", source);
    meta.set("epochs_done", &ckpt.epochs_done.to_string());
    let meta = meta.to_text();

    w.write_all(CHECKPOINT_MAGIC)?;
    put_u32(w, CHECKPOINT_VERSION)?;
    put_u64(w, meta.len() as u64)?;
    w.write_all(meta.as_bytes())?;

    put_u32(w, model.labels().len() as u32)?;
    for l in model.labels() {
        put_str(w, l)?;
    }

    let params = model.params();
    if ckpt.velocities.len() != params.len() {
        return Err(Error::Checkpoint(format!(
            "{} velocity buffers for {} parameters",
            ckpt.velocities.len(),
            params.len()
        )));
    }
    let mut tensors: Vec<(String, &Matrix)> = vec![("embeddings".into(), model.embeddings.vectors())];
    if let GraphSource::Fixed(g) = &model.graph {
        tensors.push(("graph.fixed".into(), g));
    }
    for (name, p) in &params {
        tensors.push((name.clone(), &p.value));
    }
    for ((name, _), v) in params.iter().zip(&ckpt.velocities) {
        tensors.push((format!("velocity.{name}"), v));
    }
    put_u32(w, tensors.len() as u32)?;
    for (name, m) in tensors {
        put_tensor(w, &name, m)?;
    }
    Ok(())
}

pub fn save_checkpoint(path: impl AsRef<Path>, ckpt: &Checkpoint) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_checkpoint(&mut w, ckpt)?;
    w.flush()?;
    Ok(())
}

struct Reader<R> {
    inner: R,
}

impl<R: Read> Reader<R> {
    fn bytes(&mut self, n: usize, what: &str) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        (&mut self.inner).take(n as u64).read_to_end(&mut buf)?;
        if buf.len() != n {
            return Err(Error::Checkpoint(format!("truncated while reading {what}")));
        }
        Ok(buf)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.bytes(4, what)?;
        Ok(u32::from_le_bytes(b.try_into().expect("4 bytes")))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        let b = self.bytes(8, what)?;
        Ok(u64::from_le_bytes(b.try_into().expect("8 bytes")))
    }

    fn string(&mut self, len: usize, what: &str) -> Result<String> {
        String::from_utf8(self.bytes(len, what)?).map_err(|_| Error::Checkpoint(format!("{what} is not UTF-8")))
    }

    fn short_string(&mut self, what: &str) -> Result<String> {
        let n = self.u32(what)? as usize;
        self.string(n, what)
    }

    fn tensor(&mut self) -> Result<(String, Matrix)> {
        let name = self.short_string("tensor name")?;
        let rows = self.u64(&name)? as usize;
        let cols = self.u64(&name)? as usize;
        let n = rows
            .checked_mul(cols)
            .and_then(|n| n.checked_mul(8))
            .ok_or_else(|| Error::Checkpoint(format!("tensor {name} has absurd shape {rows}x{cols}")))?;
        let raw = self.bytes(n, &name)?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        Ok((name, Matrix::from_vec(rows, cols, data)?))
    }
}

fn take(tensors: &mut HashMap<String, Matrix>, name: &str) -> Result<Matrix> {
    tensors
        .remove(name)
        .ok_or_else(|| Error::Checkpoint(format!("missing tensor '{name}'")))
}

pub fn read_checkpoint(r: impl Read) -> Result<Checkpoint> {
    let mut r = Reader { inner: r };
    if r.bytes(8, "magic")? != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint("not a checkpoint (bad magic)".into()));
    }
    let version = r.u32("version")?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let meta_len = r.u64("meta length")? as usize;
    let mut meta = KeyValues::parse(&r.string(meta_len, "meta")?)?;
    let source = meta.remove("graph_source").unwrap_or_default();
    let epochs_done: usize = meta
        .remove("epochs_done")
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::Checkpoint("meta lacks epochs_done".into()))?;
    let config = ModelConfig::from_key_values(&meta)?;

    let n_labels = r.u32("label count")? as usize;
    let labels = (0..n_labels)
        .map(|_| r.short_string("label"))
        .collect::<Result<Vec<_>>>()?;

    let n_tensors = r.u32("tensor count")? as usize;
    let mut order = Vec::with_capacity(n_tensors);
    let mut tensors = HashMap::with_capacity(n_tensors);
    for _ in 0..n_tensors {
        let (name, m) = r.tensor()?;
        order.push(name.clone());
        if tensors.insert(name.clone(), m).is_some() {
            return Err(Error::Checkpoint(format!("duplicate tensor '{name}'")));
        }
    }
    let mut trailing = [0u8; 1];
    if r.inner.read(&mut trailing)? != 0 {
        return Err(Error::Checkpoint("trailing bytes after last tensor".into()));
    }

    let embeddings = EmbeddingMatrix::new(labels, take(&mut tensors, "embeddings")?)
        .map_err(|e| Error::Checkpoint(format!("embeddings: {e}")))?;
    let mut param = |name: &str| take(&mut tensors, name).map(Parameter::new);
    let graph = match source.as_str() {
        "fixed" => GraphSource::Fixed(take(&mut tensors, "graph.fixed")?),
        "learned" => GraphSource::Learned(match config.lg_variant {
            LgVariant::Default => {
                let w_phi = param("lg.w_phi")?;
                let w_theta = param("lg.w_theta")?;
                let bias = if config.lg_bias {
                    Some((param("lg.b_phi")?, param("lg.b_theta")?))
                } else {
                    None
                };
                LgParams::Default { w_phi, w_theta, bias }
            }
            LgVariant::Cos => LgParams::Cos,
            LgVariant::Fc => LgParams::Fc { w_l: param("lg.w_l")? },
            LgVariant::Dot => {
                let w_phi = param("lg.w_phi")?;
                let bias = if config.lg_bias { Some(param("lg.b_phi")?) } else { None };
                LgParams::Dot { w_phi, bias }
            }
        }),
        other => return Err(Error::Checkpoint(format!("unknown graph_source '{other}'"))),
    };

    let n_layers = order.iter().filter(|n| n.starts_with("gcn.")).count();
    let layers = (0..n_layers)
        .map(|i| {
            Ok(GcnLayer {
                weight: Parameter::new(take(&mut tensors, &format!("gcn.{i}.weight"))?),
                activation: if i + 1 < n_layers {
                    Activation::LeakyRelu(config.stack.leaky_slope)
                } else {
                    Activation::None
                },
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let stack = GcnStack::new(layers).map_err(|e| Error::Checkpoint(format!("GCN stack: {e}")))?;

    let model = AgcnModel {
        embeddings,
        graph,
        stack,
        alpha: config.alpha,
        sparse_reduction: config.sparse_reduction,
    };
    if let GraphSource::Fixed(g) = &model.graph {
        super::validate_fixed_graph(g, model.num_labels()).map_err(|e| Error::Checkpoint(e.to_string()))?;
    }
    let names: Vec<String> = model.params().into_iter().map(|(n, _)| n).collect();
    let velocities = names
        .iter()
        .map(|n| take(&mut tensors, &format!("velocity.{n}")))
        .collect::<Result<Vec<_>>>()?;
    for ((n, p), v) in model.params().iter().zip(&velocities) {
        if p.shape() != v.shape() {
            return Err(Error::Checkpoint(format!("velocity for {n} has the wrong shape")));
        }
    }
    if let Some(extra) = tensors.keys().next() {
        return Err(Error::Checkpoint(format!("unexpected tensor '{extra}'")));
    }
    Ok(Checkpoint {
        config,
        model,
        epochs_done,
        velocities,
    })
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| Error::Checkpoint(format!("cannot open {}: {e}", path.display())))?;
    read_checkpoint(BufReader::new(f))
}

impl Checkpoint {
    /// Fresh checkpoint for an untrained model.
    pub fn untrained(model: AgcnModel, config: ModelConfig) -> Self {
        let velocities = model.param_shapes().into_iter().map(|(r, c)| Matrix::zeros(r, c)).collect();
        Checkpoint {
            config,
            model,
            epochs_done: 0,
            velocities,
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, self)?;
        Ok(buf)
    }
}
