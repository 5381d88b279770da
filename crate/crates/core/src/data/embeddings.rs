use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{fmt_real, is_skippable};
use crate::error::{Error, Result};
use crate::labelgraph::{validate_label, EmbeddingMatrix};
use crate::numcore::Matrix;

pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingMatrix> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::load(path, 0, format!("cannot open embeddings: {e}")))?;
    read_embeddings(BufReader::new(file), path)
}

/// Parses the word-vector text layout; `origin` is only used in messages.
pub fn read_embeddings<R: BufRead>(reader: R, origin: &Path) -> Result<EmbeddingMatrix> {
    let mut labels = Vec::new();
    let mut seen = HashSet::new();
    let mut data = Vec::new();
    let mut dim: Option<usize> = None;

    for (n, line) in reader.lines().enumerate() {
        let lineno = n + 1;
        let line = line?;
        if is_skippable(&line) {
            continue;
        }
        let mut parts = line.split_whitespace();
        let label = parts.next().unwrap_or_default().to_string();
        validate_label(&label).map_err(|e| Error::load(origin, lineno, e.to_string()))?;
        if !seen.insert(label.clone()) {
            return Err(Error::load(origin, lineno, format!("duplicate label '{label}'")));
        }
        let mut count = 0;
        for tok in parts {
            let v: f64 = tok
                .parse()
                .map_err(|_| Error::load(origin, lineno, format!("cannot parse '{tok}' as a real for label '{label}'")))?;
            if !v.is_finite() {
                return Err(Error::load(origin, lineno, format!("non-finite component for label '{label}'")));
            }
            data.push(v);
            count += 1;
        }
        match dim {
            None if count == 0 => return Err(Error::load(origin, lineno, format!("label '{label}' has no components"))),
            None => dim = Some(count),
            Some(d) if d != count => {
                return Err(Error::load(
                    origin,
                    lineno,
                    format!("label '{label}' has {count} components, expected {d}"),
                ))
            }
            Some(_) => {}
        }
        labels.push(label);
    }

    let dim = dim.ok_or_else(|| Error::load(origin, 0, "no embeddings found"))?;
    let vectors = Matrix::from_vec(labels.len(), dim, data)?;
    EmbeddingMatrix::new(labels, vectors)
}

pub fn write_embeddings(path: impl AsRef<Path>, embeddings: &EmbeddingMatrix) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for (i, label) in embeddings.labels().iter().enumerate() {
        write!(w, "{label}")?;
        for &v in embeddings.vectors().row(i) {
            write!(w, " {}", fmt_real(v))?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}
