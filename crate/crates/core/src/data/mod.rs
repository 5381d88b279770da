//! File formats and the synthetic block co-occurrence generator.
//!
//! All formats are plain text. Reals are written with 17 significant digits
//! (`{:.16e}`) so that a write followed by a load reproduces every `f64`
//! bit for bit.
//!
//! * Embeddings: one label per line, the label token followed by `d_e`
//!   whitespace-separated reals (the usual word-vector text layout).
//! * Datasets: one sample per line, `<labels>\t<features>` where `<labels>`
//!   is a comma-separated list of label names (possibly empty) and
//!   `<features>` holds `D` whitespace-separated reals.
//! * Graphs: `C×C` CSV with a header `label,<l1>,…,<lC>` and one row per
//!   label starting with its name.
//!
//! Blank lines and lines starting with `#` are ignored by every loader.

mod dataset;
mod embeddings;
mod graph;
mod synth;

pub use dataset::{load_dataset, write_dataset, Dataset, LabeledSample, LoadMode, LoadReport, Rejection};
pub use embeddings::{load_embeddings, read_embeddings, write_embeddings};
pub use graph::{load_graph_csv, write_graph_csv};
pub use synth::{contiguous_blocks, synth_generate, SyntheticData, SyntheticSpec};

pub(crate) fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

pub(crate) fn is_skippable(line: &str) -> bool {
    let t = line.trim();
    t.is_empty() || t.starts_with('#')
}
