//! Adaptive label-graph GCN for multi-label classification.
//!
//! A label graph module turns label word embeddings into a learned
//! correlation matrix, a stack of graph convolutions maps the embeddings over
//! that graph into one classifier per label, and the classifiers score
//! precomputed feature vectors. Everything is trained jointly against a
//! multi-label cross-entropy plus an L1 pull of the normalized graph toward the
//! identity.

pub mod data;
pub mod error;
pub mod gcn;
pub mod labelgraph;
pub mod metrics;
pub mod model;
pub mod numcore;

pub use error::{Error, Result};
pub use numcore::{Matrix, Parameter, Tape, Var};
