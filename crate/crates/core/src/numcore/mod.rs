//! Dense matrices, a reverse-mode tape over them, and a finite-difference
//! gradient checker.

mod gradcheck;
mod matrix;
mod param;
mod tape;

pub use gradcheck::{grad_check, relative_error, GradCheckReport, ParamCheck, REL_ERROR_FLOOR};
pub use matrix::Matrix;
pub use param::Parameter;
pub use tape::{bce_term, stable_sigmoid, BinaryKind, Gradients, Tape, Var};
