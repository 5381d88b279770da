//! Central finite-difference verification of taped gradients.

use super::matrix::Matrix;
use super::tape::{Tape, Var};
use crate::error::{Error, Result};

/// Denominator floor for the relative error so that near-zero gradients are
/// compared on an absolute scale.
pub const REL_ERROR_FLOOR: f64 = 1e-4;

#[derive(Clone, Debug)]
pub struct ParamCheck {
    pub name: String,
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    /// Flat index of the worst entry.
    pub worst_index: usize,
    pub passed: bool,
}

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub params: Vec<ParamCheck>,
    pub tol: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.params.iter().all(|p| p.passed)
    }

    pub fn max_rel_error(&self) -> f64 {
        self.params.iter().map(|p| p.max_rel_error).fold(0.0, f64::max)
    }
}

/// `|a - n| / max(|a|, |n|, REL_ERROR_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERROR_FLOOR)
}

/// Compares the taped gradient of a scalar function against central
/// differences `(f(x+h) - f(x-h)) / 2h`, entry by entry.
///
/// `f` receives a fresh tape plus one leaf per parameter, in the order given,
/// and must return a 1×1 node.
pub fn grad_check<F>(f: F, params: &[(String, Matrix)], step: f64, tol: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::Config(format!("finite-difference step must be > 0, got {step}")));
    }
    let values: Vec<Matrix> = params.iter().map(|(_, m)| m.clone()).collect();

    let eval = |vals: &[Matrix], context: &str| -> Result<f64> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = vals.iter().map(|m| tape.leaf(m.clone())).collect();
        let out = f(&mut tape, &vars)?;
        let v = tape.scalar(out);
        if !v.is_finite() {
            return Err(Error::Probe { context: context.to_string() });
        }
        Ok(v)
    };

    let mut tape = Tape::new();
    let vars: Vec<Var> = values.iter().map(|m| tape.leaf(m.clone())).collect();
    let out = f(&mut tape, &vars)?;
    if !tape.scalar(out).is_finite() {
        return Err(Error::Probe { context: "base point".into() });
    }
    let grads = tape.backward(out)?;

    let mut report = Vec::with_capacity(params.len());
    let mut probe = values.clone();
    for (pi, (name, value)) in params.iter().enumerate() {
        let analytic = grads.wrt_or_zeros(vars[pi], value.shape());
        let mut check = ParamCheck {
            name: name.clone(),
            max_rel_error: 0.0,
            max_abs_error: 0.0,
            worst_index: 0,
            passed: true,
        };
        for k in 0..value.len() {
            let x = value.as_slice()[k];
            probe[pi].as_mut_slice()[k] = x + step;
            let plus = eval(&probe, &format!("{name}[{k}] + h"))?;
            probe[pi].as_mut_slice()[k] = x - step;
            let minus = eval(&probe, &format!("{name}[{k}] - h"))?;
            probe[pi].as_mut_slice()[k] = x;

            let numeric = (plus - minus) / (2.0 * step);
            let a = analytic.as_slice()[k];
            let rel = relative_error(a, numeric);
            if rel > check.max_rel_error {
                check.max_rel_error = rel;
                check.worst_index = k;
            }
            check.max_abs_error = check.max_abs_error.max((a - numeric).abs());
        }
        check.passed = check.max_rel_error <= tol;
        report.push(check);
    }
    Ok(GradCheckReport { params: report, tol })
}
