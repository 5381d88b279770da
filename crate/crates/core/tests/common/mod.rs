//! Definition-literal brute-force oracles shared by integration targets.

#![allow(dead_code)]

use agcn_core::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Item `a` ranks before `b` under descending score, ties by index.
pub fn before(scores: &[f64], a: usize, b: usize) -> bool {
    scores[a] > scores[b] || (scores[a] == scores[b] && a < b)
}

/// For each positive `i`: rank = 1 + #items before it; precision = 1 + #
/// positives before it, over rank. O(N²).
pub fn ap_oracle(scores: &[f64], truths: &[f64]) -> f64 {
    let n = scores.len();
    let positives: Vec<usize> = (0..n).filter(|&i| truths[i] == 1.0).collect();
    let mut total = 0.0;
    for &i in &positives {
        let rank = 1 + (0..n).filter(|&j| before(scores, j, i)).count();
        let hits = 1 + positives.iter().filter(|&&j| before(scores, j, i)).count();
        total += hits as f64 / rank as f64;
    }
    total / positives.len() as f64
}

pub struct Oracle {
    pub map: f64,
    pub cp: f64,
    pub cr: f64,
    pub cf1: f64,
    pub op: f64,
    pub or: f64,
    pub of1: f64,
    pub ap_all: f64,
}

pub fn safe(n: f64, d: f64) -> f64 {
    if d == 0.0 {
        0.0
    } else {
        n / d
    }
}

pub fn oracle(s: &Matrix, t: &Matrix, d: &Matrix) -> Oracle {
    let (n, c) = s.shape();
    let col = |m: &Matrix, j: usize| (0..n).map(|i| m[(i, j)]).collect::<Vec<_>>();
    let included: Vec<usize> = (0..c).filter(|&j| col(t, j).contains(&1.0)).collect();
    let map = included.iter().map(|&j| ap_oracle(&col(s, j), &col(t, j))).sum::<f64>() / included.len() as f64;
    let (mut tp, mut fp, mut fn_) = (0.0, 0.0, 0.0);
    let (mut psum, mut rsum) = (0.0, 0.0);
    for j in 0..c {
        let (mut a, mut b, mut e) = (0.0, 0.0, 0.0);
        for i in 0..n {
            let (dd, tt) = (d[(i, j)] == 1.0, t[(i, j)] == 1.0);
            if dd && tt {
                a += 1.0;
            } else if dd {
                b += 1.0;
            } else if tt {
                e += 1.0;
            }
        }
        tp += a;
        fp += b;
        fn_ += e;
        if included.contains(&j) {
            psum += safe(a, a + b);
            rsum += safe(a, a + e);
        }
    }
    let k = included.len() as f64;
    let (cp, cr) = (psum / k, rsum / k);
    let (op, or) = (safe(tp, tp + fp), safe(tp, tp + fn_));
    Oracle {
        map,
        cp,
        cr,
        cf1: safe(2.0 * cp * cr, cp + cr),
        op,
        or,
        of1: safe(2.0 * op * or, op + or),
        ap_all: ap_oracle(s.as_slice(), t.as_slice()),
    }
}

pub fn random_instance(seed: u64) -> (Matrix, Matrix, Matrix) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=50);
    let c = rng.random_range(1..=10);
    // Coarse scores so ties are common.
    let s = Matrix::from_fn(n, c, |_, _| (rng.random_range(0..20) as f64) / 19.0);
    let mut t = Matrix::from_fn(n, c, |_, _| if rng.random_bool(0.3) { 1.0 } else { 0.0 });
    t[(0, 0)] = 1.0;
    let d = Matrix::from_fn(n, c, |_, _| if rng.random_bool(0.4) { 1.0 } else { 0.0 });
    (s, t, d)
}

