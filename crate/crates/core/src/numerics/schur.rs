//! Complex Schur decomposition by Hessenberg reduction and single-shift QR.
//!
//! `A = Q T Q^H` with `Q` unitary and `T` upper triangular. Eigenvectors are
//! recovered from `T` by triangular substitution.

use nalgebra::linalg::Hessenberg;
use num_complex::Complex64;

use super::{ComplexMatrix, ComplexVector};
use crate::error::{EpError, Result};

const ITERATIONS_PER_EIGENVALUE: usize = 60;
const EXCEPTIONAL_SHIFT_EVERY: usize = 10;

pub(crate) struct Schur {
    pub q: ComplexMatrix,
    pub t: ComplexMatrix,
}

/// Givens rotation `G = [[c, s], [-conj(s), c]]` with `G [x; y] = [r; 0]`.
fn givens(x: Complex64, y: Complex64) -> (f64, Complex64) {
    let ax = x.norm();
    let ay = y.norm();
    if ay == 0.0 {
        return (1.0, Complex64::new(0.0, 0.0));
    }
    if ax == 0.0 {
        return (0.0, y.conj() / ay);
    }
    let r = ax.hypot(ay);
    let c = ax / r;
    let s = (x / ax) * y.conj() / r;
    (c, s)
}

fn rotate_rows(h: &mut ComplexMatrix, k: usize, c: f64, s: Complex64, cols: std::ops::Range<usize>) {
    for j in cols {
        let a = h[(k, j)];
        let b = h[(k + 1, j)];
        h[(k, j)] = a * c + s * b;
        h[(k + 1, j)] = -s.conj() * a + b * c;
    }
}

fn rotate_cols(h: &mut ComplexMatrix, k: usize, c: f64, s: Complex64, rows: std::ops::Range<usize>) {
    for i in rows {
        let a = h[(i, k)];
        let b = h[(i, k + 1)];
        h[(i, k)] = a * c + b * s.conj();
        h[(i, k + 1)] = -a * s + b * c;
    }
}

/// Eigenvalue of the trailing 2x2 block closer to its bottom-right entry.
fn wilkinson_shift(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Complex64 {
    let half = (a - d) * 0.5;
    let disc = (half * half + b * c).sqrt();
    let mean = (a + d) * 0.5;
    let e1 = mean + disc;
    let e2 = mean - disc;
    if (e1 - d).norm() <= (e2 - d).norm() {
        e1
    } else {
        e2
    }
}

pub(crate) fn schur(a: &ComplexMatrix) -> Result<Schur> {
    let n = a.nrows();
    if n == 0 {
        return Ok(Schur {
            q: ComplexMatrix::zeros(0, 0),
            t: ComplexMatrix::zeros(0, 0),
        });
    }
    let (mut q, mut h) = Hessenberg::new(a.clone()).unpack();
    let eps = f64::EPSILON;
    let scale = h.norm().max(f64::MIN_POSITIVE);
    let max_iter = ITERATIONS_PER_EIGENVALUE * n;

    let mut hi = n - 1;
    let mut its = 0usize;
    let mut total = 0usize;
    while hi > 0 {
        // Deflation: find the start of the trailing unreduced block.
        let mut lo = hi;
        while lo > 0 {
            let sub = h[(lo, lo - 1)].norm();
            let mut diag = h[(lo, lo)].norm() + h[(lo - 1, lo - 1)].norm();
            if diag == 0.0 {
                diag = scale;
            }
            if sub <= eps * diag {
                h[(lo, lo - 1)] = Complex64::new(0.0, 0.0);
                break;
            }
            lo -= 1;
        }
        if lo == hi {
            hi -= 1;
            its = 0;
            continue;
        }
        its += 1;
        total += 1;
        if total > max_iter {
            return Err(EpError::EigenNoConvergence(total));
        }

        let mu = if its.is_multiple_of(EXCEPTIONAL_SHIFT_EVERY) {
            let sub = h[(hi, hi - 1)].norm();
            h[(hi, hi)] + Complex64::new(0.75 * sub, 0.5 * sub)
        } else {
            wilkinson_shift(
                h[(hi - 1, hi - 1)],
                h[(hi - 1, hi)],
                h[(hi, hi - 1)],
                h[(hi, hi)],
            )
        };

        // Implicit single-shift sweep over [lo, hi], chasing the bulge.
        let mut x = h[(lo, lo)] - mu;
        let mut y = h[(lo + 1, lo)];
        for k in lo..hi {
            if k > lo {
                x = h[(k, k - 1)];
                y = h[(k + 1, k - 1)];
            }
            let (c, s) = givens(x, y);
            let first_col = if k > lo { k - 1 } else { lo };
            rotate_rows(&mut h, k, c, s, first_col..n);
            let last_row = (k + 2).min(hi);
            rotate_cols(&mut h, k, c, s, 0..last_row + 1);
            rotate_cols(&mut q, k, c, s, 0..n);
            if k > lo {
                h[(k + 1, k - 1)] = Complex64::new(0.0, 0.0);
            }
        }
    }

    for j in 0..n {
        for i in (j + 1)..n {
            h[(i, j)] = Complex64::new(0.0, 0.0);
        }
    }
    Ok(Schur { q, t: h })
}

fn guard(d: Complex64, smin: f64) -> Complex64 {
    if d.norm() < smin {
        Complex64::new(smin, 0.0)
    } else {
        d
    }
}

/// Right eigenvector of the triangular factor for diagonal entry `k`.
pub(crate) fn triangular_right(t: &ComplexMatrix, k: usize, smin: f64) -> ComplexVector {
    let n = t.nrows();
    let lambda = t[(k, k)];
    let mut y = ComplexVector::zeros(n);
    y[k] = Complex64::new(1.0, 0.0);
    for i in (0..k).rev() {
        let mut acc = Complex64::new(0.0, 0.0);
        for j in (i + 1)..=k {
            acc += t[(i, j)] * y[j];
        }
        y[i] = -acc / guard(t[(i, i)] - lambda, smin);
    }
    y
}

/// Row vector `x` with `x T = lambda x` for diagonal entry `k`.
pub(crate) fn triangular_left(t: &ComplexMatrix, k: usize, smin: f64) -> ComplexVector {
    let n = t.nrows();
    let lambda = t[(k, k)];
    let mut x = ComplexVector::zeros(n);
    x[k] = Complex64::new(1.0, 0.0);
    for i in (k + 1)..n {
        let mut acc = Complex64::new(0.0, 0.0);
        for j in k..i {
            acc += x[j] * t[(j, i)];
        }
        x[i] = -acc / guard(t[(i, i)] - lambda, smin);
    }
    x
}
