//! One-sided (Hestenes) Jacobi SVD for square complex matrices.
//!
//! Columns of `A V` are made mutually orthogonal by plane rotations; their
//! norms are the singular values. Right singular vectors stay accurate for
//! exactly or nearly rank-deficient input.

use num_complex::Complex64;

use super::ComplexMatrix;
use crate::error::{EpError, Result};

const MAX_SWEEPS: usize = 80;

/// Singular values (descending) and the matching right singular vectors.
pub(crate) fn right_svd(a: &ComplexMatrix) -> Result<(Vec<f64>, ComplexMatrix)> {
    let n = a.ncols();
    let mut w = a.clone();
    let mut v = ComplexMatrix::identity(n, n);
    let tol = f64::EPSILON * n as f64;

    let mut converged = n < 2;
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        converged = true;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = w.column(p).norm_squared();
                let beta = w.column(q).norm_squared();
                let gamma = w.column(p).dotc(&w.column(q));
                let g = gamma.norm();
                if g == 0.0 || g <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                converged = false;
                let phase = gamma / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut w, p, q, c, s, phase);
                rotate(&mut v, p, q, c, s, phase);
            }
        }
    }
    if !converged {
        return Err(EpError::SvdNoConvergence);
    }

    let sigma: Vec<f64> = (0..n).map(|j| w.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| sigma[j].total_cmp(&sigma[i]));
    let sorted = order.iter().map(|&i| sigma[i]).collect();
    let v = ComplexMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok((sorted, v))
}

/// Columns `p`, `q` of `m` replaced by `c x - s y`, `s x + c y` with
/// `y = conj(phase) * m_q`.
fn rotate(m: &mut ComplexMatrix, p: usize, q: usize, c: f64, s: f64, phase: Complex64) {
    let back = phase.conj();
    for i in 0..m.nrows() {
        let x = m[(i, p)];
        let y = m[(i, q)] * back;
        m[(i, p)] = x * c - y * s;
        m[(i, q)] = x * s + y * c;
    }
}
