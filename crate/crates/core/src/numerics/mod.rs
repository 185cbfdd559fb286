//! Dense complex linear algebra used by every other module.
//!
//! Left covectors are stored as plain vectors and paired with right vectors
//! through the unconjugated bilinear form `<u|v> = sum_i u_i v_i`.

mod jacobi;
mod schur;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{EpError, Result};

pub type ComplexMatrix = DMatrix<Complex64>;
pub type ComplexVector = DVector<Complex64>;

pub const MAX_DIM: usize = 64;

pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Unconjugated pairing `<u|v> = sum_i u_i v_i`.
pub fn bilinear(u: &ComplexVector, v: &ComplexVector) -> Complex64 {
    u.iter().zip(v.iter()).map(|(a, b)| a * b).sum()
}

/// `<u|A|v>` in the bilinear convention.
pub fn sandwich(u: &ComplexVector, a: &ComplexMatrix, v: &ComplexVector) -> Complex64 {
    bilinear(u, &(a * v))
}

/// Rank-one operator `|v><u|` (right vector `v`, left covector `u`).
pub fn outer(v: &ComplexVector, u: &ComplexVector) -> ComplexMatrix {
    v * u.transpose()
}

/// Transpose without conjugation.
pub fn transpose(a: &ComplexMatrix) -> ComplexMatrix {
    a.transpose()
}

pub fn check_square(a: &ComplexMatrix) -> Result<usize> {
    if a.nrows() != a.ncols() {
        return Err(EpError::NonSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    if a.nrows() > MAX_DIM {
        return Err(EpError::DimensionTooLarge(a.nrows()));
    }
    Ok(a.nrows())
}

pub fn check_finite(a: &ComplexMatrix, what: &str) -> Result<()> {
    if a.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(EpError::NonFinite(what.to_string()))
    }
}

/// Scale `v` to unit Euclidean norm with its first non-negligible component
/// real and positive.
pub fn normalize_phase(v: &ComplexVector) -> ComplexVector {
    let norm = v.norm();
    if norm == 0.0 {
        return v.clone();
    }
    let w = v / Complex64::new(norm, 0.0);
    let threshold = 1e-8;
    let pivot = w
        .iter()
        .find(|z| z.norm() > threshold)
        .copied()
        .unwrap_or(Complex64::new(1.0, 0.0));
    let phase = pivot / pivot.norm();
    w / phase
}

/// One eigentriple: eigenvalue, right vector, left vector (bilinear covector).
#[derive(Debug, Clone)]
pub struct EigenTriple {
    pub value: Complex64,
    pub right: ComplexVector,
    pub left: ComplexVector,
}

/// General (nonsymmetric) complex eigendecomposition.
///
/// Right vectors satisfy `A v = lambda v`; left vectors satisfy
/// `u^T A = lambda u^T`. Both are returned with unit Euclidean norm and are
/// not biorthonormalized. Output is sorted by real part, then imaginary part.
pub fn eig_general(a: &ComplexMatrix) -> Result<Vec<EigenTriple>> {
    let n = check_square(a)?;
    check_finite(a, "eigenproblem input")?;
    let s = schur::schur(a)?;
    let smin = (f64::EPSILON * s.t.norm()).max(f64::MIN_POSITIVE * 1e3);
    let q_conj = s.q.map(|z| z.conj());

    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let y = schur::triangular_right(&s.t, k, smin);
        let x = schur::triangular_left(&s.t, k, smin);
        let right = &s.q * y;
        let left = &q_conj * x;
        out.push(EigenTriple {
            value: s.t[(k, k)],
            right: unit(&right),
            left: unit(&left),
        });
    }
    out.sort_by(|p, q| {
        p.value
            .re
            .total_cmp(&q.value.re)
            .then(p.value.im.total_cmp(&q.value.im))
    });
    Ok(out)
}

fn unit(v: &ComplexVector) -> ComplexVector {
    let n = v.norm();
    if n == 0.0 {
        v.clone()
    } else {
        v / Complex64::new(n, 0.0)
    }
}

/// Full SVD with singular values sorted in descending order.
///
/// `u` comes from the right singular vectors of `A^H`, each rotated so that
/// `u_i^H A v_i` is real and non-negative; for repeated singular values the
/// columns of `u` and `v` span matching subspaces but need not pair up.
pub(crate) struct SortedSvd {
    pub u: ComplexMatrix,
    pub sigma: Vec<f64>,
    pub v: ComplexMatrix,
}

pub(crate) fn svd_sorted(a: &ComplexMatrix) -> Result<SortedSvd> {
    check_square(a)?;
    check_finite(a, "svd input")?;
    let (sigma, v) = jacobi::right_svd(a)?;
    let (_, mut u) = jacobi::right_svd(&a.adjoint())?;
    for i in 0..sigma.len() {
        let c = u.column(i).dotc(&(a * v.column(i)));
        if c.norm() > 0.0 {
            let phase = c / c.norm();
            for r in 0..u.nrows() {
                u[(r, i)] *= phase;
            }
        }
    }
    Ok(SortedSvd { u, sigma, v })
}

/// Result of [`svd_smallest`].
#[derive(Debug, Clone)]
pub struct SmallestSingular {
    pub sigma_min: f64,
    /// Second-smallest singular value (infinite for 1x1 input).
    pub sigma_second: f64,
    pub right: ComplexVector,
    pub left: ComplexVector,
}

/// Smallest singular triple: `A v = sigma u` with `||v|| = ||u|| = 1`.
pub fn svd_smallest(a: &ComplexMatrix) -> Result<SmallestSingular> {
    let n = check_square(a)?;
    if n == 0 {
        return Err(EpError::DimensionMismatch("empty matrix".into()));
    }
    let s = svd_sorted(a)?;
    let last = n - 1;
    Ok(SmallestSingular {
        sigma_min: s.sigma[last],
        sigma_second: if n > 1 { s.sigma[last - 1] } else { f64::INFINITY },
        right: s.v.column(last).into_owned(),
        left: s.u.column(last).into_owned(),
    })
}

/// Minimum-norm least-squares solution of `A x = b`.
///
/// Singular values at or below `tol * sigma_max` are treated as zero. The
/// system must be consistent: the residual may not exceed `tol * ||b||`.
pub fn solve_min_norm(a: &ComplexMatrix, b: &ComplexVector, tol: f64) -> Result<ComplexVector> {
    let n = check_square(a)?;
    if b.len() != n {
        return Err(EpError::DimensionMismatch(format!(
            "right-hand side has length {}, matrix is {n}x{n}",
            b.len()
        )));
    }
    let s = svd_sorted(a)?;
    let sigma_max = s.sigma.first().copied().unwrap_or(0.0);
    let cutoff = tol * sigma_max;
    let mut x = ComplexVector::zeros(n);
    // Only `v` enters: u_i = A v_i / sigma_i.
    for (i, &sigma) in s.sigma.iter().enumerate() {
        if sigma <= cutoff || sigma == 0.0 {
            continue;
        }
        let vi = s.v.column(i);
        let coeff = (a * vi).dotc(b) / (sigma * sigma);
        x += vi * coeff;
    }
    let residual = (a * &x - b).norm();
    let bound = tol * b.norm() + 1e3 * f64::EPSILON * (sigma_max * x.norm() + b.norm());
    if residual > bound {
        return Err(EpError::InconsistentSystem { residual, bound });
    }
    Ok(x)
}

/// Spectral condition number `sigma_max / sigma_min`.
pub fn condition_number(a: &ComplexMatrix) -> Result<f64> {
    let s = svd_sorted(a)?;
    let max = s.sigma.first().copied().unwrap_or(0.0);
    let min = s.sigma.last().copied().unwrap_or(0.0);
    Ok(if min == 0.0 { f64::INFINITY } else { max / min })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(rows: &[&[Complex64]]) -> ComplexMatrix {
        ComplexMatrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j])
    }

    fn r(x: f64) -> Complex64 {
        c64(x, 0.0)
    }

    fn parallel(u: &ComplexVector, v: &ComplexVector) -> f64 {
        // |u^H v| / (|u||v|), 1 when collinear
        u.dotc(v).norm() / (u.norm() * v.norm())
    }

    #[test]
    fn identity_has_unit_eigenvalues() {
        let eig = eig_general(&ComplexMatrix::identity(2, 2)).unwrap();
        assert_eq!(eig.len(), 2);
        for t in &eig {
            assert!((t.value - r(1.0)).norm() < 1e-14);
            assert!((t.right.norm() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn two_by_two_off_diagonal() {
        let a = mat(&[&[r(0.0), r(1.0)], &[r(1.0), r(0.0)]]);
        let eig = eig_general(&a).unwrap();
        assert!((eig[0].value - r(-1.0)).norm() < 1e-13);
        assert!((eig[1].value - r(1.0)).norm() < 1e-13);
        let plus = ComplexVector::from_vec(vec![r(1.0), r(1.0)]);
        let minus = ComplexVector::from_vec(vec![r(1.0), r(-1.0)]);
        assert!((parallel(&eig[1].right, &plus) - 1.0).abs() < 1e-12);
        assert!((parallel(&eig[0].right, &minus) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn diagonal_gives_basis_vectors() {
        let a = mat(&[&[c64(1.0, 2.0), r(0.0)], &[r(0.0), r(3.0)]]);
        let eig = eig_general(&a).unwrap();
        assert!((eig[0].value - c64(1.0, 2.0)).norm() < 1e-14);
        assert!((eig[1].value - r(3.0)).norm() < 1e-14);
        assert!((eig[0].right[0].norm() - 1.0).abs() < 1e-14);
        assert!((eig[0].left[0].norm() - 1.0).abs() < 1e-14);
        assert!((eig[1].right[1].norm() - 1.0).abs() < 1e-14);
        assert!((eig[1].left[1].norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn non_square_is_rejected() {
        let a = ComplexMatrix::zeros(2, 3);
        assert!(matches!(eig_general(&a), Err(EpError::NonSquare { .. })));
        assert!(matches!(svd_smallest(&a), Err(EpError::NonSquare { .. })));
    }

    #[test]
    fn jordan_block_eigenvalues() {
        let a = mat(&[&[r(0.0), r(1.0)], &[r(0.0), r(0.0)]]);
        let eig = eig_general(&a).unwrap();
        for t in &eig {
            assert!(t.value.norm() < 1e-12);
            assert!((a.clone() * &t.right).norm() < 1e-12);
        }
    }

    #[test]
    fn smallest_singular_of_diag() {
        let a = mat(&[&[r(0.0), r(0.0)], &[r(0.0), r(5.0)]]);
        let s = svd_smallest(&a).unwrap();
        assert!(s.sigma_min.abs() < 1e-14);
        assert!((s.sigma_second - 5.0).abs() < 1e-12);
        assert!((s.right[0].norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn smallest_singular_of_nilpotent() {
        let a = mat(&[&[r(0.0), r(1.0)], &[r(0.0), r(0.0)]]);
        let s = svd_smallest(&a).unwrap();
        assert!(s.sigma_min.abs() < 1e-14);
        assert!((s.right[0].norm() - 1.0).abs() < 1e-12);
        assert!((s.left[1].norm() - 1.0).abs() < 1e-12);
        let s3 = svd_smallest(&ComplexMatrix::identity(3, 3)).unwrap();
        assert!((s3.sigma_min - 1.0).abs() < 1e-14);
    }

    #[test]
    fn min_norm_solutions() {
        let a = mat(&[&[r(1.0), r(0.0)], &[r(0.0), r(2.0)]]);
        let b = ComplexVector::from_vec(vec![r(1.0), r(2.0)]);
        let x = solve_min_norm(&a, &b, 1e-10).unwrap();
        assert!((x[0] - r(1.0)).norm() < 1e-14 && (x[1] - r(1.0)).norm() < 1e-14);

        let n = mat(&[&[r(0.0), r(1.0)], &[r(0.0), r(0.0)]]);
        let x = solve_min_norm(&n, &ComplexVector::from_vec(vec![r(1.0), r(0.0)]), 1e-10).unwrap();
        assert!(x[0].norm() < 1e-14 && (x[1] - r(1.0)).norm() < 1e-14);

        let err = solve_min_norm(&n, &ComplexVector::from_vec(vec![r(0.0), r(1.0)]), 1e-10);
        assert!(matches!(err, Err(EpError::InconsistentSystem { .. })));
    }

    #[test]
    fn normalize_phase_fixes_first_component() {
        let v = ComplexVector::from_vec(vec![c64(0.0, 2.0), c64(1.0, 1.0)]);
        let w = normalize_phase(&v);
        assert!((w.norm() - 1.0).abs() < 1e-15);
        assert!(w[0].im.abs() < 1e-15 && w[0].re > 0.0);
    }
}
