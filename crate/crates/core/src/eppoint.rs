//! EP location by Newton iteration on `p(X) = (E_{n+1} - E_n)^2 / 4`, Jordan
//! chains with the normalization `<chi1~|chi0> = <chi0~|chi1> = 1`,
//! `<chi1~|chi1> = 0`, and the linearization `mu(X)`.

use num_complex::Complex64;

use crate::error::{EpError, Result};
use crate::hamiltonians::HamiltonianFamily;
use crate::numerics::{
    bilinear, c64, eig_general, normalize_phase, sandwich, solve_min_norm, svd_sorted, ComplexMatrix,
    ComplexVector,
};

pub const NEWTON_MAX_ITERATIONS: usize = 50;
const NEWTON_RELATIVE_STEP: f64 = 1e-6;
const NEWTON_P_TOLERANCE: f64 = 1e-14;
const NEWTON_GAP_TOLERANCE: f64 = 1e-7;

/// Precondition thresholds for [`jordan_chains`].
pub const CHAIN_SIGMA_MIN: f64 = 1e-8;
pub const CHAIN_SIGMA_SECOND: f64 = 1e-3;
const CHAIN_SOLVE_TOL: f64 = 1e-6;
const CHAIN_PAIRING_MIN: f64 = 1e-10;

/// Converged EP location.
#[derive(Debug, Clone)]
pub struct EpLocation {
    pub x: Vec<f64>,
    pub energy: Complex64,
    pub p_abs: f64,
    pub gap: f64,
    pub iterations: usize,
    /// `|p|` at every Newton iterate, starting from the guess.
    pub history: Vec<f64>,
}

fn nearest_pair(values: &[Complex64], prev: (Complex64, Complex64)) -> (Complex64, Complex64) {
    let mut best = (values[0], values[values.len().min(2) - 1]);
    let mut best_cost = f64::INFINITY;
    for i in 0..values.len() {
        for j in 0..values.len() {
            if i == j {
                continue;
            }
            let cost = (values[i] - prev.0).norm() + (values[j] - prev.1).norm();
            if cost < best_cost {
                best_cost = cost;
                best = (values[i], values[j]);
            }
        }
    }
    best
}

fn pair_at(family: &HamiltonianFamily, x: &[f64], prev: (Complex64, Complex64)) -> Result<(Complex64, Complex64)> {
    let eig = eig_general(&family.evaluate(x))?;
    let values: Vec<Complex64> = eig.iter().map(|t| t.value).collect();
    Ok(nearest_pair(&values, prev))
}

fn p_of(pair: (Complex64, Complex64)) -> Complex64 {
    let d = pair.1 - pair.0;
    d * d / 4.0
}

/// Newton iteration on `(Re p, Im p)` over the coordinates `coords`, other
/// parameters frozen at the guess. The pair is `(lower, lower + 1)` of the
/// sorted spectrum at the guess and is followed by nearest-eigenvalue
/// matching between iterates.
pub fn locate_ep(
    family: &HamiltonianFamily,
    guess: &[f64],
    lower: usize,
    coords: (usize, usize),
) -> Result<EpLocation> {
    let m = family.param_count();
    if guess.len() != m {
        return Err(EpError::DimensionMismatch(format!(
            "guess has {} components, family has {m} parameters",
            guess.len()
        )));
    }
    if coords.0 == coords.1 || coords.0 >= m || coords.1 >= m {
        return Err(EpError::InvalidOption(format!("invalid Newton coordinates {coords:?}")));
    }
    if lower + 1 >= family.dim() {
        return Err(EpError::InvalidOption(format!(
            "pair ({lower}, {}) out of range for dimension {}",
            lower + 1,
            family.dim()
        )));
    }
    let mut x = guess.to_vec();
    let eig = eig_general(&family.evaluate(&x))?;
    let mut pair = (eig[lower].value, eig[lower + 1].value);
    let mut history = Vec::new();

    for iteration in 0..=NEWTON_MAX_ITERATIONS {
        pair = pair_at(family, &x, pair)?;
        let p = p_of(pair);
        history.push(p.norm());
        let h_norm = family.evaluate(&x).norm();
        let gap = (pair.1 - pair.0).norm();
        if p.norm() <= NEWTON_P_TOLERANCE * h_norm.max(1.0).powi(2) && gap <= NEWTON_GAP_TOLERANCE {
            return Ok(EpLocation {
                x,
                energy: (pair.0 + pair.1) / 2.0,
                p_abs: p.norm(),
                gap,
                iterations: iteration,
                history,
            });
        }
        if iteration == NEWTON_MAX_ITERATIONS {
            break;
        }

        let mut columns = [c64(0.0, 0.0); 2];
        for (slot, &c) in [coords.0, coords.1].iter().enumerate() {
            let h = NEWTON_RELATIVE_STEP * x[c].abs().max(1.0);
            let mut plus = x.clone();
            plus[c] += h;
            let mut minus = x.clone();
            minus[c] -= h;
            let pp = p_of(pair_at(family, &plus, pair)?);
            let pm = p_of(pair_at(family, &minus, pair)?);
            columns[slot] = (pp - pm) / (2.0 * h);
        }
        let (a, b, c, d) = (columns[0].re, columns[1].re, columns[0].im, columns[1].im);
        let det = a * d - b * c;
        let scale = columns[0].norm_sqr() + columns[1].norm_sqr();
        if !(det.abs() > 1e-12 * scale) || scale == 0.0 {
            return Err(EpError::SingularJacobian(det));
        }
        let dx0 = -(d * p.re - b * p.im) / det;
        let dx1 = -(-c * p.re + a * p.im) / det;
        x[coords.0] += dx0;
        x[coords.1] += dx1;
        if !x.iter().all(|v| v.is_finite()) {
            break;
        }
    }
    Err(EpError::NewtonNoConvergence {
        iterations: NEWTON_MAX_ITERATIONS,
        residual: history.last().copied().unwrap_or(f64::NAN),
    })
}

/// Diagnostic residuals of a Jordan chain.
#[derive(Debug, Clone, Default)]
pub struct ChainResiduals {
    pub sigma_min: f64,
    pub sigma_second: f64,
    /// `||(H - E) chi0||`
    pub right_eigen: f64,
    /// `||(H - E) chi1 - chi0||`
    pub right_chain: f64,
    /// `||(H - E)^T chi0~||`
    pub left_eigen: f64,
    /// `||(H - E)^T chi1~ - chi0~||`
    pub left_chain: f64,
    /// `|<chi0~|chi0>|`
    pub orthogonality: f64,
    /// `|<chi1~|chi0> - 1|`
    pub norm_10: f64,
    /// `|<chi0~|chi1> - 1|`
    pub norm_01: f64,
    /// `|<chi1~|chi1>|`
    pub norm_11: f64,
}

/// Jordan chains at an EP with normalization and the gradient of `mu`.
#[derive(Debug, Clone)]
pub struct JordanData {
    pub x_ep: Vec<f64>,
    pub e_ep: Complex64,
    pub chi0: ComplexVector,
    pub chi1: ComplexVector,
    pub left0: ComplexVector,
    pub left1: ComplexVector,
    /// `<chi0~| dH/dX_j |chi0>`
    pub mu_grad: Vec<Complex64>,
    /// `||H_EP||` (Frobenius)
    pub h_norm: f64,
    pub residuals: ChainResiduals,
}

impl JordanData {
    /// Applies the residual gauge `chi -> scale * chi`, `chi~ -> chi~ / scale`
    /// combined with `chi1 -> chi1 + shift * chi0`, `chi1~ -> chi1~ - shift * chi0~`.
    pub fn with_gauge(&self, scale: Complex64, shift: Complex64) -> JordanData {
        let chi0 = &self.chi0 * scale;
        let chi1 = (&self.chi1 + &self.chi0 * shift) * scale;
        let left0 = &self.left0 / scale;
        let left1 = (&self.left1 - &self.left0 * shift) / scale;
        JordanData {
            chi0,
            chi1,
            left0,
            left1,
            ..self.clone()
        }
    }

    /// Projector `|chi0><chi0~|`.
    pub fn eigen_projector(&self) -> ComplexMatrix {
        &self.chi0 * self.left0.transpose()
    }

    pub fn param_count(&self) -> usize {
        self.mu_grad.len()
    }
}

fn residuals(a: &ComplexMatrix, chi0: &ComplexVector, chi1: &ComplexVector, l0: &ComplexVector, l1: &ComplexVector) -> ChainResiduals {
    let at = a.transpose();
    ChainResiduals {
        sigma_min: 0.0,
        sigma_second: 0.0,
        right_eigen: (a * chi0).norm(),
        right_chain: (a * chi1 - chi0).norm(),
        left_eigen: (&at * l0).norm(),
        left_chain: (&at * l1 - l0).norm(),
        orthogonality: bilinear(l0, chi0).norm(),
        norm_10: (bilinear(l1, chi0) - 1.0).norm(),
        norm_01: (bilinear(l0, chi1) - 1.0).norm(),
        norm_11: bilinear(l1, chi1).norm(),
    }
}

/// Right and left Jordan chains of the defective eigenvalue `e_ep` of
/// `H(x_ep)`.
///
/// The residual scale is fixed by `chi0` having unit norm with its first
/// significant component real positive. For symmetric families the chains
/// are instead gauged so that the left chain equals the right chain.
pub fn jordan_chains(family: &HamiltonianFamily, x_ep: &[f64], e_ep: Complex64) -> Result<JordanData> {
    let h = family.evaluate(x_ep);
    let n = h.nrows();
    if n < 2 {
        return Err(EpError::NotSimpleEp("dimension below 2".into()));
    }
    let a = &h - ComplexMatrix::identity(n, n) * e_ep;
    let svd = svd_sorted(&a)?;
    let sigma_min = svd.sigma[n - 1];
    let sigma_second = svd.sigma[n - 2];
    if sigma_min > CHAIN_SIGMA_MIN {
        return Err(EpError::NotSimpleEp(format!(
            "smallest singular value {sigma_min:.3e} of H - E exceeds {CHAIN_SIGMA_MIN:.0e}"
        )));
    }
    if sigma_second < CHAIN_SIGMA_SECOND {
        return Err(EpError::NotSimpleEp(format!(
            "second singular value {sigma_second:.3e} below {CHAIN_SIGMA_SECOND:.0e} (diabolic point or higher-order degeneracy)"
        )));
    }
    let mut chi0 = normalize_phase(&svd.v.column(n - 1).into_owned());
    let mut left0: ComplexVector = svd.u.column(n - 1).map(|z| z.conj());
    let mut chi1 = solve_min_norm(&a, &chi0, CHAIN_SOLVE_TOL)?;
    let mut left1 = solve_min_norm(&a.transpose(), &left0, CHAIN_SOLVE_TOL)?;

    let c = bilinear(&left0, &chi1);
    if c.norm() < CHAIN_PAIRING_MIN {
        return Err(EpError::InconsistentChain(c.norm()));
    }
    // <chi1~|chi0> = <chi1~|A chi1> = <A^T chi1~|chi1> = <chi0~|chi1>, so one
    // scaling of the left chain fixes both unit pairings.
    left0 /= c;
    left1 /= c;
    let beta = bilinear(&left1, &chi1);
    chi1 -= &chi0 * beta;

    if family.is_symmetric() {
        // Left null vector is kappa * chi0; rescale so that it equals chi0,
        // then shift chi1 to make chi1^T chi1 = 0 and use the right chain as
        // the left chain.
        let kappa = bilinear(&left0, &chi0.map(|z| z.conj())) / chi0.norm_squared();
        let root = kappa.sqrt();
        chi0 *= root;
        chi1 *= root;
        let b = -bilinear(&chi1, &chi1) / (2.0 * bilinear(&chi0, &chi1));
        chi1 += &chi0 * b;
        left0 = chi0.clone();
        left1 = chi1.clone();
    }

    let mut res = residuals(&a, &chi0, &chi1, &left0, &left1);
    res.sigma_min = sigma_min;
    res.sigma_second = sigma_second;
    let mu_grad = (0..family.param_count())
        .map(|j| sandwich(&left0, &family.derivative(x_ep, j), &chi0))
        .collect();
    Ok(JordanData {
        x_ep: x_ep.to_vec(),
        e_ep,
        chi0,
        chi1,
        left0,
        left1,
        mu_grad,
        h_norm: h.norm(),
        residuals: res,
    })
}

/// `mu(X) = sum_j <chi0~|dH/dX_j|chi0> (X_j - X_EP_j)`
pub fn mu_at(jd: &JordanData, x: &[f64]) -> Complex64 {
    jd.mu_grad
        .iter()
        .zip(x.iter().zip(&jd.x_ep))
        .map(|(g, (xi, x0))| g * (xi - x0))
        .sum()
}

/// Orthonormal basis of the real null space of `[Re mu_grad; Im mu_grad]`,
/// i.e. the tangent space of the EP set. Empty for two parameters.
pub fn ep_tangent(jd: &JordanData) -> Result<Vec<Vec<f64>>> {
    let m = jd.mu_grad.len();
    let re: Vec<f64> = jd.mu_grad.iter().map(|g| g.re).collect();
    let im: Vec<f64> = jd.mu_grad.iter().map(|g| g.im).collect();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let scale = dot(&re, &re).max(dot(&im, &im)).sqrt();
    let degenerate = || EpError::DegenerateParametrization("Re mu and Im mu gradients are linearly dependent".into());
    if scale == 0.0 {
        return Err(degenerate());
    }

    let mut basis: Vec<Vec<f64>> = Vec::new();
    for row in [re, im] {
        let mut v = row.clone();
        for b in &basis {
            let c = dot(&v, b);
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
        }
        let norm = dot(&v, &v).sqrt();
        if norm <= 1e-9 * scale {
            return Err(degenerate());
        }
        basis.push(v.iter().map(|x| x / norm).collect());
    }

    let mut tangent = Vec::new();
    for j in 0..m {
        if tangent.len() == m - 2 {
            break;
        }
        let mut v = vec![0.0; m];
        v[j] = 1.0;
        for _ in 0..2 {
            for b in basis.iter().chain(tangent.iter()) {
                let c = dot(&v, b);
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        let norm = dot(&v, &v).sqrt();
        if norm > 1e-8 {
            tangent.push(v.iter().map(|x| x / norm).collect::<Vec<f64>>());
        }
    }
    Ok(tangent)
}

/// `<psi|psi> / (2 sqrt(mu))` near the EP of a symmetric family, with `psi`
/// one of the two eigenvectors merging at the EP, scaled so that
/// `<chi1~|psi> = 1`, and `sqrt(mu)` taken on the branch matching
/// `<chi0~|psi>`. Tends to one as `X -> X_EP`.
pub fn expansion_ratio(family: &HamiltonianFamily, jd: &JordanData, x: &[f64]) -> Result<Complex64> {
    let eig = eig_general(&family.evaluate(x))?;
    let closest = eig
        .iter()
        .min_by(|a, b| (a.value - jd.e_ep).norm().total_cmp(&(b.value - jd.e_ep).norm()))
        .ok_or_else(|| EpError::DimensionMismatch("empty spectrum".into()))?;
    let psi = &closest.right / bilinear(&jd.left1, &closest.right);
    let w = bilinear(&psi, &psi);
    let root = mu_at(jd, x).sqrt();
    let projection = bilinear(&jd.left0, &psi);
    let branch = if (projection - root).norm() <= (projection + root).norm() {
        root
    } else {
        -root
    };
    Ok(w / (2.0 * branch))
}
