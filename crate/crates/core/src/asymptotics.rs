//! The constant `a` in `gamma = +-pi + i a eps^2 + O(eps^3)` for loops
//! `X_EP + eps Xhat(t)`, from the resolvent form and from the sum over
//! spectator levels, and its check against directly computed phases.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::eppoint::{jordan_chains, JordanData};
use crate::error::{EpError, Result};
use crate::hamiltonians::{builtin, BuiltinOptions, Complex64Repr, HamiltonianFamily, ParameterLoop};
use crate::numerics::{bilinear, c64, condition_number, outer, sandwich, ComplexMatrix, ComplexVector};
use crate::phase::{phase_double_cycle, wrap_angle};
use crate::spectral::frames_of;

/// Largest accepted condition number of `G = H_EP - E_EP + |chi1><chi1~|`.
pub const G_CONDITION_MAX: f64 = 1e8;
/// Smallest accepted distance of a spectator level from `E_EP`.
pub const SPECTATOR_GAP_MIN: f64 = 1e-3;
/// Smallest accepted distance between two spectator levels.
pub const SPECTATOR_SPLIT_MIN: f64 = 1e-6;
/// Sweep deviations below this are treated as zero (no fit attempted).
pub const FLAT_LEVEL: f64 = 1e-9;

/// Quadrature value at `N` samples with `|value(N) - value(N/2)|`.
#[derive(Debug, Clone, Copy)]
pub struct Estimate {
    pub value: Complex64,
    pub error: f64,
    pub samples: usize,
}

#[derive(Debug, Clone)]
pub struct LevelContribution {
    /// Index in the sorted spectrum of `H_EP`.
    pub level: usize,
    pub energy: Complex64,
    pub contribution: Complex64,
}

/// Levels of `H_EP` other than the degenerate pair, with biorthonormal
/// frames.
#[derive(Debug, Clone)]
pub struct Spectators {
    pub levels: Vec<usize>,
    pub energies: Vec<Complex64>,
    pub right: Vec<ComplexVector>,
    pub left: Vec<ComplexVector>,
}

impl Spectators {
    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }
}

pub fn spectators(family: &HamiltonianFamily, jd: &JordanData) -> Result<Spectators> {
    let h = family.evaluate(&jd.x_ep);
    let sys = frames_of(&h, jd.x_ep.clone())?;
    let mut order: Vec<usize> = (0..sys.len()).collect();
    order.sort_by(|&a, &b| {
        (sys.values[a] - jd.e_ep)
            .norm()
            .total_cmp(&(sys.values[b] - jd.e_ep).norm())
    });
    let mut levels: Vec<usize> = order.into_iter().skip(2).collect();
    levels.sort_unstable();
    for &k in &levels {
        let gap = (sys.values[k] - jd.e_ep).norm();
        if gap < SPECTATOR_GAP_MIN {
            return Err(EpError::NearTripleDegeneracy(format!(
                "level {k} lies {gap:.3e} from the EP energy"
            )));
        }
    }
    for (i, &k) in levels.iter().enumerate() {
        for &l in &levels[i + 1..] {
            let split = (sys.values[k] - sys.values[l]).norm();
            if split < SPECTATOR_SPLIT_MIN {
                return Err(EpError::SpectatorDegeneracy(format!(
                    "levels {k} and {l} are {split:.3e} apart"
                )));
            }
        }
    }
    Ok(Spectators {
        energies: levels.iter().map(|&k| sys.values[k]).collect(),
        right: levels.iter().map(|&k| sys.right[k].clone()).collect(),
        left: levels.iter().map(|&k| sys.left[k].clone()).collect(),
        levels,
    })
}

/// `|| I - |chi0><chi1~| - |chi1><chi0~| - sum_k |psi_k><psi_k~| ||`
pub fn identity_resolution_residual(jd: &JordanData, spec: &Spectators) -> f64 {
    let n = jd.chi0.len();
    let mut m = ComplexMatrix::identity(n, n) - outer(&jd.chi0, &jd.left1) - outer(&jd.chi1, &jd.left0);
    for (r, l) in spec.right.iter().zip(&spec.left) {
        m -= outer(r, l);
    }
    m.norm()
}

/// `|| H_EP - |chi0><chi0~| - E_EP (|chi0><chi1~| + |chi1><chi0~|) - sum_k E_k |psi_k><psi_k~| ||`
pub fn jordan_reconstruction_residual(family: &HamiltonianFamily, jd: &JordanData, spec: &Spectators) -> f64 {
    let mut m = family.evaluate(&jd.x_ep)
        - outer(&jd.chi0, &jd.left0)
        - (outer(&jd.chi0, &jd.left1) + outer(&jd.chi1, &jd.left0)) * jd.e_ep;
    for ((r, l), e) in spec.right.iter().zip(&spec.left).zip(&spec.energies) {
        m -= outer(r, l) * *e;
    }
    m.norm()
}

/// Midpoint `H1(Xhat)` and `dH1` for each of the `n` steps of the unit loop.
fn contour_steps(family: &HamiltonianFamily, shape: &ParameterLoop, n: usize) -> Vec<(ComplexMatrix, ComplexMatrix)> {
    (0..n)
        .into_par_iter()
        .map(|k| {
            let a = shape.unit_point(k as f64 / n as f64);
            let b = shape.unit_point((k + 1) as f64 / n as f64);
            let mid = shape.unit_point((k as f64 + 0.5) / n as f64);
            let d: Vec<f64> = b.iter().zip(&a).map(|(x, y)| x - y).collect();
            (family.directional(&mid), family.directional(&d))
        })
        .collect()
}

fn with_halving<F>(n: usize, f: F) -> Result<Estimate>
where
    F: Fn(usize) -> Result<Complex64>,
{
    if n < 2 {
        return Err(EpError::InvalidOption("need at least 2 quadrature samples".into()));
    }
    let value = f(n)?;
    let error = if n.is_multiple_of(2) {
        (value - f(n / 2)?).norm()
    } else {
        f64::NAN
    };
    Ok(Estimate {
        value,
        error,
        samples: n,
    })
}

fn check_pair_in_plane(family: &HamiltonianFamily, jd: &JordanData, shape: &ParameterLoop) -> Result<()> {
    if shape.param_count() != family.param_count() || jd.param_count() != family.param_count() {
        return Err(EpError::DimensionMismatch(format!(
            "loop has {} parameters, chains {}, family {}",
            shape.param_count(),
            jd.param_count(),
            family.param_count()
        )));
    }
    Ok(())
}

/// Resolvent form:
/// `a = int 2<chi0~|H1 (G^-3 - |chi1><chi1~|) dH1|chi0> + <chi0~|H1 G^-2 dH1|chi1>
/// + <chi1~|H1 G^-2 dH1|chi0>` over the unit loop, `G = H_EP - E_EP + |chi1><chi1~|`.
pub fn correction_direct(
    family: &HamiltonianFamily,
    jd: &JordanData,
    shape: &ParameterLoop,
    n: usize,
) -> Result<Estimate> {
    check_pair_in_plane(family, jd, shape)?;
    let h = family.evaluate(&jd.x_ep);
    let dim = h.nrows();
    let g = h - ComplexMatrix::identity(dim, dim) * jd.e_ep + outer(&jd.chi1, &jd.left1);
    let cond = condition_number(&g)?;
    if !(cond <= G_CONDITION_MAX) {
        return Err(EpError::NearTripleDegeneracy(format!(
            "resolvent matrix condition number {cond:.3e} exceeds {G_CONDITION_MAX:.0e}"
        )));
    }
    let lu = g.lu();
    let solve = |v: &ComplexVector| -> Result<ComplexVector> {
        lu.solve(v)
            .ok_or_else(|| EpError::NearTripleDegeneracy("resolvent matrix is singular".into()))
    };
    with_halving(n, |n| {
        let steps = contour_steps(family, shape, n);
        let terms: Vec<Complex64> = steps
            .par_iter()
            .map(|(h1, dh1)| -> Result<Complex64> {
                let v = dh1 * &jd.chi0;
                let g1 = solve(&v)?;
                let g2 = solve(&g1)?;
                let g3 = solve(&g2)?;
                let bracket = g3 - &jd.chi1 * bilinear(&jd.left1, &v);
                let w2 = solve(&solve(&(dh1 * &jd.chi1))?)?;
                Ok(2.0 * sandwich(&jd.left0, h1, &bracket)
                    + sandwich(&jd.left0, h1, &w2)
                    + sandwich(&jd.left1, h1, &g2))
            })
            .collect::<Result<_>>()?;
        Ok(terms.into_iter().sum())
    })
}

/// Spectral form: per spectator `k` with `d = E_k - E_EP`,
/// `int 2<chi0~|H1|psi_k><psi_k~|dH1|chi0>/d^3 + <chi1~|H1|psi_k><psi_k~|dH1|chi0>/d^2
/// + <chi0~|H1|psi_k><psi_k~|dH1|chi1>/d^2`.
#[derive(Debug, Clone)]
pub struct SpectralCorrection {
    pub total: Estimate,
    pub per_level: Vec<LevelContribution>,
}

fn spectral_terms(
    steps: &[(ComplexMatrix, ComplexMatrix)],
    jd: &JordanData,
    spec: &Spectators,
) -> Vec<Complex64> {
    (0..spec.len())
        .map(|k| {
            let d = spec.energies[k] - jd.e_ep;
            let (psi, left) = (&spec.right[k], &spec.left[k]);
            let per_step: Vec<Complex64> = steps
                .par_iter()
                .map(|(h1, dh1)| {
                    let h1_psi = h1 * psi;
                    let a0 = bilinear(&jd.left0, &h1_psi);
                    let a1 = bilinear(&jd.left1, &h1_psi);
                    let b0 = sandwich(left, dh1, &jd.chi0);
                    let b1 = sandwich(left, dh1, &jd.chi1);
                    2.0 * a0 * b0 / (d * d * d) + a1 * b0 / (d * d) + a0 * b1 / (d * d)
                })
                .collect();
            per_step.into_iter().sum()
        })
        .collect()
}

pub fn correction_spectral(
    family: &HamiltonianFamily,
    jd: &JordanData,
    shape: &ParameterLoop,
    n: usize,
) -> Result<SpectralCorrection> {
    check_pair_in_plane(family, jd, shape)?;
    let spec = spectators(family, jd)?;
    let levels = spectral_terms(&contour_steps(family, shape, n), jd, &spec);
    let total = with_halving(n, |m| {
        if m == n {
            Ok(levels.iter().sum())
        } else {
            Ok(spectral_terms(&contour_steps(family, shape, m), jd, &spec).iter().sum())
        }
    })?;
    let per_level = levels
        .into_iter()
        .enumerate()
        .map(|(i, contribution)| LevelContribution {
            level: spec.levels[i],
            energy: spec.energies[i],
            contribution,
        })
        .collect();
    Ok(SpectralCorrection { total, per_level })
}

#[derive(Debug, Clone)]
pub struct SweepEntry {
    pub epsilon: f64,
    pub gamma: Complex64,
    /// `gamma - pi` with the real part mapped to `(-pi, pi]`.
    pub deviation: Complex64,
    pub error: f64,
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub entries: Vec<SweepEntry>,
    /// Least-squares slope of `ln|gamma - pi|` against `ln eps`; absent when
    /// every deviation is below [`FLAT_LEVEL`].
    pub fitted_exponent: Option<f64>,
    /// `(gamma - pi) / (i eps^2)` extrapolated linearly to `eps = 0` from the
    /// two smallest `eps`.
    pub fitted_coefficient: Option<Complex64>,
}

impl SweepReport {
    pub fn is_flat(&self) -> bool {
        self.entries.iter().all(|e| e.deviation.norm() <= FLAT_LEVEL)
    }

    /// CSV rows `epsilon, Re gamma, Im gamma, Re (gamma - pi), Im (gamma - pi), error`.
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("epsilon,re_gamma,im_gamma,re_gamma_minus_pi,im_gamma_minus_pi,error_estimate\n");
        for e in &self.entries {
            out.push_str(&format!(
                "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}\n",
                e.epsilon, e.gamma.re, e.gamma.im, e.deviation.re, e.deviation.im, e.error
            ));
        }
        out
    }
}

/// Least-squares slope of `ys` against `xs`.
pub fn ols_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Double-cycle phases on the loops `X_EP + eps Xhat` for each `eps`.
pub fn epsilon_sweep(
    family: &HamiltonianFamily,
    jd: &JordanData,
    shape: &ParameterLoop,
    lower: usize,
    eps_list: &[f64],
    n: usize,
) -> Result<SweepReport> {
    if eps_list.is_empty() {
        return Err(EpError::InvalidOption("empty epsilon list".into()));
    }
    if eps_list.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
        return Err(EpError::InvalidOption("epsilon values must be positive".into()));
    }
    let base = shape.with_center(jd.x_ep.clone()).with_samples(n);
    let mut entries: Vec<SweepEntry> = eps_list
        .par_iter()
        .map(|&eps| {
            let r = phase_double_cycle(family, &base.with_epsilon(eps), lower)?;
            let deviation = c64(wrap_angle(r.gamma.re - PI), r.gamma.im);
            Ok(SweepEntry {
                epsilon: eps,
                gamma: r.gamma,
                deviation,
                error: r.discretization_error,
            })
        })
        .collect::<Result<_>>()?;
    entries.sort_by(|a, b| a.epsilon.total_cmp(&b.epsilon));

    let flat = entries.iter().all(|e| e.deviation.norm() <= FLAT_LEVEL);
    if flat {
        return Ok(SweepReport {
            entries,
            fitted_exponent: None,
            fitted_coefficient: None,
        });
    }
    for e in &entries {
        if !(e.error < e.deviation.norm()) {
            return Err(EpError::NoisySweep {
                epsilon: e.epsilon,
                error: e.error,
                deviation: e.deviation.norm(),
            });
        }
    }
    let fitted_exponent = if entries.len() >= 2 {
        let xs: Vec<f64> = entries.iter().map(|e| e.epsilon.ln()).collect();
        let ys: Vec<f64> = entries.iter().map(|e| e.deviation.norm().ln()).collect();
        Some(ols_slope(&xs, &ys))
    } else {
        None
    };
    let coefficient = |e: &SweepEntry| e.deviation / (c64(0.0, 1.0) * e.epsilon * e.epsilon);
    let fitted_coefficient = match entries.as_slice() {
        [] => None,
        [only] => Some(coefficient(only)),
        [e1, e2, ..] => {
            let (c1, c2) = (coefficient(e1), coefficient(e2));
            Some(c1 - (c2 - c1) * (e1.epsilon / (e2.epsilon - e1.epsilon)))
        }
    };
    Ok(SweepReport {
        entries,
        fitted_exponent,
        fitted_coefficient,
    })
}

#[derive(Debug, Clone)]
pub struct DivergenceReport {
    /// `(delta, a)` for every spectator offset that could be processed.
    pub entries: Vec<(f64, Complex64)>,
    /// Least-squares slope of `ln|a|` against `ln delta` over the three
    /// smallest offsets.
    pub slope: Option<f64>,
    /// Why the scan stopped early, if it did.
    pub truncated: Option<String>,
}

/// `a(delta)` for gen3 with spectator level `delta`, other options as in
/// `base`, on the EP chains at the origin.
pub fn divergence_scan(
    base: &BuiltinOptions,
    delta_list: &[f64],
    shape: &ParameterLoop,
    n: usize,
) -> Result<DivergenceReport> {
    if delta_list.is_empty() {
        return Err(EpError::InvalidOption("empty delta list".into()));
    }
    if delta_list.iter().any(|d| !(d.is_finite() && d.abs() >= 1e-2)) {
        return Err(EpError::InvalidOption("delta values must satisfy |delta| >= 1e-2".into()));
    }
    let mut entries = Vec::new();
    let mut truncated = None;
    for &delta in delta_list {
        let opts = BuiltinOptions {
            delta: Complex64Repr(delta, 0.0),
            ..*base
        };
        let step = (|| -> Result<Complex64> {
            let family = builtin("gen3", &opts)?;
            let origin = vec![0.0; family.param_count()];
            let jd = jordan_chains(&family, &origin, c64(0.0, 0.0))?;
            Ok(correction_spectral(&family, &jd, &shape.with_center(origin), n)?.total.value)
        })();
        match step {
            Ok(a) => entries.push((delta, a)),
            Err(e @ (EpError::NearTripleDegeneracy(_) | EpError::NotSimpleEp(_))) => {
                truncated = Some(format!("stopped at delta = {delta}: {e}"));
                break;
            }
            Err(e) => return Err(e),
        }
    }
    let mut by_size: Vec<(f64, Complex64)> = entries.clone();
    by_size.sort_by(|a, b| a.0.abs().total_cmp(&b.0.abs()));
    let slope = if by_size.len() >= 3 {
        let xs: Vec<f64> = by_size[..3].iter().map(|(d, _)| d.abs().ln()).collect();
        let ys: Vec<f64> = by_size[..3].iter().map(|(_, a)| a.norm().ln()).collect();
        Some(ols_slope(&xs, &ys))
    } else {
        None
    };
    Ok(DivergenceReport {
        entries,
        slope,
        truncated,
    })
}
