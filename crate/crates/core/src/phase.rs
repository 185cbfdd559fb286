//! Geometric phase of an eigenvalue pair around an EP by three methods:
//! discrete connection over the double cycle, winding of `<psi|psi>` for
//! symmetric families, and the single-cycle versal formula.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::eppoint::JordanData;
use crate::error::{EpError, Result};
use crate::hamiltonians::{HamiltonianFamily, ParameterLoop};
use crate::numerics::{bilinear, c64, ComplexMatrix, ComplexVector};
use crate::spectral::{track_pair, BranchTrack};
use crate::versal::{versal_along_loop, winding_number, VersalFrames};

/// Per-step overlap defect above which the principal logarithm is unsafe.
const LOG_STEP_LIMIT: f64 = 0.5;
/// `|w| / ||psi||^2` below which the winding path is considered to hit zero.
const WINDING_ZERO: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseMethod {
    DoubleCycle,
    Winding,
    Versal,
}

impl PhaseMethod {
    pub fn name(self) -> &'static str {
        match self {
            PhaseMethod::DoubleCycle => "double_cycle",
            PhaseMethod::Winding => "winding",
            PhaseMethod::Versal => "versal",
        }
    }
}

#[derive(Debug, Clone)]
pub struct PhaseResult {
    /// Real part in `(-pi, pi]`.
    pub gamma: Complex64,
    pub method: PhaseMethod,
    /// `|gamma(N) - gamma(N/2)|`, real parts compared mod `2 pi`.
    pub discretization_error: f64,
    pub samples: usize,
    /// Loop turns entering the result (1 when the pair does not swap).
    pub cycles: usize,
    /// Winding number of `w` (winding method) or of `p` (versal method).
    pub winding: Option<i64>,
    /// Integral over one cycle of the versal formula, without the `+-pi`.
    pub residual: Option<Complex64>,
    pub decomposition: Option<Decomposition>,
}

/// The three integrals over the double cycle whose sum is the phase.
#[derive(Debug, Clone, Copy)]
pub struct Decomposition {
    /// `(i/2) int d ln sqrt(p)`
    pub i1: Complex64,
    /// `i int (<chi0~|dchi0> + p <chi1~|dchi1>) / (2 sqrt(p))`
    pub i2: Complex64,
    /// `(i/2) int (<chi0~|dchi1> + <chi1~|dchi0>)`
    pub i3: Complex64,
    /// Contribution of the first cycle to `i3`.
    pub i3_first_cycle: Complex64,
}

impl Decomposition {
    pub fn total(&self) -> Complex64 {
        self.i1 + self.i2 + self.i3
    }
}

/// Maps an angle to `(-pi, pi]`.
pub fn wrap_angle(x: f64) -> f64 {
    let r = (x + PI).rem_euclid(2.0 * PI) - PI;
    if r <= -PI {
        r + 2.0 * PI
    } else {
        r
    }
}

/// Real parts this close to `-pi` are reported next to `+pi` instead.
const MINUS_PI_SNAP: f64 = 64.0 * f64::EPSILON * PI;

/// `gamma` with its real part mapped to `(-pi, pi]`; a real part within
/// rounding of `-pi` is moved up by `2 pi`, so both `+-pi` print as `pi`.
pub fn principal(gamma: Complex64) -> Complex64 {
    let mut re = wrap_angle(gamma.re);
    if re <= -PI + MINUS_PI_SNAP {
        re += 2.0 * PI;
    }
    c64(re, gamma.im)
}

/// Distance between two phases with real parts compared mod `2 pi`.
pub fn phase_distance(a: Complex64, b: Complex64) -> f64 {
    wrap_angle(a.re - b.re).hypot(a.im - b.im)
}

fn principal_log_checked(z: Complex64) -> Result<Complex64> {
    if (z - 1.0).norm() >= LOG_STEP_LIMIT {
        return Err(EpError::BranchAmbiguity((z - 1.0).norm()));
    }
    Ok(z.ln())
}

/// Symmetric discrete connection `i sum 1/2 [Log<l_k|r_{k+1}> - Log<l_{k+1}|r_k>]`
/// along a closed chain whose last element is a multiple `c` of the first.
///
/// The factor `c` is first spread evenly over the chain
/// (`r_k -> r_k c^(-k/m)`), which closes the chain without changing the
/// Wilson product and keeps every step near one.
fn wilson_phase(rights: &[&ComplexVector], lefts: &[&ComplexVector]) -> Result<Complex64> {
    let m = rights.len() - 1;
    let closure = bilinear(lefts[0], rights[m]) / bilinear(lefts[0], rights[0]);
    let step_log = closure.ln() / m as f64;
    let mut acc = c64(0.0, 0.0);
    for k in 0..m {
        let fwd = bilinear(lefts[k], rights[k + 1]) / bilinear(lefts[k], rights[k]);
        let bwd = bilinear(lefts[k + 1], rights[k]) / bilinear(lefts[k + 1], rights[k + 1]);
        let fwd = fwd * (-step_log).exp();
        let bwd = bwd * step_log.exp();
        acc += principal_log_checked(fwd)? - principal_log_checked(bwd)?;
    }
    Ok(c64(0.0, 0.5) * acc)
}

fn cycles_for(track: &BranchTrack) -> usize {
    if track.swaps() {
        2
    } else {
        1
    }
}

fn double_cycle_at_stride(track: &BranchTrack, stride: usize) -> Result<Complex64> {
    let steps = cycles_for(track) * track.samples_per_cycle();
    let rights: Vec<&ComplexVector> = (0..=steps).step_by(stride).map(|k| &track.right[k][0]).collect();
    let lefts: Vec<&ComplexVector> = (0..=steps).step_by(stride).map(|k| &track.left[k][0]).collect();
    wilson_phase(&rights, &lefts)
}

/// Double-cycle phase of branch `0` of a track over at least two cycles.
///
/// When the pair does not swap after one cycle only the first cycle is used.
pub fn phase_double_cycle_track(track: &BranchTrack) -> Result<PhaseResult> {
    let cycles = cycles_for(track);
    if track.cycles < cycles {
        return Err(EpError::InvalidOption("double-cycle phase needs a two-cycle track".into()));
    }
    let n = track.samples_per_cycle();
    let gamma = double_cycle_at_stride(track, 1)?;
    let error = if n.is_multiple_of(2) {
        phase_distance(gamma, double_cycle_at_stride(track, 2)?)
    } else {
        f64::NAN
    };
    Ok(PhaseResult {
        gamma: principal(gamma),
        method: PhaseMethod::DoubleCycle,
        discretization_error: error,
        samples: n,
        cycles,
        winding: None,
        residual: None,
        decomposition: None,
    })
}

/// Geometric phase of level `lower` from the discrete connection over the
/// double cycle.
pub fn phase_double_cycle(family: &HamiltonianFamily, lp: &ParameterLoop, lower: usize) -> Result<PhaseResult> {
    let track = track_pair(family, lp, lower, 2)?;
    phase_double_cycle_track(&track)
}

fn winding_reference(vectors: &[ComplexVector]) -> ComplexVector {
    let n = vectors[0].len();
    let mut candidates: Vec<ComplexVector> = (0..n)
        .map(|j| {
            let mut e = ComplexVector::zeros(n);
            e[j] = c64(1.0, 0.0);
            e
        })
        .collect();
    let m = vectors.len();
    for k in [0, m / 4, m / 2, 3 * m / 4] {
        candidates.push(vectors[k].map(|z| z.conj()) / c64(vectors[k].norm(), 0.0));
    }
    let score = |e: &ComplexVector| {
        vectors
            .iter()
            .map(|v| bilinear(e, v).norm() / v.norm())
            .fold(f64::INFINITY, f64::min)
    };
    candidates
        .into_iter()
        .map(|e| (score(&e), e))
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, e)| e)
        .unwrap_or_else(|| ComplexVector::zeros(n))
}

fn winding_at_stride(w: &[Complex64], stride: usize) -> Result<Complex64> {
    let sub: Vec<Complex64> = w.iter().step_by(stride).copied().collect();
    let mut acc = c64(0.0, 0.0);
    for pair in sub.windows(2) {
        let ratio = pair[1] / pair[0];
        if ratio.arg().abs() >= PI / 2.0 {
            return Err(EpError::BranchAmbiguity(ratio.arg().abs()));
        }
        acc += ratio.ln();
    }
    Ok(c64(0.0, 0.5) * acc)
}

/// Phase of a symmetric family from the winding of `w = <psi|psi>` (the
/// tracked vector paired with itself) around zero over the double cycle.
///
/// The vector is scaled by a fixed reference covector so that `w` is
/// single-valued around the double cycle.
pub fn phase_winding_symmetric(family: &HamiltonianFamily, lp: &ParameterLoop, lower: usize) -> Result<PhaseResult> {
    if !family.is_symmetric() {
        return Err(EpError::NotSymmetric(family.name().to_string()));
    }
    let track = track_pair(family, lp, lower, 2)?;
    let vectors: Vec<ComplexVector> = track.right.iter().map(|r| r[0].clone()).collect();
    let reference = winding_reference(&vectors);
    let mut w = Vec::with_capacity(vectors.len());
    for v in &vectors {
        let scaled = v / bilinear(&reference, v);
        let value = bilinear(&scaled, &scaled);
        let norm = scaled.norm_squared();
        if value.norm() < WINDING_ZERO * norm {
            return Err(EpError::WindingThroughZero(WINDING_ZERO));
        }
        w.push(value);
    }
    let gamma = winding_at_stride(&w, 1)?;
    let n = track.samples_per_cycle();
    let error = if n % 2 == 0 {
        phase_distance(gamma, winding_at_stride(&w, 2)?)
    } else {
        f64::NAN
    };
    Ok(PhaseResult {
        gamma: principal(gamma),
        method: PhaseMethod::Winding,
        discretization_error: error,
        samples: n,
        cycles: 2,
        winding: Some(winding_number(&w).round() as i64),
        residual: None,
        decomposition: None,
    })
}

fn frame_matrices(f: &crate::versal::VersalFrame) -> (ComplexMatrix, ComplexMatrix) {
    let right = ComplexMatrix::from_columns(&[f.chi0.clone(), f.chi1.clone()]);
    let left = ComplexMatrix::from_rows(&[f.left1.transpose(), f.left0.transpose()]);
    (left, right)
}

/// `i sum 1/2 [Log det(L_k R_{k+1}) - Log det(L_{k+1} R_k)]` over one cycle
/// with the closing frame identified with the first.
fn versal_residual(frames: &VersalFrames) -> Result<Complex64> {
    let mats: Vec<(ComplexMatrix, ComplexMatrix)> = frames.frames.iter().map(frame_matrices).collect();
    let m = mats.len() - 1;
    let mut acc = c64(0.0, 0.0);
    for k in 0..m {
        let next = if k + 1 == m { 0 } else { k + 1 };
        let fwd = (&mats[k].0 * &mats[next].1).determinant();
        let bwd = (&mats[next].0 * &mats[k].1).determinant();
        acc += principal_log_checked(fwd)? - principal_log_checked(bwd)?;
    }
    Ok(c64(0.0, 0.5) * acc)
}

/// The three double-cycle integrals computed from single-cycle frames: on
/// the second cycle the frames repeat while `sqrt(p)` changes sign.
pub fn decomposition_from_frames(frames: &VersalFrames) -> Result<Decomposition> {
    let fr = &frames.frames;
    let m = fr.len() - 1;
    let mut log_root = c64(0.0, 0.0);
    let mut i2_sum = c64(0.0, 0.0);
    for sign in [1.0, -1.0] {
        for k in 0..m {
            let (a, b) = (&fr[k], &fr[k + 1]);
            log_root += (b.sqrt_p / a.sqrt_p).ln();
            // The closing frame is the first one; sqrt(p) is continued.
            let next = if k + 1 == m { &fr[0] } else { b };
            let d0 = &next.chi0 - &a.chi0;
            let d1 = &next.chi1 - &a.chi1;
            let mid_left0 = (&a.left0 + &next.left0) / c64(2.0, 0.0);
            let mid_left1 = (&a.left1 + &next.left1) / c64(2.0, 0.0);
            let mid_p = (a.p + b.p) / 2.0;
            let mid_root = sign * (a.sqrt_p + b.sqrt_p) / 2.0;
            let k_term = bilinear(&mid_left0, &d0) + mid_p * bilinear(&mid_left1, &d1);
            i2_sum += k_term / (2.0 * mid_root);
        }
    }
    let i_unit = c64(0.0, 1.0);
    let i3_first = versal_residual(frames)? / 2.0;
    Ok(Decomposition {
        i1: i_unit * 0.5 * log_root,
        i2: i_unit * i2_sum,
        i3: 2.0 * i3_first,
        i3_first_cycle: i3_first,
    })
}

fn versal_gamma(frames: &VersalFrames) -> Result<(Complex64, Complex64)> {
    let residual = versal_residual(frames)?;
    let sigma = -(frames.p_winding as f64);
    Ok((c64(sigma * PI, 0.0) + residual, residual))
}

/// Phase from the single-cycle versal formula `+-pi + i int (<chi0~|dchi1> +
/// <chi1~|dchi0>)`, with the sign of `pi` opposite to the winding of `p`.
pub fn phase_versal_frames(frames: &VersalFrames) -> Result<PhaseResult> {
    let (gamma, residual) = versal_gamma(frames)?;
    let n = frames.samples();
    let error = match frames.subsample(2) {
        Some(half) => phase_distance(gamma, versal_gamma(&half)?.0),
        None => f64::NAN,
    };
    Ok(PhaseResult {
        gamma: principal(gamma),
        method: PhaseMethod::Versal,
        discretization_error: error,
        samples: n,
        cycles: 1,
        winding: Some(frames.p_winding),
        residual: Some(residual),
        decomposition: Some(decomposition_from_frames(frames)?),
    })
}

/// Versal frames of level `lower` along `lp`, gauged to the EP chains when
/// `jd` is given.
pub fn versal_frames(
    family: &HamiltonianFamily,
    lp: &ParameterLoop,
    lower: usize,
    jd: Option<&JordanData>,
) -> Result<VersalFrames> {
    let track = track_pair(family, lp, lower, 1)?;
    versal_along_loop(family, &track, jd.map(|j| &j.left1))
}

pub fn phase_versal(
    family: &HamiltonianFamily,
    lp: &ParameterLoop,
    lower: usize,
    jd: Option<&JordanData>,
) -> Result<PhaseResult> {
    phase_versal_frames(&versal_frames(family, lp, lower, jd)?)
}

/// `(I1, I2, I3)` of the double-cycle decomposition.
pub fn phase_decomposition(
    family: &HamiltonianFamily,
    lp: &ParameterLoop,
    lower: usize,
    jd: Option<&JordanData>,
) -> Result<Decomposition> {
    decomposition_from_frames(&versal_frames(family, lp, lower, jd)?)
}

/// `-(1/hbar) int E(t) dt` of branch 0 over all cycles of the track with
/// period `period`, by the trapezoidal rule.
pub fn dynamical_phase(track: &BranchTrack, period: f64, hbar: f64) -> Complex64 {
    let dt = period / track.samples_per_cycle() as f64;
    let integral: Complex64 = track
        .values
        .windows(2)
        .map(|w| (w[0][0] + w[1][0]) * (0.5 * dt))
        .sum();
    -integral / hbar
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonians::{builtin, circle_loop, BuiltinOptions};

    fn fam(name: &str) -> HamiltonianFamily {
        builtin(name, &BuiltinOptions::default()).unwrap()
    }

    #[test]
    fn wrap_maps_minus_pi_to_pi() {
        assert_eq!(wrap_angle(-PI), PI);
        assert_eq!(wrap_angle(PI), PI);
        assert!((wrap_angle(3.0 * PI) - PI).abs() < 1e-15);
        assert!(wrap_angle(2.0 * PI).abs() < 1e-15);
    }

    #[test]
    fn gen2_double_cycle_is_pi() {
        let lp = circle_loop(vec![0.0, 0.0], (0, 1), 1.0, 256).unwrap();
        let r = phase_double_cycle(&fam("gen2"), &lp, 0).unwrap();
        assert!(phase_distance(r.gamma, c64(PI, 0.0)) < 1e-8, "{r:?}");
        assert_eq!(r.cycles, 2);
    }

    #[test]
    fn gen2_outside_loop_is_zero() {
        let lp = circle_loop(vec![3.0, 0.0], (0, 1), 1.0, 256).unwrap();
        let r = phase_double_cycle(&fam("gen2"), &lp, 0).unwrap();
        assert!(r.gamma.norm() < 1e-6, "{r:?}");
        assert_eq!(r.cycles, 1);
    }

    #[test]
    fn sym2_winding_is_pi() {
        let lp = circle_loop(vec![0.0, 1.0], (0, 1), 0.5, 256).unwrap();
        let r = phase_winding_symmetric(&fam("sym2"), &lp, 0).unwrap();
        assert!(phase_distance(r.gamma, c64(PI, 0.0)) < 1e-10, "{r:?}");
        assert_eq!(r.winding.unwrap().abs(), 1);
    }

    #[test]
    fn winding_refuses_general_family() {
        let lp = circle_loop(vec![0.0, 0.0], (0, 1), 0.1, 64).unwrap();
        assert!(matches!(
            phase_winding_symmetric(&fam("gen3"), &lp, 0),
            Err(EpError::NotSymmetric(_))
        ));
    }

    #[test]
    fn gen2_versal_residual_vanishes() {
        let lp = circle_loop(vec![0.0, 0.0], (0, 1), 1.0, 128).unwrap();
        let r = phase_versal(&fam("gen2"), &lp, 0, None).unwrap();
        assert!(r.residual.unwrap().norm() < 1e-8, "{r:?}");
        assert!(phase_distance(r.gamma, c64(PI, 0.0)) < 1e-8);
        let d = r.decomposition.unwrap();
        assert!((d.i1.norm() - PI).abs() < 1e-8);
        assert!(d.i2.norm() < 1e-6 && d.i3.norm() < 1e-6);
    }

    #[test]
    fn constant_energy_dynamical_phase() {
        let f = fam("gen2");
        let lp = circle_loop(vec![0.0, 0.0], (0, 1), 1.0, 64).unwrap();
        let mut track = track_pair(&f, &lp, 0, 2).unwrap();
        let e0 = c64(0.7, -0.2);
        for v in &mut track.values {
            v[0] = e0;
        }
        let delta = dynamical_phase(&track, 1.5, 1.0);
        assert!((delta + e0 * 3.0).norm() < 1e-13);
        let halved = dynamical_phase(&track, 1.5, 2.0);
        assert!((halved - delta / 2.0).norm() < 1e-15);
    }
}
