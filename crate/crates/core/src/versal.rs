//! Smooth basis `(chi0, chi1)` of the two-dimensional invariant subspace of a
//! tracked eigenvalue pair, with `H chi0 = s chi0 + p chi1`,
//! `H chi1 = s chi1 + chi0`, and the dual basis `(chi0~, chi1~)`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::eppoint::JordanData;
use crate::error::{EpError, Result};
use crate::hamiltonians::HamiltonianFamily;
use crate::numerics::{bilinear, c64, ComplexVector};
use crate::spectral::BranchTrack;

/// Largest accepted relative step of `sqrt(p)` between samples.
const SQRT_JUMP_LIMIT: f64 = 0.5;
/// Smallest accepted `|f0^2 - p f1^2|` for the reference gauge.
const GAUGE_DET_MIN: f64 = 1e-10;
/// Loops whose farthest point is within this distance of the EP are in the
/// expansion regime of [`chains_limit_check`].
pub const EXPANSION_RADIUS: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct VersalFrame {
    pub t: f64,
    pub s: Complex64,
    pub p: Complex64,
    pub sqrt_p: Complex64,
    pub chi0: ComplexVector,
    pub chi1: ComplexVector,
    pub left0: ComplexVector,
    pub left1: ComplexVector,
}

/// Frames over one cycle: `frames[k]` at `t_k = k / N`, `k = 0..=N`.
#[derive(Debug, Clone)]
pub struct VersalFrames {
    pub frames: Vec<VersalFrame>,
    pub points: Vec<Vec<f64>>,
    /// Winding number of `p(t)` around zero over the cycle.
    pub p_winding: i64,
    /// Largest `|sqrt_p(k+1) - sqrt_p(k)| / |sqrt_p(k)|`.
    pub max_sqrt_jump: f64,
    /// Largest `||H chi0 - s chi0 - p chi1||` and `||H chi1 - s chi1 - chi0||`
    /// relative to `||H||`.
    pub invariance_residual: f64,
    /// Largest deviation of the pairings from `<chi0~|chi0> = <chi1~|chi1> = 0`,
    /// `<chi1~|chi0> = <chi0~|chi1> = 1`.
    pub pairing_residual: f64,
    /// `max(||chi0(1) - chi0(0)||, ||chi1(1) - chi1(0)||)`.
    pub closure_defect: f64,
}

impl VersalFrames {
    pub fn samples(&self) -> usize {
        self.frames.len() - 1
    }

    /// CSV rows `t, Re s, Im s, Re p, Im p, Re sqrt_p, Im sqrt_p`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,re_s,im_s,re_p,im_p,re_sqrt_p,im_sqrt_p\n");
        for f in &self.frames {
            out.push_str(&format!(
                "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}\n",
                f.t, f.s.re, f.s.im, f.p.re, f.p.im, f.sqrt_p.re, f.sqrt_p.im
            ));
        }
        out
    }

    /// Keeps every `stride`-th frame; `stride` must divide the sample count.
    pub fn subsample(&self, stride: usize) -> Option<VersalFrames> {
        if stride == 0 || !self.samples().is_multiple_of(stride) {
            return None;
        }
        let mut out = self.clone();
        out.frames = self.frames.iter().step_by(stride).cloned().collect();
        out.points = self.points.iter().step_by(stride).cloned().collect();
        Some(out)
    }
}

/// Winding number of a closed sequence around zero (last entry closes the
/// path), accumulated from principal logarithms of consecutive ratios.
pub fn winding_number(values: &[Complex64]) -> f64 {
    values
        .windows(2)
        .map(|w| (w[1] / w[0]).arg())
        .sum::<f64>()
        / (2.0 * PI)
}

/// Smallest `|<r|psi_a>| |<r|psi_b>| / (||r||^2 ||psi_a|| ||psi_b||)` over the
/// first cycle; the gauge determinant is `<r|psi_a><r|psi_b>`.
fn reference_score(track: &BranchTrack, r: &ComplexVector, a: usize, b: usize) -> f64 {
    let n = track.samples_per_cycle();
    let rn = r.norm_squared();
    (0..=n)
        .map(|k| {
            let (pa, pb) = (&track.right[k][a], &track.right[k][b]);
            (bilinear(r, pa) * bilinear(r, pb)).norm() / (rn * pa.norm() * pb.norm())
        })
        .fold(f64::INFINITY, f64::min)
}

fn default_reference(track: &BranchTrack, raw: &[VersalFrame], a: usize, b: usize) -> ComplexVector {
    let dim = raw[0].chi0.len();
    let n = track.samples_per_cycle();
    let mut candidates = vec![raw[0].left1.clone()];
    for j in 0..dim {
        let mut e = ComplexVector::zeros(dim);
        e[j] = c64(1.0, 0.0);
        candidates.push(e);
    }
    for k in [0, n / 4, n / 2, 3 * n / 4] {
        candidates.push(raw[k].chi0.map(|z| z.conj()));
    }
    let mut best = candidates[0].clone();
    let mut best_score = reference_score(track, &best, a, b);
    for c in candidates.into_iter().skip(1) {
        let score = reference_score(track, &c, a, b);
        if score > 2.0 * best_score {
            best_score = score;
            best = c;
        }
    }
    best
}

/// Builds versal frames along the first cycle of `track`.
///
/// The residual per-sample gauge is fixed by `<r~|chi0> = 1`,
/// `<r~|chi1> = 0` for a reference covector `r~`, which is single-valued
/// around the cycle. `reference` is normally the EP covector `chi1~`;
/// without it `r~` is the candidate (initial `chi1~`, basis vectors,
/// conjugated eigenvectors) keeping both eigenvector pairings furthest
/// from zero along the loop.
pub fn versal_along_loop(
    family: &HamiltonianFamily,
    track: &BranchTrack,
    reference: Option<&ComplexVector>,
) -> Result<VersalFrames> {
    let n = track.samples_per_cycle();
    let mut raw = Vec::with_capacity(n + 1);

    // Branch a carries +sqrt(p) with sqrt(p) principal at the first sample.
    let e0 = track.values[0];
    let p0 = (e0[1] - e0[0]) * (e0[1] - e0[0]) / 4.0;
    let root0 = p0.sqrt();
    let (a, b) = if ((e0[0] - e0[1]) / 2.0 - root0).norm() <= ((e0[1] - e0[0]) / 2.0 - root0).norm() {
        (0, 1)
    } else {
        (1, 0)
    };

    let mut max_jump: f64 = 0.0;
    let mut prev_root: Option<Complex64> = None;
    for k in 0..=n {
        let e = track.values[k];
        let s = (e[a] + e[b]) / 2.0;
        let root = (e[a] - e[b]) / 2.0;
        if root.norm() == 0.0 {
            return Err(EpError::GapCollapse {
                t: track.times[k],
                gap: 0.0,
            });
        }
        if let Some(r) = prev_root {
            let jump = (root - r).norm() / r.norm();
            max_jump = max_jump.max(jump);
            if jump >= SQRT_JUMP_LIMIT {
                return Err(EpError::BranchAmbiguity(jump));
            }
        }
        prev_root = Some(root);

        let psi_a = &track.right[k][a];
        let psi_b = &track.right[k][b];
        let left_a = &track.left[k][a] * (2.0 * root);
        let left_b = &track.left[k][b] * (-2.0 * root);
        let chi0 = (psi_a + psi_b) / c64(2.0, 0.0);
        let chi1 = (psi_a - psi_b) / (2.0 * root);
        let left0 = (&left_a + &left_b) / c64(2.0, 0.0);
        let left1 = (&left_a - &left_b) / (2.0 * root);
        raw.push(VersalFrame {
            t: track.times[k],
            s,
            p: root * root,
            sqrt_p: root,
            chi0,
            chi1,
            left0,
            left1,
        });
    }

    let reference = match reference {
        Some(r) => r.clone(),
        None => default_reference(track, &raw, a, b),
    };
    let mut frames = Vec::with_capacity(n + 1);
    let mut points = Vec::with_capacity(n + 1);
    let mut invariance: f64 = 0.0;
    let mut pairing: f64 = 0.0;
    for (k, f) in raw.into_iter().enumerate() {
        let f0 = bilinear(&reference, &f.chi0);
        let f1 = bilinear(&reference, &f.chi1);
        let det = f0 * f0 - f.p * f1 * f1;
        if det.norm() < GAUGE_DET_MIN {
            return Err(EpError::GaugeSingular(det.norm()));
        }
        let alpha = f0 / det;
        let beta = -f1 / det;
        // chi0 -> alpha chi0 + beta p chi1, chi1 -> beta chi0 + alpha chi1;
        // the dual basis takes the inverse map.
        let chi0 = &f.chi0 * alpha + &f.chi1 * (beta * f.p);
        let chi1 = &f.chi0 * beta + &f.chi1 * alpha;
        let inv = alpha * alpha - beta * beta * f.p;
        let left0 = (&f.left0 * alpha - &f.left1 * (beta * f.p)) / inv;
        let left1 = (&f.left1 * alpha - &f.left0 * beta) / inv;

        let x = track.lp.point(track.times[k]);
        let h = family.evaluate(&x);
        let h_norm = h.norm().max(1.0);
        let r0 = (&h * &chi0 - &chi0 * f.s - &chi1 * f.p).norm();
        let r1 = (&h * &chi1 - &chi1 * f.s - &chi0).norm();
        invariance = invariance.max(r0.max(r1) / h_norm);
        let one = c64(1.0, 0.0);
        for (value, expected) in [
            (bilinear(&left0, &chi0), c64(0.0, 0.0)),
            (bilinear(&left1, &chi1), c64(0.0, 0.0)),
            (bilinear(&left1, &chi0), one),
            (bilinear(&left0, &chi1), one),
        ] {
            pairing = pairing.max((value - expected).norm());
        }
        points.push(x);
        frames.push(VersalFrame {
            chi0,
            chi1,
            left0,
            left1,
            ..f
        });
    }

    let p_values: Vec<Complex64> = frames.iter().map(|f| f.p).collect();
    let p_winding = winding_number(&p_values).round() as i64;
    let first = &frames[0];
    let last = &frames[n];
    let closure_defect = (&last.chi0 - &first.chi0)
        .norm()
        .max((&last.chi1 - &first.chi1).norm());

    Ok(VersalFrames {
        frames,
        points,
        p_winding,
        max_sqrt_jump: max_jump,
        invariance_residual: invariance,
        pairing_residual: pairing,
        closure_defect,
    })
}

/// Small-loop comparison of versal frames with the Jordan chains at the EP.
#[derive(Debug, Clone)]
pub struct ChainsLimitReport {
    /// Largest `||X(t) - X_EP||` on the loop.
    pub radius: f64,
    /// Largest `|s(t) - E_EP|`.
    pub s_deviation: f64,
    /// Largest `max(||chi0(t) - chi0_EP||, ||chi1(t) - chi1_EP||)`.
    pub frame_deviation: f64,
    /// Largest deviation of the raw eigenvectors (scaled by `<chi1~|psi> = 1`)
    /// from `chi0_EP`.
    pub eigenvector_deviation: f64,
    pub expansion_regime: bool,
}

/// Compares frames built with `jd.left1` as reference against the EP chains.
pub fn chains_limit_check(frames: &VersalFrames, jd: &JordanData) -> ChainsLimitReport {
    let mut radius: f64 = 0.0;
    let mut s_dev: f64 = 0.0;
    let mut frame_dev: f64 = 0.0;
    let mut eig_dev: f64 = 0.0;
    for (f, x) in frames.frames.iter().zip(&frames.points) {
        let r = x
            .iter()
            .zip(&jd.x_ep)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        radius = radius.max(r);
        s_dev = s_dev.max((f.s - jd.e_ep).norm());
        frame_dev = frame_dev
            .max((&f.chi0 - &jd.chi0).norm())
            .max((&f.chi1 - &jd.chi1).norm());
        let psi = &f.chi0 + &f.chi1 * f.sqrt_p;
        let scale = bilinear(&jd.left1, &psi);
        if scale.norm() > 0.0 {
            eig_dev = eig_dev.max((&psi / scale - &jd.chi0).norm());
        }
    }
    ChainsLimitReport {
        radius,
        s_deviation: s_dev,
        frame_deviation: frame_dev,
        eigenvector_deviation: eig_dev,
        expansion_regime: radius <= EXPANSION_RADIUS,
    }
}
