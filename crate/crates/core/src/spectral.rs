//! Biorthonormal eigenframes and continuous eigenbranch tracking along loops.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{EpError, Result};
use crate::hamiltonians::{HamiltonianFamily, ParameterLoop};
use crate::numerics::{bilinear, c64, eig_general, normalize_phase, ComplexMatrix, ComplexVector};

/// Eigenvalue gap below which frames are considered degenerate.
pub const DEGENERACY_GAP: f64 = 1e-6;
/// Matching is refused when the projector overlap of the best candidate is
/// further than this from one.
const MATCH_DEFECT_LIMIT: f64 = 0.5;
/// Maximum refinement factor applied by [`track_pair`] on ambiguous matches.
const MAX_TRACK_REFINEMENT: usize = 8;
/// Cap for [`adaptive_refine`].
pub const REFINEMENT_CAP: usize = 1 << 18;

/// Eigenvalues with biorthonormal frames, `<left_k|right_k> = 1`.
#[derive(Debug, Clone)]
pub struct Eigensystem {
    pub point: Vec<f64>,
    pub values: Vec<Complex64>,
    pub right: Vec<ComplexVector>,
    pub left: Vec<ComplexVector>,
}

impl Eigensystem {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Smallest distance between two eigenvalues.
    pub fn min_gap(&self) -> f64 {
        min_gap(&self.values)
    }

    /// Spectral projector `|psi_k><psi~_k|`.
    pub fn projector(&self, k: usize) -> ComplexMatrix {
        &self.right[k] * self.left[k].transpose()
    }
}

fn min_gap(values: &[Complex64]) -> f64 {
    let mut gap = f64::INFINITY;
    for i in 0..values.len() {
        for j in (i + 1)..values.len() {
            gap = gap.min((values[i] - values[j]).norm());
        }
    }
    gap
}

/// Biorthonormal frames of an arbitrary matrix without a gap check.
///
/// Right vectors have unit norm with the first significant component real
/// and positive; left vectors are scaled so that `<left|right> = 1`.
pub fn frames_of(h: &ComplexMatrix, point: Vec<f64>) -> Result<Eigensystem> {
    let eig = eig_general(h)?;
    let mut values = Vec::with_capacity(eig.len());
    let mut right = Vec::with_capacity(eig.len());
    let mut left = Vec::with_capacity(eig.len());
    for t in eig {
        let r = normalize_phase(&t.right);
        let pairing = bilinear(&t.left, &r);
        let l = if pairing.norm() > 0.0 {
            &t.left / pairing
        } else {
            t.left.clone()
        };
        values.push(t.value);
        right.push(r);
        left.push(l);
    }
    Ok(Eigensystem {
        point,
        values,
        right,
        left,
    })
}

/// Biorthonormal eigenframes of `H(x)`; fails near a degeneracy.
pub fn eigensystem_at(family: &HamiltonianFamily, x: &[f64]) -> Result<Eigensystem> {
    let sys = frames_of(&family.evaluate(x), x.to_vec())?;
    let gap = sys.min_gap();
    if gap < DEGENERACY_GAP {
        return Err(EpError::DegeneratePoint {
            gap,
            threshold: DEGENERACY_GAP,
        });
    }
    Ok(sys)
}

/// Continuously tracked pair of eigenbranches along one or more turns of a
/// loop.
///
/// Samples are taken at `t_k = k / N` for `k = 0..=cycles*N`; the last sample
/// sits at the starting point again. Vectors are carried in the transport
/// gauge `<left_k|right_{k+1}> = 1`, `<left_k|right_k> = 1`.
#[derive(Debug, Clone)]
pub struct BranchTrack {
    pub lp: ParameterLoop,
    pub cycles: usize,
    /// Sorted-spectrum indices `(n, n+1)` at `t = 0`.
    pub pair: (usize, usize),
    pub times: Vec<f64>,
    pub values: Vec<[Complex64; 2]>,
    pub right: Vec<[ComplexVector; 2]>,
    pub left: Vec<[ComplexVector; 2]>,
    /// Sorted-spectrum index of each tracked branch at every sample.
    pub levels: Vec<[usize; 2]>,
    /// After cycle `c`, branch `s` sits on the initial branch `monodromy[c][s]`.
    pub monodromy: Vec<[usize; 2]>,
    /// Largest `|<left_old|right_new><left_new|right_old> - 1|` over all steps.
    pub max_defect: f64,
}

impl BranchTrack {
    pub fn samples_per_cycle(&self) -> usize {
        self.lp.samples
    }

    /// Number of steps (`cycles * N`); sample `steps()` closes the path.
    pub fn steps(&self) -> usize {
        self.cycles * self.lp.samples
    }

    /// Permutation after one full cycle.
    pub fn one_cycle_permutation(&self) -> [usize; 2] {
        self.monodromy[0]
    }

    /// True if the tracked pair swaps after one cycle.
    pub fn swaps(&self) -> bool {
        self.monodromy[0] == [1, 0]
    }

    /// CSV rows `t, Re E_n, Im E_n, Re E_n+1, Im E_n+1`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,re_e_n,im_e_n,re_e_n1,im_e_n1\n");
        for (t, [a, b]) in self.times.iter().zip(&self.values) {
            out.push_str(&format!(
                "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}\n",
                t, a.re, a.im, b.re, b.im
            ));
        }
        out
    }
}

enum StepFailure {
    Ambiguous,
    Escaped(usize),
}

struct Attempt {
    track: BranchTrack,
}

fn sample_systems(family: &HamiltonianFamily, lp: &ParameterLoop) -> Result<Vec<Eigensystem>> {
    let n = lp.samples;
    (0..n)
        .into_par_iter()
        .map(|i| {
            let t = i as f64 / n as f64;
            eigensystem_at(family, &lp.point(t)).map_err(|e| match e {
                EpError::DegeneratePoint { gap, .. } => EpError::GapCollapse { t, gap },
                other => other,
            })
        })
        .collect()
}

fn try_track(
    family: &HamiltonianFamily,
    lp: &ParameterLoop,
    lower: usize,
    cycles: usize,
    initial_scale: [Complex64; 2],
) -> Result<std::result::Result<Attempt, StepFailure>> {
    let systems = sample_systems(family, lp)?;
    let n = lp.samples;
    let dim = systems[0].len();
    if lower + 1 >= dim {
        return Err(EpError::InvalidOption(format!(
            "pair ({lower}, {}) out of range for dimension {dim}",
            lower + 1
        )));
    }
    let start = &systems[0];
    let mut cur_right = [
        &start.right[lower] * initial_scale[0],
        &start.right[lower + 1] * initial_scale[1],
    ];
    let mut cur_left = [
        &start.left[lower] / initial_scale[0],
        &start.left[lower + 1] / initial_scale[1],
    ];
    let mut cur_levels = [lower, lower + 1];

    let steps = cycles * n;
    let mut times = Vec::with_capacity(steps + 1);
    let mut values = Vec::with_capacity(steps + 1);
    let mut rights = Vec::with_capacity(steps + 1);
    let mut lefts = Vec::with_capacity(steps + 1);
    let mut levels = Vec::with_capacity(steps + 1);
    let mut monodromy = Vec::with_capacity(cycles);
    let mut max_defect: f64 = 0.0;

    times.push(0.0);
    values.push([start.values[lower], start.values[lower + 1]]);
    rights.push(cur_right.clone());
    lefts.push(cur_left.clone());
    levels.push(cur_levels);

    for k in 0..steps {
        let here = &systems[k % n];
        let next = &systems[(k + 1) % n];
        let mut chosen = [0usize; 2];
        for s in 0..2 {
            let e_old = here.values[cur_levels[s]];
            let mut best = 0;
            let mut best_overlap = c64(0.0, 0.0);
            let mut nearest = 0;
            let mut nearest_dist = f64::INFINITY;
            for l in 0..next.len() {
                let m = bilinear(&cur_left[s], &next.right[l]) * bilinear(&next.left[l], &cur_right[s]);
                if m.norm() > best_overlap.norm() {
                    best = l;
                    best_overlap = m;
                }
                let d = (next.values[l] - e_old).norm();
                if d < nearest_dist {
                    nearest = l;
                    nearest_dist = d;
                }
            }
            let defect = (best_overlap - 1.0).norm();
            // Continuity: the eigenvalue jump must stay below the distance
            // to every other branch at the current sample.
            let separation = (0..here.len())
                .filter(|&l| l != cur_levels[s])
                .map(|l| (here.values[l] - e_old).norm())
                .fold(f64::INFINITY, f64::min);
            if best != nearest || defect >= MATCH_DEFECT_LIMIT || nearest_dist >= separation {
                return Ok(Err(StepFailure::Ambiguous));
            }
            max_defect = max_defect.max(defect);
            chosen[s] = best;
        }
        if chosen[0] == chosen[1] {
            return Ok(Err(StepFailure::Ambiguous));
        }
        for s in 0..2 {
            let l = chosen[s];
            let overlap = bilinear(&cur_left[s], &next.right[l]);
            cur_right[s] = &next.right[l] / overlap;
            cur_left[s] = &next.left[l] * overlap;
        }
        cur_levels = chosen;

        let k1 = k + 1;
        times.push(k1 as f64 / n as f64);
        values.push([next.values[chosen[0]], next.values[chosen[1]]]);
        rights.push(cur_right.clone());
        lefts.push(cur_left.clone());
        levels.push(cur_levels);

        if k1 % n == 0 {
            let mut perm = [0usize; 2];
            for s in 0..2 {
                perm[s] = match cur_levels[s] {
                    l if l == lower => 0,
                    l if l == lower + 1 => 1,
                    l => return Ok(Err(StepFailure::Escaped(l))),
                };
            }
            monodromy.push(perm);
        }
    }

    Ok(Ok(Attempt {
        track: BranchTrack {
            lp: lp.clone(),
            cycles,
            pair: (lower, lower + 1),
            times,
            values,
            right: rights,
            left: lefts,
            levels,
            monodromy,
            max_defect,
        },
    }))
}

/// Tracks the levels `(lower, lower + 1)` of the sorted spectrum at `t = 0`
/// over `cycles` turns of the loop.
pub fn track_pair(family: &HamiltonianFamily, lp: &ParameterLoop, lower: usize, cycles: usize) -> Result<BranchTrack> {
    let one = c64(1.0, 0.0);
    track_pair_scaled(family, lp, lower, cycles, [one, one])
}

/// [`track_pair`] with the initial right vectors multiplied by
/// `initial_scale` (left vectors divided by it).
pub fn track_pair_scaled(
    family: &HamiltonianFamily,
    lp: &ParameterLoop,
    lower: usize,
    cycles: usize,
    initial_scale: [Complex64; 2],
) -> Result<BranchTrack> {
    lp.validate()?;
    if cycles == 0 {
        return Err(EpError::InvalidOption("cycles must be at least 1".into()));
    }
    if lp.param_count() != family.param_count() {
        return Err(EpError::DimensionMismatch(format!(
            "loop has {} parameters, family has {}",
            lp.param_count(),
            family.param_count()
        )));
    }
    if initial_scale.iter().any(|z| z.norm() == 0.0) {
        return Err(EpError::InvalidOption("initial scale must be nonzero".into()));
    }
    let mut factor = 1;
    loop {
        let current = lp.with_samples(lp.samples * factor);
        match try_track(family, &current, lower, cycles, initial_scale)? {
            Ok(attempt) => return Ok(attempt.track),
            Err(StepFailure::Escaped(level)) => return Err(EpError::PairEscaped { level }),
            Err(StepFailure::Ambiguous) => {
                if factor >= MAX_TRACK_REFINEMENT {
                    return Err(EpError::MatchingAmbiguity {
                        samples: current.samples,
                    });
                }
                factor *= 2;
            }
        }
    }
}

/// Doubles the sample count until every step has projector-overlap defect
/// below `target`, up to [`REFINEMENT_CAP`] samples per cycle.
pub fn adaptive_refine(family: &HamiltonianFamily, track: &BranchTrack, target: f64) -> Result<BranchTrack> {
    let mut current = track.clone();
    while current.max_defect >= target {
        let samples = current.lp.samples * 2;
        if samples > REFINEMENT_CAP {
            return Err(EpError::RefinementCap {
                cap: REFINEMENT_CAP,
                defect: current.max_defect,
            });
        }
        current = track_pair(family, &current.lp.with_samples(samples), track.pair.0, track.cycles)?;
    }
    Ok(current)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonians::{builtin, circle_loop, BuiltinOptions};

    fn gen2() -> HamiltonianFamily {
        builtin("gen2", &BuiltinOptions::default()).unwrap()
    }

    #[test]
    fn gen2_frames_at_real_point() {
        let sys = eigensystem_at(&gen2(), &[1.0, 0.0]).unwrap();
        assert!((sys.values[0] + 1.0).norm() < 1e-13);
        assert!((sys.values[1] - 1.0).norm() < 1e-13);
        // psi+ = (1,1)/c, left = (1,1)/c with c^2 = 2
        let c = 2f64.sqrt();
        for i in 0..2 {
            assert!((sys.right[1][i] - 1.0 / c).norm() < 1e-13);
            assert!((sys.left[1][i] - 1.0 / c).norm() < 1e-13);
        }
        for k in 0..2 {
            for l in 0..2 {
                let p = bilinear(&sys.left[k], &sys.right[l]);
                let expected = if k == l { 1.0 } else { 0.0 };
                assert!((p - expected).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn sym2_left_equals_right() {
        let f = builtin("sym2", &BuiltinOptions::default()).unwrap();
        let sys = eigensystem_at(&f, &[1.0, 0.0]).unwrap();
        let h = f.evaluate(&[1.0, 0.0]);
        for k in 0..2 {
            // For H = H^T the bilinear left vector is proportional to the right one.
            let r = &sys.right[k];
            let row = r.transpose() * &h;
            assert!((row.transpose() - r * sys.values[k]).norm() < 1e-12);
            let ratio = sys.left[k][0] / r[0];
            assert!((&sys.left[k] - r * ratio).norm() < 1e-12);
        }
    }

    #[test]
    fn diagonal_frames() {
        let mut h = ComplexMatrix::zeros(2, 2);
        h[(0, 0)] = c64(1.0, 0.0);
        h[(1, 1)] = c64(2.0, 0.0);
        let sys = frames_of(&h, vec![]).unwrap();
        assert!((sys.right[0][0] - 1.0).norm() < 1e-15 && sys.right[0][1].norm() < 1e-15);
        assert!((sys.left[1][1] - 1.0).norm() < 1e-15 && sys.left[1][0].norm() < 1e-15);
    }

    #[test]
    fn degenerate_point_rejected() {
        assert!(matches!(
            eigensystem_at(&gen2(), &[0.0, 0.0]),
            Err(EpError::DegeneratePoint { .. })
        ));
    }

    #[test]
    fn monodromy_around_and_away_from_ep() {
        let f = gen2();
        let around = circle_loop(vec![0.0, 0.0], (0, 1), 1.0, 64).unwrap();
        let t1 = track_pair(&f, &around, 0, 1).unwrap();
        assert_eq!(t1.monodromy[0], [1, 0]);
        let t2 = track_pair(&f, &around, 0, 2).unwrap();
        assert_eq!(t2.monodromy[1], [0, 1]);
        let away = circle_loop(vec![3.0, 0.0], (0, 1), 1.0, 64).unwrap();
        let t3 = track_pair(&f, &away, 0, 1).unwrap();
        assert_eq!(t3.monodromy[0], [0, 1]);
    }

    #[test]
    fn loop_through_ep_fails() {
        let lp = circle_loop(vec![1.0, 0.0], (0, 1), 1.0, 64).unwrap();
        assert!(matches!(
            track_pair(&gen2(), &lp, 0, 1),
            Err(EpError::GapCollapse { .. })
        ));
    }

    #[test]
    fn refinement_reaches_target_and_is_idempotent() {
        let f = gen2();
        let lp = circle_loop(vec![0.0, 0.0], (0, 1), 1.0, 16).unwrap();
        let coarse = track_pair(&f, &lp, 0, 1).unwrap();
        let fine = adaptive_refine(&f, &coarse, 0.1).unwrap();
        assert!(fine.max_defect < 0.1);
        let again = adaptive_refine(&f, &fine, 0.1).unwrap();
        assert_eq!(again.lp.samples, fine.lp.samples);
        // The doubling stops at the first compliant sample count.
        if fine.lp.samples > 16 {
            let half = track_pair(&f, &lp.with_samples(fine.lp.samples / 2), 0, 1).unwrap();
            assert!(half.max_defect >= 0.1);
        }
    }

    #[test]
    fn transport_gauge_invariants() {
        let f = gen2();
        let lp = circle_loop(vec![0.0, 0.0], (0, 1), 0.5, 128).unwrap();
        let t = track_pair(&f, &lp, 0, 2).unwrap();
        for k in 0..t.steps() {
            for s in 0..2 {
                assert!((bilinear(&t.left[k][s], &t.right[k][s]) - 1.0).norm() < 1e-10);
                assert!((bilinear(&t.left[k][s], &t.right[k + 1][s]) - 1.0).norm() < 1e-10);
            }
        }
    }
}
