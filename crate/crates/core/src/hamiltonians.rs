//! Parametrized Hamiltonian families `H(X) = A0 + sum_j X_j A_j` and closed
//! parameter loops.

use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{EpError, Result};
use crate::numerics::{c64, check_finite, condition_number, sandwich, ComplexMatrix, MAX_DIM};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Symmetry {
    Symmetric,
    General,
}

/// Affine family `H(X) = A0 + sum_j X_j A_j`.
#[derive(Debug, Clone)]
pub struct HamiltonianFamily {
    name: String,
    symmetry: Symmetry,
    /// `[A0, A1, ..., Am]`
    matrices: Vec<ComplexMatrix>,
}

impl HamiltonianFamily {
    /// Builds an affine family from `[A0, A1, ..., Am]`.
    pub fn affine(name: impl Into<String>, matrices: Vec<ComplexMatrix>, symmetry: Symmetry) -> Result<Self> {
        if matrices.len() < 3 {
            return Err(EpError::MalformedFamily(format!(
                "need at least 2 parameters, got {}",
                matrices.len().saturating_sub(1)
            )));
        }
        let n = matrices[0].nrows();
        if n == 0 || n > MAX_DIM {
            return Err(EpError::DimensionTooLarge(n));
        }
        for (j, a) in matrices.iter().enumerate() {
            if a.nrows() != n || a.ncols() != n {
                return Err(EpError::MalformedFamily(format!(
                    "matrix {j} is {}x{}, expected {n}x{n}",
                    a.nrows(),
                    a.ncols()
                )));
            }
            check_finite(a, &format!("matrix {j}"))?;
        }
        Ok(Self {
            name: name.into(),
            symmetry,
            matrices,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.matrices[0].nrows()
    }

    pub fn param_count(&self) -> usize {
        self.matrices.len() - 1
    }

    pub fn symmetry(&self) -> Symmetry {
        self.symmetry
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetry == Symmetry::Symmetric
    }

    pub fn matrices(&self) -> &[ComplexMatrix] {
        &self.matrices
    }

    pub fn evaluate(&self, x: &[f64]) -> ComplexMatrix {
        assert_eq!(x.len(), self.param_count(), "parameter vector length");
        let mut h = self.matrices[0].clone();
        for (xj, a) in x.iter().zip(&self.matrices[1..]) {
            if *xj != 0.0 {
                h += a * c64(*xj, 0.0);
            }
        }
        h
    }

    /// `dH/dX_j`; constant for affine families.
    pub fn derivative(&self, _x: &[f64], j: usize) -> ComplexMatrix {
        self.matrices[j + 1].clone()
    }

    /// `sum_j dH/dX_j * d_j`
    pub fn directional(&self, d: &[f64]) -> ComplexMatrix {
        let n = self.dim();
        let mut h = ComplexMatrix::zeros(n, n);
        for (dj, a) in d.iter().zip(&self.matrices[1..]) {
            if *dj != 0.0 {
                h += a * c64(*dj, 0.0);
            }
        }
        h
    }

    /// Same family with `extra` additional parameters that do not move `H`.
    pub fn with_inert_params(&self, extra: usize) -> Self {
        let n = self.dim();
        let mut matrices = self.matrices.clone();
        matrices.extend(std::iter::repeat_n(ComplexMatrix::zeros(n, n), extra));
        Self {
            name: self.name.clone(),
            symmetry: self.symmetry,
            matrices,
        }
    }
}

/// Linear congruential generator with Knuth's MMIX constants:
/// `state <- state * 6364136223846793005 + 1442695040888963407 (mod 2^64)`.
/// Uniform draws use the top 53 bits of the state, so the stream is
/// reproducible bit-for-bit in any language with 64-bit integers.
#[derive(Debug, Clone)]
pub struct Lcg {
    state: u64,
}

impl Lcg {
    pub const MULTIPLIER: u64 = 6364136223846793005;
    pub const INCREMENT: u64 = 1442695040888963407;

    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self
            .state
            .wrapping_mul(Self::MULTIPLIER)
            .wrapping_add(Self::INCREMENT);
        self.state
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    /// Real and imaginary parts uniform in `[-1, 1)`, real part drawn first.
    pub fn complex(&mut self) -> Complex64 {
        let re = 2.0 * self.uniform() - 1.0;
        let im = 2.0 * self.uniform() - 1.0;
        c64(re, im)
    }

    /// Row-major fill.
    pub fn matrix(&mut self, n: usize) -> ComplexMatrix {
        let mut m = ComplexMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = self.complex();
            }
        }
        m
    }

    /// Upper triangle (with diagonal) filled row-major, then mirrored.
    pub fn symmetric_matrix(&mut self, n: usize) -> ComplexMatrix {
        let mut m = ComplexMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let z = self.complex();
                m[(i, j)] = z;
                m[(j, i)] = z;
            }
        }
        m
    }
}

/// Options for the built-in families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BuiltinOptions {
    /// Spectator level (sym3, gen3, gen4).
    pub delta: Complex64Repr,
    /// Second spectator level (gen4).
    pub delta2: Complex64Repr,
    /// Scale of the seeded coupling matrices.
    pub coupling: f64,
    pub seed: u64,
}

impl Default for BuiltinOptions {
    fn default() -> Self {
        Self {
            delta: Complex64Repr(2.0, 0.0),
            delta2: Complex64Repr(-1.5, 1.0),
            coupling: 1.0,
            seed: 7,
        }
    }
}

/// Complex number serialized as `[re, im]`; a bare number is read as real.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Complex64Repr(pub f64, pub f64);

impl Complex64Repr {
    pub fn value(self) -> Complex64 {
        c64(self.0, self.1)
    }
}

impl From<Complex64> for Complex64Repr {
    fn from(z: Complex64) -> Self {
        Self(z.re, z.im)
    }
}

impl Serialize for Complex64Repr {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        [self.0, self.1].serialize(s)
    }
}

impl<'de> Deserialize<'de> for Complex64Repr {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let bad = || serde::de::Error::custom("expected a number or a [re, im] pair");
        match serde_json::Value::deserialize(d)? {
            serde_json::Value::Number(x) => Ok(Complex64Repr(x.as_f64().ok_or_else(bad)?, 0.0)),
            serde_json::Value::Array(v) if v.len() == 2 => match (v[0].as_f64(), v[1].as_f64()) {
                (Some(re), Some(im)) => Ok(Complex64Repr(re, im)),
                _ => Err(bad()),
            },
            _ => Err(bad()),
        }
    }
}

pub const BUILTIN_NAMES: [&str; 5] = ["sym2", "gen2", "sym3", "gen3", "gen4"];

fn from_rows(rows: &[&[Complex64]]) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j])
}

/// Built-in families with exactly known EPs.
///
/// * `sym2`: `[[x+iy, 1], [1, -(x+iy)]]`, EPs at `(0, +-1)`, `E = 0`.
/// * `gen2`: `[[0, 1], [x+iy, 0]]`, EP at the origin, `E = 0`.
/// * `sym3`: `B (+) [delta] + x A1 + y A2` with `B = [[1, i], [i, -1]]` and
///   seeded complex symmetric `A1`, `A2`; EP at the origin.
/// * `gen3`, `gen4`: `S (J2(0) (+) D) S^-1 + x A1 + y A2` with seeded `S`
///   and `A_j = S B_j S^-1`, `B_j` seeded with `(B1)_10 = 1`, `(B2)_10 = i`;
///   `D = diag(delta)` or `diag(delta, delta2)`; EP at the origin.
pub fn builtin(name: &str, options: &BuiltinOptions) -> Result<HamiltonianFamily> {
    let zero = c64(0.0, 0.0);
    let one = c64(1.0, 0.0);
    let i = c64(0.0, 1.0);
    if !(options.coupling.is_finite() && options.coupling > 0.0) {
        return Err(EpError::InvalidOption(format!(
            "coupling must be positive, got {}",
            options.coupling
        )));
    }
    let family = match name {
        "sym2" => HamiltonianFamily::affine(
            name,
            vec![
                from_rows(&[&[zero, one], &[one, zero]]),
                from_rows(&[&[one, zero], &[zero, -one]]),
                from_rows(&[&[i, zero], &[zero, -i]]),
            ],
            Symmetry::Symmetric,
        )?,
        "gen2" => HamiltonianFamily::affine(
            name,
            vec![
                from_rows(&[&[zero, one], &[zero, zero]]),
                from_rows(&[&[zero, zero], &[one, zero]]),
                from_rows(&[&[zero, zero], &[i, zero]]),
            ],
            Symmetry::General,
        )?,
        "sym3" => {
            let delta = options.delta.value();
            let mut a0 = ComplexMatrix::zeros(3, 3);
            a0[(0, 0)] = one;
            a0[(0, 1)] = i;
            a0[(1, 0)] = i;
            a0[(1, 1)] = -one;
            a0[(2, 2)] = delta;
            let mut rng = Lcg::new(options.seed);
            let k = c64(options.coupling, 0.0);
            let a1 = rng.symmetric_matrix(3) * k;
            let a2 = rng.symmetric_matrix(3) * k;
            HamiltonianFamily::affine(name, vec![a0, a1, a2], Symmetry::Symmetric)?
        }
        "gen3" | "gen4" => {
            let n = if name == "gen3" { 3 } else { 4 };
            let delta = options.delta.value();
            if delta.norm() == 0.0 {
                return Err(EpError::InvalidOption(
                    "delta = 0 makes a triple degeneracy".into(),
                ));
            }
            let mut core = ComplexMatrix::zeros(n, n);
            core[(0, 1)] = one;
            core[(2, 2)] = delta;
            if n == 4 {
                let delta2 = options.delta2.value();
                if delta2.norm() == 0.0 || (delta2 - delta).norm() == 0.0 {
                    return Err(EpError::InvalidOption(
                        "delta2 must differ from 0 and from delta".into(),
                    ));
                }
                core[(3, 3)] = delta2;
            }
            let mut rng = Lcg::new(options.seed);
            let s = ComplexMatrix::identity(n, n) + rng.matrix(n) * c64(0.5, 0.0);
            let cond = condition_number(&s)?;
            if cond > 1e6 {
                return Err(EpError::DegenerateParametrization(format!(
                    "seeded similarity is ill-conditioned (cond {cond:.3e}); choose another seed"
                )));
            }
            let s_inv = s
                .clone()
                .lu()
                .try_inverse()
                .ok_or_else(|| EpError::DegenerateParametrization("singular similarity".into()))?;
            let a0 = &s * core * &s_inv;
            // Couplings are drawn in the Jordan basis; their (1, 0) entries
            // are pinned to 1 and i so that mu(x, y) = x + iy.
            let k = c64(options.coupling, 0.0);
            let mut b1 = rng.matrix(n) * k;
            let mut b2 = rng.matrix(n) * k;
            b1[(1, 0)] = one;
            b2[(1, 0)] = i;
            let a1 = &s * b1 * &s_inv;
            let a2 = &s * b2 * &s_inv;
            let family = HamiltonianFamily::affine(name, vec![a0, a1, a2], Symmetry::General)?;
            // The EP chain of J2(0) is chi0 = S e1 with left vector e2^T S^-1.
            let chi0 = s.column(0).into_owned();
            let left0 = s_inv.row(1).transpose();
            check_mu_independent(&family, &left0, &chi0)?;
            family
        }
        other => return Err(EpError::UnknownFamily(other.to_string())),
    };
    if name == "sym3" {
        // B has chain vector (1, i, 0); its left vector is the same in the
        // bilinear pairing.
        let chi0 = crate::numerics::ComplexVector::from_vec(vec![one, i, zero]);
        check_mu_independent(&family, &chi0, &chi0)?;
    }
    Ok(family)
}

fn check_mu_independent(
    family: &HamiltonianFamily,
    left0: &crate::numerics::ComplexVector,
    chi0: &crate::numerics::ComplexVector,
) -> Result<()> {
    let g1 = sandwich(left0, &family.matrices()[1], chi0);
    let g2 = sandwich(left0, &family.matrices()[2], chi0);
    let det = (g1.conj() * g2).im;
    if det.abs() <= 1e-6 * (g1.norm_sqr() + g2.norm_sqr()) {
        return Err(EpError::DegenerateParametrization(format!(
            "Re mu and Im mu are linearly dependent for seed; reseed required (det {det:.3e})"
        )));
    }
    Ok(())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FamilyFile {
    name: String,
    dim: usize,
    params: usize,
    symmetric: bool,
    matrices: Vec<Vec<Vec<[f64; 2]>>>,
}

/// Parses the JSON family format:
/// `{ "name", "dim", "params", "symmetric", "matrices": [A0, ..., Am] }`
/// with each matrix a list of rows of `[re, im]` entries.
pub fn parse_family(text: &str) -> Result<HamiltonianFamily> {
    let file: FamilyFile =
        serde_json::from_str(text).map_err(|e| EpError::MalformedFamily(e.to_string()))?;
    if file.params < 2 {
        return Err(EpError::MalformedFamily(format!(
            "params must be at least 2, got {}",
            file.params
        )));
    }
    if file.dim == 0 || file.dim > MAX_DIM {
        return Err(EpError::MalformedFamily(format!("unsupported dim {}", file.dim)));
    }
    if file.matrices.len() != file.params + 1 {
        return Err(EpError::MalformedFamily(format!(
            "expected {} matrices, found {}",
            file.params + 1,
            file.matrices.len()
        )));
    }
    let n = file.dim;
    let mut matrices = Vec::with_capacity(file.matrices.len());
    for (j, rows) in file.matrices.iter().enumerate() {
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(EpError::MalformedFamily(format!(
                "matrix {j} is not {n}x{n}"
            )));
        }
        matrices.push(ComplexMatrix::from_fn(n, n, |r, c| {
            let [re, im] = rows[r][c];
            c64(re, im)
        }));
    }
    let symmetry = if file.symmetric {
        for (j, a) in matrices.iter().enumerate() {
            let asym = (a - a.transpose()).norm();
            if asym > 1e-12 * a.norm().max(1.0) {
                return Err(EpError::MalformedFamily(format!(
                    "declared symmetric but matrix {j} has asymmetry {asym:.3e}"
                )));
            }
        }
        Symmetry::Symmetric
    } else {
        Symmetry::General
    };
    HamiltonianFamily::affine(file.name, matrices, symmetry)
}

pub fn load_family(path: &Path) -> Result<HamiltonianFamily> {
    let text = std::fs::read_to_string(path)?;
    parse_family(&text)
}

/// Writes a family in the JSON file format.
pub fn family_to_json(family: &HamiltonianFamily) -> serde_json::Value {
    let matrices: Vec<Vec<Vec<[f64; 2]>>> = family
        .matrices()
        .iter()
        .map(|a| {
            (0..a.nrows())
                .map(|i| (0..a.ncols()).map(|j| [a[(i, j)].re, a[(i, j)].im]).collect())
                .collect()
        })
        .collect();
    serde_json::json!({
        "name": family.name(),
        "dim": family.dim(),
        "params": family.param_count(),
        "symmetric": family.is_symmetric(),
        "matrices": matrices,
    })
}

/// Unit-scale closed curve in a coordinate plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", try_from = "RawShape")]
pub enum LoopShape {
    Circle,
    /// Semi-axes along the first and second plane coordinates.
    Ellipse { semi_axes: [f64; 2] },
    /// Radius `1 + amplitude * cos(lobes * theta)`.
    Star { lobes: u32, amplitude: f64 },
    /// Closed polygon through the given plane points (linear interpolation).
    Points { points: Vec<[f64; 2]> },
}

// Flat mirror of `LoopShape` used for parsing.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawShape {
    kind: String,
    semi_axes: Option<[f64; 2]>,
    lobes: Option<u32>,
    amplitude: Option<f64>,
    points: Option<Vec<[f64; 2]>>,
}

impl TryFrom<RawShape> for LoopShape {
    type Error = String;

    fn try_from(r: RawShape) -> std::result::Result<Self, String> {
        let missing = |field: &str| format!("shape `{}` needs `{field}`", r.kind);
        let shape = match r.kind.as_str() {
            "circle" => LoopShape::Circle,
            "ellipse" => LoopShape::Ellipse {
                semi_axes: r.semi_axes.ok_or_else(|| missing("semi_axes"))?,
            },
            "star" => LoopShape::Star {
                lobes: r.lobes.ok_or_else(|| missing("lobes"))?,
                amplitude: r.amplitude.ok_or_else(|| missing("amplitude"))?,
            },
            "points" => LoopShape::Points {
                points: r.points.clone().ok_or_else(|| missing("points"))?,
            },
            other => return Err(format!("unknown shape kind `{other}`")),
        };
        let used = match &shape {
            LoopShape::Circle => 0,
            LoopShape::Ellipse { .. } => 1,
            LoopShape::Star { .. } => 2,
            LoopShape::Points { .. } => 1,
        };
        let given = [r.semi_axes.is_some(), r.lobes.is_some(), r.amplitude.is_some(), r.points.is_some()]
            .iter()
            .filter(|b| **b)
            .count();
        if given != used {
            return Err(format!("unexpected field for shape `{}`", r.kind));
        }
        Ok(shape)
    }
}

impl LoopShape {
    fn validate(&self) -> Result<()> {
        match self {
            LoopShape::Circle => Ok(()),
            LoopShape::Ellipse { semi_axes } => {
                if semi_axes.iter().all(|a| a.is_finite() && *a > 0.0) {
                    Ok(())
                } else {
                    Err(EpError::InvalidOption("ellipse semi-axes must be positive".into()))
                }
            }
            LoopShape::Star { amplitude, .. } => {
                if amplitude.is_finite() && amplitude.abs() < 1.0 {
                    Ok(())
                } else {
                    Err(EpError::InvalidOption("star amplitude must be in (-1, 1)".into()))
                }
            }
            LoopShape::Points { points } => {
                if points.len() < 3 {
                    return Err(EpError::InvalidOption("need at least 3 loop points".into()));
                }
                if points.iter().flatten().all(|v| v.is_finite()) {
                    Ok(())
                } else {
                    Err(EpError::InvalidOption("non-finite loop point".into()))
                }
            }
        }
    }

    /// Point on the curve for `t` in `[0, 1)`.
    fn eval(&self, t: f64) -> [f64; 2] {
        let theta = 2.0 * PI * t;
        match self {
            LoopShape::Circle => [theta.cos(), theta.sin()],
            LoopShape::Ellipse { semi_axes } => [semi_axes[0] * theta.cos(), semi_axes[1] * theta.sin()],
            LoopShape::Star { lobes, amplitude } => {
                let r = 1.0 + amplitude * (*lobes as f64 * theta).cos();
                [r * theta.cos(), r * theta.sin()]
            }
            LoopShape::Points { points } => {
                let m = points.len();
                let s = t * m as f64;
                let k = (s.floor() as usize).min(m - 1);
                let f = s - k as f64;
                let a = points[k];
                let b = points[(k + 1) % m];
                [a[0] + f * (b[0] - a[0]), a[1] + f * (b[1] - a[1])]
            }
        }
    }
}

pub const MIN_SAMPLES: usize = 16;

/// Closed path `X(t) = center + epsilon * Xhat(t)`, `t` in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterLoop {
    pub center: Vec<f64>,
    pub plane: (usize, usize),
    pub shape: LoopShape,
    pub epsilon: f64,
    pub samples: usize,
    #[serde(default)]
    pub reversed: bool,
}

impl ParameterLoop {
    pub fn new(
        center: Vec<f64>,
        plane: (usize, usize),
        shape: LoopShape,
        epsilon: f64,
        samples: usize,
    ) -> Result<Self> {
        let lp = Self {
            center,
            plane,
            shape,
            epsilon,
            samples,
            reversed: false,
        };
        lp.validate()?;
        Ok(lp)
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.center.len();
        let (j1, j2) = self.plane;
        if j1 == j2 || j1 >= m || j2 >= m {
            return Err(EpError::InvalidOption(format!(
                "invalid plane ({j1}, {j2}) for {m} parameters"
            )));
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(EpError::InvalidOption(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if self.samples < MIN_SAMPLES {
            return Err(EpError::InvalidOption(format!(
                "need at least {MIN_SAMPLES} samples, got {}",
                self.samples
            )));
        }
        if self.center.iter().any(|c| !c.is_finite()) {
            return Err(EpError::InvalidOption("non-finite loop center".into()));
        }
        self.shape.validate()
    }

    pub fn param_count(&self) -> usize {
        self.center.len()
    }

    /// Unit-scale point `Xhat(t)`; periodic with period 1.
    pub fn unit_point(&self, t: f64) -> Vec<f64> {
        let mut s = t.rem_euclid(1.0);
        if self.reversed && s != 0.0 {
            s = 1.0 - s;
        }
        let [u, v] = self.shape.eval(s);
        let mut x = vec![0.0; self.center.len()];
        x[self.plane.0] = u;
        x[self.plane.1] = v;
        x
    }

    /// Realized point `X(t)`.
    pub fn point(&self, t: f64) -> Vec<f64> {
        self.unit_point(t)
            .iter()
            .zip(&self.center)
            .map(|(u, c)| c + self.epsilon * u)
            .collect()
    }

    pub fn with_samples(&self, samples: usize) -> Self {
        Self {
            samples,
            ..self.clone()
        }
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Self {
        Self {
            epsilon,
            ..self.clone()
        }
    }

    pub fn with_center(&self, center: Vec<f64>) -> Self {
        Self {
            center,
            ..self.clone()
        }
    }

    pub fn reversed(&self) -> Self {
        Self {
            reversed: !self.reversed,
            ..self.clone()
        }
    }
}

/// Circle of radius `epsilon` in coordinates `plane` around `center`.
pub fn circle_loop(center: Vec<f64>, plane: (usize, usize), epsilon: f64, samples: usize) -> Result<ParameterLoop> {
    ParameterLoop::new(center, plane, LoopShape::Circle, epsilon, samples)
}
