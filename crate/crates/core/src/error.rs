use thiserror::Error;

/// Errors raised anywhere in the library.
///
/// Variants are split into two families: configuration/usage problems
/// (bad input, unknown names, wrong family kind) and numerical failures
/// (non-convergence, degeneracies on a loop, ill-conditioned systems).
/// The CLI maps the first family to exit code 1 and the second to 2.
#[derive(Debug, Error)]
pub enum EpError {
    #[error("matrix is not square ({rows}x{cols})")]
    NonSquare { rows: usize, cols: usize },

    #[error("dimension {0} exceeds the supported maximum of 64")]
    DimensionTooLarge(usize),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite entry in {0}")]
    NonFinite(String),

    #[error("eigensolver did not converge after {0} iterations")]
    EigenNoConvergence(usize),

    #[error("singular value decomposition did not converge")]
    SvdNoConvergence,

    #[error("inconsistent system: least-squares residual {residual:.3e} exceeds {bound:.3e}")]
    InconsistentSystem { residual: f64, bound: f64 },

    #[error("unknown family `{0}`")]
    UnknownFamily(String),

    #[error("invalid option: {0}")]
    InvalidOption(String),

    #[error("malformed family file: {0}")]
    MalformedFamily(String),

    #[error("degenerate EP parametrization: {0}")]
    DegenerateParametrization(String),

    #[error("degenerate point: eigenvalue gap {gap:.3e} below {threshold:.1e}")]
    DegeneratePoint { gap: f64, threshold: f64 },

    #[error("eigenvalue gap collapses on the loop near t = {t:.6} (gap {gap:.3e})")]
    GapCollapse { t: f64, gap: f64 },

    #[error("branch matching stays ambiguous after refinement to {samples} samples per cycle")]
    MatchingAmbiguity { samples: usize },

    #[error("refinement cap of {cap} samples reached (max overlap defect {defect:.3e})")]
    RefinementCap { cap: usize, defect: f64 },

    #[error("tracked level left the selected pair (ended on level {level})")]
    PairEscaped { level: usize },

    #[error("Newton did not converge in {iterations} iterations (|p| = {residual:.3e})")]
    NewtonNoConvergence { iterations: usize, residual: f64 },

    #[error("singular Newton Jacobian (determinant {0:.3e})")]
    SingularJacobian(f64),

    #[error("not a simple EP: {0}")]
    NotSimpleEp(String),

    #[error("inconsistent Jordan chain: <chi0~|chi1> = {0:.3e}")]
    InconsistentChain(f64),

    #[error("family `{0}` is not symmetric; the winding method applies to symmetric families only")]
    NotSymmetric(String),

    #[error("winding quantity passes within {0:.1e} of zero")]
    WindingThroughZero(f64),

    #[error("square-root branch continuation is ambiguous (relative jump {0:.3})")]
    BranchAmbiguity(f64),

    #[error("versal reference gauge is singular on the loop (|det| = {0:.3e})")]
    GaugeSingular(f64),

    #[error("near triple degeneracy: {0}")]
    NearTripleDegeneracy(String),

    #[error("spectator degeneracy: {0}")]
    SpectatorDegeneracy(String),

    #[error("sweep too noisy at epsilon = {epsilon}: error estimate {error:.3e} exceeds deviation {deviation:.3e}; increase the sample count")]
    NoisySweep {
        epsilon: f64,
        error: f64,
        deviation: f64,
    },

    #[error("{0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl EpError {
    /// True for failures of the numerics (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        !matches!(
            self,
            EpError::NonSquare { .. }
                | EpError::DimensionTooLarge(_)
                | EpError::DimensionMismatch(_)
                | EpError::NonFinite(_)
                | EpError::UnknownFamily(_)
                | EpError::InvalidOption(_)
                | EpError::MalformedFamily(_)
                | EpError::NotSymmetric(_)
                | EpError::Config(_)
                | EpError::Io(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, EpError>;
