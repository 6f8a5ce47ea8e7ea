use thiserror::Error;

/// Every failure mode of the library. Variants carry enough context to tell
/// the caller which knob to turn (precision, tolerance, evaluation point).
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error("parameters are supercritical (t0 = {t0} > t0_crit = {t0_crit})")]
    SupercriticalRegime { t0: f64, t0_crit: f64 },
    #[error("operation requires a strictly subcritical regime")]
    CriticalRegime,
    #[error("{what} did not converge after {iterations} iterations")]
    NonConvergence { what: &'static str, iterations: usize },
    #[error("non-finite value while evaluating {0}")]
    EvaluationFailure(String),
    #[error("integrand exceeds the declared decay envelope at t = {t}")]
    TailBoundViolation { t: f64 },
    #[error("value not representable at {bits} bits")]
    OverflowAtPrecision { bits: usize },
    #[error("point is not on contour piece {0}")]
    PieceMismatch(String),
    #[error("discriminant root pattern mismatch (residual {0:e})")]
    RootMismatch(f64),
    #[error("branch tracking failed near z = {0}")]
    BranchTrackingFailure(String),
    #[error("point lies on the support of the measure")]
    OnSupport,
    #[error("point lies outside the support")]
    OutOfSupport,
    #[error("point lies on a branch cut")]
    OnCut,
    #[error("integration path crosses a branch cut")]
    PathCrossesCut,
    #[error("Euler-Lagrange left-hand side is not constant (spread {0:e})")]
    NonConstantEL(f64),
    #[error("measure masses ({m1}, {m2}) violate the constraint")]
    MassViolation { m1: f64, m2: f64 },
    #[error("point lies inside the growth domain")]
    InsideDomain,
    #[error("no unique exterior preimage; point too close to the boundary")]
    SheetAmbiguity,
    #[error("linear system is numerically singular at {bits} bits")]
    SingularSystem { bits: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
