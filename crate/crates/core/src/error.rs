//! Error type shared by all modules.

use thiserror::Error;

/// Everything that can go wrong across the model, trajectory, dynamics,
/// spectrum and analysis layers.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// `|Δ_E|` fell below the degeneracy floor; eigenvectors coalesce and the
    /// biorthogonal normalization diverges (self-orthogonality at an EP).
    #[error("degenerate eigensystem: |gap| = {gap_abs:.3e} below floor {floor:.3e}")]
    DegenerateEigensystem { gap_abs: f64, floor: f64 },

    /// The search box contains no eigenvalue degeneracy.
    #[error("no exceptional point inside the search box (grid minimum |gap| = {min_gap:.3e})")]
    NoEpFound { min_gap: f64 },

    /// Root refinement stalled above the target tolerance.
    #[error("EP search did not converge: best |gap| = {best_gap:.3e} after {iterations} iterations")]
    NonConverged { best_gap: f64, iterations: usize },

    /// A loop constructor was given unusable constants.
    #[error("invalid loop: {0}")]
    InvalidLoop(String),

    /// A parameter point is outside the model's domain.
    #[error("invalid parameter point: {0}")]
    InvalidParameter(String),

    /// The winding-number reference lies on the sampled path.
    #[error("reference point lies on the loop path (distance {distance:.3e}); winding undefined")]
    ReferenceOnPath { distance: f64 },

    /// The adaptive integrator shrank its step below the configured floor.
    #[error("adaptive step underflow at t = {t:.6e}: step {step:.3e} below floor {floor:.3e}")]
    StepUnderflow { t: f64, step: f64, floor: f64 },

    /// Both branch assignments score equally well; the step straddles a
    /// near-degeneracy and should be refined.
    #[error("ambiguous branch assignment: scores {score_keep:.6e} vs {score_swap:.6e}")]
    AmbiguousAssignment { score_keep: f64, score_swap: f64 },

    /// Two evolution records cannot be compared.
    #[error("mismatched records: {0}")]
    MismatchedRecords(String),

    /// The level-set field has no sign change on the grid.
    #[error("empty level set: field has no sign change on the grid")]
    EmptyLevelSet,

    /// A loop varies a parameter that the grid holds fixed.
    #[error("loop does not lie in the grid plane: {0}")]
    PlaneMismatch(String),
}

pub type Result<V> = std::result::Result<V, Error>;
