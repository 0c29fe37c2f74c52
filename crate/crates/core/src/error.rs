use nalgebra::Vector3;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("expression parse error at column {column}: {message}")]
    Parse { column: usize, message: String },

    #[error("medium definition error: {0}")]
    MediumDefinition(String),

    #[error("point ({:.6}, {:.6}, {:.6}) lies outside the support of field `{field}`", .point.x, .point.y, .point.z)]
    OutsideSupport { field: String, point: Vector3<f64> },

    #[error("medium is not admissible at ({:.6}, {:.6}, {:.6}): {reason}", .point.x, .point.y, .point.z)]
    InvalidMedium { point: Vector3<f64>, reason: String },

    #[error("ODE step size underflow at parameter {at}")]
    StepUnderflow { at: f64 },

    #[error("ODE exceeded {0} steps")]
    TooManySteps(usize),

    #[error("trapping suspected: geodesic exceeded max arclength {max_arclength}")]
    TrappingSuspected { max_arclength: f64 },

    #[error("start point is not inside the domain (boundary function = {0:.3e})")]
    StartOutsideDomain(f64),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("parameter {0} lies outside the traced path")]
    OutsidePath(f64),

    #[error("Fermi chart inversion failed: {0}")]
    ChartInversion(String),

    #[error("Riccati integration lost positivity of Im H at tau = {tau} (min eigenvalue {min_eig:.3e})")]
    PositivityLost { tau: f64, min_eig: f64 },

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("wave is not propagating: {0}")]
    NotPropagating(String),

    #[error("polarization is not transversal: <a, xi> = {0:.3e}")]
    NotTransversal(f64),

    #[error("configuration mismatch: {0}")]
    ConfigMismatch(String),

    #[error("closed-form and contraction amplitudes disagree: {general} vs {closed_form}")]
    AmplitudeMismatch { general: f64, closed_form: f64 },

    #[error("rank-deficient design matrix (condition number {condition:.3e}); spread the sweep angles")]
    RankDeficient { condition: f64 },

    #[error("unidentifiable fit: {0}")]
    Unidentifiable(String),

    #[error("inconsistent input: {0}")]
    Inconsistent(String),

    #[error("quadrature budget exceeded: {0}")]
    QuadratureBudget(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
