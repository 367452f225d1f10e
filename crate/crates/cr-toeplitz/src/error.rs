//! Error types for every layer of the kit.

use thiserror::Error;

/// Failures of jet arithmetic.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum JetError {
    #[error("variable count mismatch: {left} vs {right}")]
    VarCountMismatch { left: usize, right: usize },
    #[error("truncation order mismatch: {left} vs {right}")]
    OrderMismatch { left: usize, right: usize },
    #[error("base point mismatch at component {component}")]
    BasePointMismatch { component: usize },
    #[error("variable index {index} out of range for {num_vars} variables")]
    IndexOutOfRange { index: usize, num_vars: usize },
    #[error("constant term is zero; jet is not invertible")]
    ZeroConstantTerm,
    #[error("constant term {re} + {im}i has non-positive real part (branch cut)")]
    BranchCut { re: f64, im: f64 },
    #[error("inner jet {component} is centered at {found}, outer base expects {expected}")]
    CenteringViolation {
        component: usize,
        expected: String,
        found: String,
    },
    #[error("expected {expected} values, got {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("truncation order {order} exceeds the supported maximum of 255")]
    OrderTooLarge { order: usize },
}

/// Failures while building or inspecting CR model charts.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("CR dimension n must be at least 1, got {0}")]
    InvalidDimension(usize),
    #[error("jet order {order} is below the minimum {min}")]
    JetOrderTooLow { order: usize, min: usize },
    #[error("chart invariant violated: {0}")]
    InvariantViolation(String),
    #[error("consistency identity violated: residual {residual:e}")]
    ConsistencyViolation { residual: f64 },
    #[error("perturbation data malformed: {0}")]
    MalformedPerturbation(String),
    #[error("operation requires the exact Heisenberg chart")]
    NotHeisenberg,
    #[error(transparent)]
    Jet(#[from] JetError),
}

/// Failures of the symbol calculus.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SymbolError {
    #[error("density exponent s must be non-zero")]
    ZeroDensityExponent,
    #[error("density must be positive at the base point, got {0}")]
    NonPositiveDensity(f64),
    #[error("Jacobian of the diffeomorphism is singular at the base point")]
    SingularJacobian,
    #[error("symbol has no components")]
    Empty,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Jet(#[from] JetError),
}

/// Failures of the stationary phase engine and its quadrature oracle.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum PhaseError {
    #[error("phase is not critical at the expansion point: |grad| = {0:e}")]
    NotCritical(f64),
    #[error("phase does not vanish at the expansion point: |value| = {0:e}")]
    NonZeroValue(f64),
    #[error("Hessian is singular")]
    SingularHessian,
    #[error("square-root branch ambiguity: {0}")]
    Branch(String),
    #[error("jet order {have} is insufficient, need at least {need}")]
    InsufficientOrder { have: usize, need: usize },
    #[error("at most two expansion coefficients are supported, requested {0}")]
    TooManyCoefficients(usize),
    #[error("quadrature oracle: {0}")]
    Quadrature(String),
    #[error("least-squares fit residual {residual:e} exceeds threshold {threshold:e}")]
    FitResidual { residual: f64, threshold: f64 },
    #[error(transparent)]
    Jet(#[from] JetError),
}

/// Failures of the kernel pipelines and representation utilities.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum KernelError {
    #[error("amplitude depends on the last y variable")]
    NotYIndependent,
    #[error("amplitude has no coefficients")]
    EmptyAmplitude,
    #[error("rescale function is not identically 1 on the diagonal (residual {0:e})")]
    NotDiagonalUnit(f64),
    #[error("jet order {have} is insufficient, need at least {need}")]
    InsufficientOrder { have: usize, need: usize },
    #[error("symbol must be flagged homogeneous")]
    NotHomogeneous,
    #[error("incompatible inputs: {0}")]
    Incompatible(String),
    #[error(transparent)]
    Phase(#[from] PhaseError),
    #[error(transparent)]
    Symbol(#[from] SymbolError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Jet(#[from] JetError),
}
