use thiserror::Error;

/// Errors raised by the geometric and numerical routines of this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeomError {
    #[error("ambient dimension mismatch: expected {expected}, got {found}")]
    AmbientMismatch { expected: usize, found: usize },
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("the ambient space itself cannot be a member of the semilattice")]
    ContainsAmbient,
    #[error("unknown member `{0}`")]
    UnknownMember(String),
    #[error("non-finite coordinate in input")]
    NonFinite,
    #[error("linear map is singular")]
    SingularMap,
    #[error("argument outside the domain: {0}")]
    DomainError(String),
    #[error("the south pole has no stereographic image")]
    PoleError,
    #[error("subspace must be proper and nonzero")]
    DegenerateSubspace,
    #[error("direction vector is zero")]
    DegenerateDirection,
    #[error("point lies on the singular set")]
    OnSingularSet,
    #[error("point lies on the blown-up center")]
    OnBlownCenter,
    #[error("the two strata do not meet and no test point was supplied")]
    EmptyIntersection,
    #[error("finite-difference stencil reaches the singular set")]
    StencilTooWide,
    #[error("candidate eigenpair rejected: residual {residual:e} at radius {radius}")]
    InvalidEigenpair { residual: f64, radius: f64 },
    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, GeomError>;
