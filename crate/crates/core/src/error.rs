use thiserror::Error;

/// Failure modes shared by every numerical routine in the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("numerical instability: {0}")]
    NumericalInstability(String),
    #[error("Fock cutoff {cutoff} too small (tail mass {tail_mass:.3e})")]
    CutoffTooSmall { cutoff: usize, tail_mass: f64 },
    #[error("grid does not cover the state: {0}")]
    DomainTooSmall(String),
    #[error("step-size error: {0}")]
    StepSize(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("zero contour leaves the region of interest")]
    RegionTooSmall,
    #[error("state has no central patch: {0}")]
    NoCentralPatch(String),
    #[error("vanishing gradient on the patch boundary (|grad W| = {0:.3e})")]
    SingularBoundary(f64),
    #[error("singular radial profile: W'(r) = 0 at r = {0}")]
    SingularProfile(f64),
    #[error("numerical inconsistency: {0}")]
    NumericalInconsistency(String),
    #[error("contour too coarse: {0} usable segments")]
    ContourResolution(usize),
    #[error("degenerate state: {0}")]
    DegenerateState(String),
    #[error("density-matrix invariant violated: {0}")]
    Instability(String),
    #[error("malformed input: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
