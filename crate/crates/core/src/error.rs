use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("point lies outside the domain (violation {violation:.3e})")]
    OutsideDomain { violation: f64 },

    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("ellipsoid shape matrix degenerated at iteration {iteration}")]
    DegenerateEllipsoid { iteration: usize },

    #[error(
        "sperner admissibility violated at (q={q}, r={r}): expected color {expected}, got {got}"
    )]
    Inadmissible {
        q: u64,
        r: u64,
        expected: u8,
        got: u8,
    },

    #[error("no VI solution found at the searched resolution (best gap {best_gap:.3e}, target {target:.3e})")]
    ResolutionTooCoarse { best_gap: f64, target: f64 },

    #[error("no trichromatic triangle near the point; color census {census:?}")]
    NoTrichromatic { census: [usize; 3] },

    #[error("certificate mismatch: {0}")]
    Certificate(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
