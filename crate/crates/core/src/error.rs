use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("polygon needs at least 3 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("vertices {0} and {1} coincide")]
    DuplicateVertex(usize, usize),
    #[error("polygon has zero area")]
    ZeroArea,
    #[error("polygon is not simple: edges {0} and {1} intersect")]
    SelfIntersection(usize, usize),
    #[error("deformation reversed the polygon orientation")]
    OrientationFlip,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("resampling collapsed the mesh: {0}")]
    MeshCollapse(Box<Error>),
    #[error("ear clipping failed with {remaining} vertices left")]
    Triangulation { remaining: usize },
    #[error("singular deformation: det(I + Dg) = {det:e}")]
    SingularDeformation { det: f64 },
    #[error("{kind} matrix is singular or ill-conditioned (condition estimate {cond:e}, sigma {sigma:e})")]
    IllConditioned { kind: String, cond: f64, sigma: f64 },
    #[error("metric matrix is not positive definite (sigma {sigma:e}); anchors too sparse for the kernel support")]
    NotPositiveDefinite { sigma: f64 },
    #[error("Newton direction undefined at vertex {vertex}: normal derivative {value:e}")]
    DegenerateNormalDerivative { vertex: usize, value: f64 },
    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
