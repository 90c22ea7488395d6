use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate domain: {0}")]
    DegenerateDomain(String),

    #[error("Voronoi cell of seed {index} at ({x}, {y}) collapsed to zero area")]
    CellCollapse { index: usize, x: f64, y: f64 },

    #[error("non-matching interface at edge ({ax}, {ay})-({bx}, {by})")]
    NonMatchingInterface { ax: f64, ay: f64, bx: f64, by: f64 },

    #[error("untagged boundary edge ({ax}, {ay})-({bx}, {by})")]
    UntaggedBoundary { ax: f64, ay: f64, bx: f64, by: f64 },

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("mesh file line {line}: {msg}")]
    MeshFormat { line: usize, msg: String },

    #[error("polynomial degree must be at least 1 (element {element} has degree {degree})")]
    InvalidDegree { element: usize, degree: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("penalty is undefined on Neumann face {0}")]
    NeumannFace(usize),

    #[error("non-finite value at ({x}, {y}): {what}")]
    NonFiniteField { x: f64, y: f64, what: String },

    #[error("non-finite residual: max lambda {max_lambda} on element {element}")]
    NonFiniteResidual { max_lambda: f64, element: usize },

    #[error("Newton failed to converge in {iterations} iterations; residual history {history:?}")]
    NewtonNotConverged { iterations: usize, history: Vec<f64> },

    #[error("Newton diverged: |lambda|_inf = {max_abs} exceeds {limit}")]
    NewtonDiverged { max_abs: f64, limit: f64 },

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("invalid concentration {value} at ({x}, {y})")]
    NegativeConcentration { x: f64, y: f64, value: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
