use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid bounds for x{label}: [{lower}, {upper}] (need finite 0 <= a < b)")]
    InvalidBounds {
        label: usize,
        lower: f64,
        upper: f64,
    },

    #[error("branching point {point} outside [{lower}, {upper}]")]
    BranchPointOutOfRange { point: f64, lower: f64, upper: f64 },

    #[error("variable x{0} is not valid here")]
    BadVariable(usize),

    #[error("point ({0}, {1}, {2}) lies outside the box")]
    PointOutsideBox(f64, f64, f64),

    #[error("invalid heuristic parameters: alpha = {alpha}, beta = {beta}")]
    InvalidParams { alpha: f64, beta: f64 },

    #[error("grid size {0} is not usable here")]
    BadGrid(usize),
}

pub type Result<T> = std::result::Result<T, Error>;
