use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Param(String),
    #[error("invalid zero-coupon curve: {0}")]
    Curve(String),
    #[error("index out of range: {0}")]
    Index(String),
    #[error("grid error: {0}")]
    Grid(String),
    #[error("Levy truncation tolerance {tol:e} unreachable at dx={dx}")]
    Tol { tol: f64, dx: f64 },
    #[error("singular tridiagonal system: pivot {pivot:e} at row {row}")]
    Singular { row: usize, pivot: f64 },
    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("standard Bates reduction requires sigma_r = 0 and rho2 = 0")]
    Reduction,
    #[error("operation needs an American contract with retained surfaces")]
    Style,
    #[error("regression under-determined: {itm} in-the-money paths for {basis} basis functions")]
    Regression { itm: usize, basis: usize },
    #[error("outside transform domain: {0}")]
    Domain(String),
    #[error("price {price} outside no-arbitrage bounds [{lower}, {upper}]")]
    Arb { price: f64, lower: f64, upper: f64 },
    #[error("degenerate convergence sequence: |P_N - P_N/2| = {0:e}")]
    Degenerate(f64),
    #[error("out of scope: {0}")]
    Scope(String),
    #[error("probability clamp active at node ({n}, {k})")]
    ClampActive { n: usize, k: usize },
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
