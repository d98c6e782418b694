use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid model parameters: {0}")]
    InvalidParams(String),

    #[error("x = {x} is outside the evaluation domain |x| < 1 - {margin}")]
    Domain { x: f64, margin: f64 },

    #[error("stationary point lies outside the evaluation domain (beyond {edge})")]
    RootOutsideDomain { edge: f64 },

    #[error("degenerate root cluster in [{lo}, {hi}] could not be resolved")]
    DegenerateCluster { lo: f64, hi: f64 },

    #[error("no inflection pair: beta = {beta} does not exceed beta_hat = {beta_hat}")]
    NoInflectionPair { beta: f64, beta_hat: f64 },

    #[error("threshold computation requires p >= 3, got p = {0}")]
    ThresholdOrder(u32),

    #[error("minimization of {0} was not bracketed in the interior of (0, 1)")]
    Minimization(&'static str),

    #[error("magnetization sum {k} is not reachable for N = {n}")]
    Parity { n: usize, k: i64 },

    #[error("state with sum {sum} violates the restriction (allowed: [{lo}, {hi}])")]
    Restriction { sum: i64, lo: i64, hi: i64 },

    #[error("not on the global-coexistence locus: local maxima heights differ by {gap:e}")]
    NotCoexistence { gap: f64 },

    #[error("metastable windows around {a} and {b} overlap")]
    OverlappingWindows { a: f64, b: f64 },

    #[error("grid needs {required} cells but the budget is {budget}")]
    CellBudget { required: usize, budget: usize },

    #[error("exponent fit refused: {0}")]
    FitRefused(String),

    #[error("epsilon must lie in (0, 1/2), got {0}")]
    InvalidEps(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
