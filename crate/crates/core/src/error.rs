use thiserror::Error;

/// Errors shared across the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Numerical rank of a design block is below its column count.
    #[error("rank deficient: numerical rank {rank} < {cols} columns")]
    RankDeficient { rank: usize, cols: usize },

    /// A correlation was requested for a vector of (near-)zero norm.
    #[error("zero vector: norm below 1e-300")]
    ZeroVector,

    /// The two index sets of a decomposition overlap.
    #[error("index sets overlap: {0} shared indices")]
    OverlappingSets(usize),

    /// Submodel columns are not a subset of the comprehensive columns.
    #[error("submodel is not nested in the comprehensive model")]
    NotNested,

    /// Residual norm vanished while estimating sigma (perfect fit).
    #[error("degenerate residual: estimated sigma {sigma:.3e} below 1e-12")]
    DegenerateResidual { sigma: f64 },

    /// More indices than cells in the requested arrangement.
    #[error("arrangement overflow: {indices} indices > {cells} cells")]
    Overflow { indices: usize, cells: usize },

    /// A sample split would leave a part with fewer than two observations.
    #[error("sample too small: part sizes {part_a} / {part_b}, both must be >= 2")]
    TooSmall { part_a: usize, part_b: usize },

    /// Subset enumeration would exceed the configured budget.
    #[error("model budget exceeded: {would_test} models to test > budget {budget}")]
    BudgetExceeded { would_test: u128, budget: u64 },

    /// Reduction did not bring the survivor count under the sample size
    /// within the maximum number of rounds.
    #[error(
        "too many survivors after {rounds} reduction rounds: {survivors} >= sample size {sample}"
    )]
    TooManySurvivors {
        rounds: usize,
        survivors: usize,
        sample: usize,
    },

    /// Iterative solver failed to reach its certificate.
    #[error("no convergence after {sweeps} sweeps: KKT gap {gap:.3e}")]
    NoConvergence { sweeps: usize, gap: f64 },

    /// A precondition on shapes or parameter ranges was violated.
    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }
}
