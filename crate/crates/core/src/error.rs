use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors surfaced by the solver library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("grid resolution must be a power of two >= 8, got {0}")]
    BadResolution(usize),

    #[error("resolution mismatch: {0} vs {1}")]
    ResolutionMismatch(usize, usize),

    #[error("non-finite values in {context}")]
    NonFinite { context: &'static str },

    #[error("field is not divergence-free: relative spectral divergence {measured:.3e} exceeds {tolerance:.3e}")]
    NotDivergenceFree { measured: f64, tolerance: f64 },

    #[error("Hölder exponent alpha must lie in (0,1), got {0}")]
    BadAlpha(f64),

    #[error("derivative order {requested} exceeds the configured maximum {max}")]
    DerivativeOrder { requested: usize, max: usize },

    #[error("all-pairs Hölder sampling is restricted to N <= {max}, got N = {n}")]
    AllPairsTooLarge { n: usize, max: usize },

    #[error("time step too large: max|u|*dt = {advect:.3e} exceeds half the grid spacing {limit:.3e}; reduce dt")]
    StepSize { advect: f64, limit: f64 },

    #[error("flow volume drift: |det grad - 1| reached {0:.3e} (> 5%); reduce dt")]
    VolumeDrift(f64),

    #[error("flow map is not invertible: {0}")]
    NearSingularMap(String),

    #[error("Picard iteration did not converge within {max_iter} iterations; residual history {history:?}")]
    NonConvergence { max_iter: usize, history: Vec<f64> },

    #[error("window shrank below one flow step at t = {time:.6}; blow-up suspected ({detail})")]
    BlowUpSuspected { time: f64, detail: String },

    #[error("interval [{0:.6}, {1:.6}] is not covered by the Wiener path grid")]
    PathCoverage(f64, f64),

    #[error("open loop: first and last points differ by {0:.3e}")]
    OpenLoop(f64),

    #[error("config: {0}")]
    Config(String),

    #[error("snapshot format: {0}")]
    SnapshotFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
