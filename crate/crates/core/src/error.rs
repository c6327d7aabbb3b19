use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("axis {axis} out of range for a {dim}-dimensional grid")]
    AxisOutOfRange { axis: usize, dim: usize },

    #[error("spectral derivatives need a power-of-two point count, got {0}")]
    NotPowerOfTwo(usize),

    #[error("operation requires a periodic grid")]
    NotPeriodic,

    #[error("field has {got} values but the grid has {expected} nodes")]
    LengthMismatch { expected: usize, got: usize },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("point {0:?} lies outside the dirichlet domain")]
    OutsideDomain(Vec<f64>),

    #[error("loop through node at {0:?}")]
    LoopThroughNode(Vec<usize>),

    #[error("invalid loop: {0}")]
    InvalidLoop(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("start {index} lies on a node of the wave function")]
    StartOnNode { index: usize },

    #[error("loop vertex {vertex} captured by a node at time index {time_index}")]
    VertexCaptured { vertex: usize, time_index: usize },

    #[error("probe {0} left the domain")]
    ProbeExited(usize),

    #[error("proposal too loose: acceptance rate {0:.3e}")]
    ProposalTooLoose(f64),

    #[error("gauge constraint violated by {0:.3e}")]
    GaugeConstraint(f64),

    #[error("least-squares fit matrix is rank deficient")]
    RankDeficient,

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
