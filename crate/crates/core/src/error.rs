use thiserror::Error;

/// Errors raised by every module of the crate.
///
/// Variant names double as the machine-readable error name printed by the CLI
/// (see [`Error::name`]).
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not Hermitian (max |m - m^H| = {residual:.3e})")]
    NotHermitian { residual: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("dimension {0} exceeds the supported maximum of 64")]
    DimensionTooLarge(usize),
    #[error("matrix has non-finite entries")]
    NonFinite,
    #[error("malformed matrix: {0}")]
    MalformedMatrix(String),
    #[error("not a density matrix: {0}")]
    NotADensityMatrix(String),
    #[error("not a POVM: {0}")]
    NotAPovm(String),
    #[error("invalid outcome space: {0}")]
    InvalidOutcomeSpace(String),
    #[error("unknown outcome label {0:?}")]
    UnknownLabel(String),
    #[error("negative probability {value:.3e} for outcome {label:?}")]
    NegativeProbability { label: String, value: f64 },
    #[error("induced probabilities sum to {0}, not 1")]
    NotNormalized(f64),
    #[error("state is not full rank (min eigenvalue {0:.3e})")]
    NotFullRank(f64),
    #[error("outcome {0:?} has a nonzero effect but zero induced mass")]
    InconsistentNullSet(String),
    #[error("outcome labels are not tuples of uniform arity: {0}")]
    MalformedProductLabels(String),
    #[error("invalid instrument: {0}")]
    InvalidInstrument(String),
    #[error("instrument chain mismatch at step {step}: output dim {out_dim} feeds input dim {in_dim}")]
    DimensionChainMismatch { step: usize, out_dim: usize, in_dim: usize },
    #[error("composite outcome space has {0} outcomes (limit 1e6)")]
    OutcomeExplosion(usize),
    #[error("instrument {step} does not commute with its predecessors (basis element ({row},{col}), residual {residual:.3e})")]
    NotCommuting { step: usize, row: usize, col: usize, residual: f64 },
    #[error("unitary completion failed: {0}")]
    CompletionFailure(String),
    #[error("invalid indirect measurement: {0}")]
    InvalidIndirectMeasurement(String),
    #[error("indirect measurements have incompatible outcome spaces or dimensions")]
    IncompatibleOutcomeSpaces,
    #[error("outcome {label:?} has probability {prob:.3e}; posterior undefined")]
    ZeroProbabilityOutcome { label: String, prob: f64 },
    #[error("evidence for the observation is zero")]
    ZeroEvidence,
    #[error("invalid probability vector: {0}")]
    InvalidProbabilityVector(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid estimator: {0}")]
    InvalidEstimator(String),
    #[error("weighted posterior mass is zero")]
    DegenerateWeight,
    #[error("malformed partition: {0}")]
    MalformedPartition(String),
    #[error("model has no per-parameter states")]
    MissingThetaStates,
    #[error("parameter value {0} is not on the grid")]
    UnknownTheta(f64),
    #[error("model has no prior weights")]
    MissingPriorWeights,
    #[error("invalid loss: {0}")]
    InvalidLoss(String),
    #[error("action {action} is incompatible with loss kind {loss}")]
    IncompatibleAction { action: String, loss: String },
    #[error("decision rule has no action for outcome {0:?}")]
    IncompleteRule(String),
    #[error("work budget exceeded: {0}")]
    BudgetExceeded(String),
    #[error("not a projection: {0}")]
    NotAProjection(String),
    #[error("channel has no simple isolated peripheral eigenvalue")]
    NoSpectralGap,
    #[error("distance already below 1e-12 over the whole range")]
    AlreadyConverged,
    #[error("no window of length <= {0} certified strictly positive")]
    PositivityCertificateFailed(usize),
    #[error("degenerate driving: {0}")]
    DegenerateDriving(String),
    #[error("initial state commutes with the unitary; the orbit is constant")]
    CommutingInput,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    /// Stable variant name.
    pub fn name(&self) -> &'static str {
        use Error::*;
        match self {
            NotHermitian { .. } => "NotHermitian",
            DimensionMismatch { .. } => "DimensionMismatch",
            DimensionTooLarge(_) => "DimensionTooLarge",
            NonFinite => "NonFinite",
            MalformedMatrix(_) => "MalformedMatrix",
            NotADensityMatrix(_) => "NotADensityMatrix",
            NotAPovm(_) => "NotAPovm",
            InvalidOutcomeSpace(_) => "InvalidOutcomeSpace",
            UnknownLabel(_) => "UnknownLabel",
            NegativeProbability { .. } => "NegativeProbability",
            NotNormalized(_) => "NotNormalized",
            NotFullRank(_) => "NotFullRank",
            InconsistentNullSet(_) => "InconsistentNullSet",
            MalformedProductLabels(_) => "MalformedProductLabels",
            InvalidInstrument(_) => "InvalidInstrument",
            DimensionChainMismatch { .. } => "DimensionChainMismatch",
            OutcomeExplosion(_) => "OutcomeExplosion",
            NotCommuting { .. } => "NotCommuting",
            CompletionFailure(_) => "CompletionFailure",
            InvalidIndirectMeasurement(_) => "InvalidIndirectMeasurement",
            IncompatibleOutcomeSpaces => "IncompatibleOutcomeSpaces",
            ZeroProbabilityOutcome { .. } => "ZeroProbabilityOutcome",
            ZeroEvidence => "ZeroEvidence",
            InvalidProbabilityVector(_) => "InvalidProbabilityVector",
            InvalidModel(_) => "InvalidModel",
            InvalidEstimator(_) => "InvalidEstimator",
            DegenerateWeight => "DegenerateWeight",
            MalformedPartition(_) => "MalformedPartition",
            MissingThetaStates => "MissingThetaStates",
            UnknownTheta(_) => "UnknownTheta",
            MissingPriorWeights => "MissingPriorWeights",
            InvalidLoss(_) => "InvalidLoss",
            IncompatibleAction { .. } => "IncompatibleAction",
            IncompleteRule(_) => "IncompleteRule",
            BudgetExceeded(_) => "BudgetExceeded",
            NotAProjection(_) => "NotAProjection",
            NoSpectralGap => "NoSpectralGap",
            AlreadyConverged => "AlreadyConverged",
            PositivityCertificateFailed(_) => "PositivityCertificateFailed",
            DegenerateDriving(_) => "DegenerateDriving",
            CommutingInput => "CommutingInput",
            InvalidArgument(_) => "InvalidArgument",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
