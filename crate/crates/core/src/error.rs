use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Broad failure classes, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad input data, bad files, bad configuration.
    Data,
    /// The numerics went wrong (NaN activations, divergence).
    Numeric,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate montage: common average reference needs at least 2 channels, got {0}")]
    DegenerateMontage(usize),

    #[error("interpolation rank error: {0}")]
    InterpolationRank(String),

    #[error("insufficient data: need at least {needed} samples, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("invalid sample rate {0}")]
    InvalidSampleRate(f64),

    #[error("autocorrelation undefined for a constant (zero-variance) signal")]
    UndefinedAutocorrelation,

    #[error("invalid recording: {0}")]
    InvalidRecording(String),

    #[error("component {component}: {source}")]
    Component {
        component: String,
        #[source]
        source: Box<Error>,
    },

    #[error("graph error: {0}")]
    Shape(String),

    #[error("numeric instability: non-finite activations in layer {layer}")]
    NumericInstability { layer: String },

    #[error("non-finite gradient in layer {layer}; optimizer step rejected")]
    NonFiniteGradient { layer: String },

    #[error("training diverged at batch {batch}: validation loss {loss}")]
    Divergence { batch: u64, loss: f64 },

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid label vector: {0}")]
    InvalidLabel(String),

    #[error("malformed submission: {0}")]
    MalformedSubmission(String),

    #[error("no prior configured for labeler {0:?}")]
    MissingPrior(String),

    #[error("invalid prior: {0}")]
    InvalidPrior(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("ROC curve undefined for category {category}: no {side} examples")]
    UndefinedCurve { category: usize, side: &'static str },

    #[error("SOC point undefined: {0}")]
    UndefinedPoint(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("{path}: line {line}: {message}")]
    Csv {
        path: String,
        line: u64,
        message: String,
    },

    #[error("component ids differ: missing from predictions {missing_in_predictions:?}, missing from targets {missing_in_targets:?}")]
    IdMismatch {
        missing_in_predictions: Vec<String>,
        missing_in_targets: Vec<String>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::NumericInstability { .. }
            | Error::NonFiniteGradient { .. }
            | Error::Divergence { .. } => ErrorKind::Numeric,
            Error::Component { source, .. } => source.kind(),
            _ => ErrorKind::Data,
        }
    }

    pub(crate) fn in_component(self, component: impl Into<String>) -> Error {
        Error::Component {
            component: component.into(),
            source: Box::new(self),
        }
    }
}
