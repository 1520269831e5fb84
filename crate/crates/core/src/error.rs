use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("expected between 3 and 16 lists, got {0}")]
    ListCount(usize),

    #[error("table with {0} lists is outside the supported range 1..=16")]
    TableSize(usize),

    #[error("duplicate list label {0:?}")]
    DuplicateLabel(String),

    #[error("unknown list label {0:?}")]
    UnknownLabel(String),

    #[error("cannot parse {0:?} as a pair of list labels")]
    BadPair(String),

    #[error("list index {index} out of range for {t} lists")]
    ListIndex { index: usize, t: usize },

    #[error("capture history {bits:#b} out of range for {t} lists")]
    HistoryOutOfRange { bits: u32, t: usize },

    #[error("the null capture history cannot carry an observed count ({0})")]
    NullHistoryCount(u64),

    #[error("dataset has no observed individuals")]
    EmptyDataset,

    #[error("count table has {got} cells, expected {expected}")]
    CellCount { got: usize, expected: usize },

    #[error("a list pair needs two distinct lists, got {0} twice")]
    DegeneratePair(usize),

    #[error("merging needs at least two lists, got {0}")]
    MergeGroup(usize),

    #[error("unknown builtin dataset {0:?}")]
    UnknownDataset(String),

    #[error("model is for {model} lists but the data has {data}")]
    ModelMismatch { model: usize, data: usize },

    #[error("maximum likelihood estimate does not exist (LP optimum {s_max})")]
    NonexistentMle { s_max: f64 },

    #[error("model parameters are not identifiable")]
    Unidentifiable,

    #[error("Newton iterations did not converge after {iterations} steps")]
    NonConvergence { iterations: usize },

    #[error("{count} non-overlapping pairs would need 2^{count} linear programs: {pairs:?}")]
    TooManyNonOverlapping { count: usize, pairs: Vec<String> },

    #[error("linear program failed: {0}")]
    Lp(#[from] crate::simplex::LpError),

    #[error("leave-one-out estimate for {history} failed: {source}")]
    Jackknife {
        history: String,
        source: alloc::boxed::Box<Error>,
    },

    #[error("bootstrap aborted after {failed} failed resamples out of {requested}")]
    BootstrapAborted { failed: usize, requested: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    /// True for the structural failures (no MLE, non-identifiable model).
    pub fn is_estimability(&self) -> bool {
        matches!(self, Error::NonexistentMle { .. } | Error::Unidentifiable)
    }
}
