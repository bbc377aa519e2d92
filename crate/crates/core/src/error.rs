use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed CSV: {0}")]
    Csv(String),
    #[error("non-numeric cell {value:?} at row {row}, column {col}")]
    Parse { row: usize, col: usize, value: String },
    #[error("duplicate column name {0:?}")]
    DuplicateColumn(String),
    #[error("label column {0:?} not found")]
    MissingLabelColumn(String),
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("need at least {needed} distinct points, found {found}")]
    TooFewPoints { needed: usize, found: usize },
    #[error("total observation weight is zero")]
    ZeroWeight,
    #[error("need at least two non-empty clusters, found {0}")]
    TooFewClusters(usize),
    #[error("need at least {needed} observations, found {found}")]
    TooFewObservations { needed: usize, found: usize },
    #[error("feature has zero spread")]
    DegenerateFeature,
    #[error("subspace is empty")]
    EmptySubspace,
    #[error("every replica is degenerate")]
    AllReplicasDegenerate,
    #[error("dataset has no truth labels")]
    MissingTruth,
}
