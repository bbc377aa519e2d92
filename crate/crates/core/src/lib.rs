//! Explainable bagged clustering.
//!
//! K-means is fitted on many bootstrap replicas of a standardized dataset, each
//! restricted to a random feature subspace. Every replica is extended to the
//! full data by nearest-centroid assignment, scored with the Dunn index, and
//! explained by the mutual information between each of its features and the
//! resulting labels. The ensemble yields two outputs:
//!
//! * a feature-importance vector, the Dunn-weighted average of per-replica
//!   normalized mutual information over the replicas that used the feature;
//! * a consensus partition, the realized replica partition minimizing the
//!   Dunn-weighted variation-of-information loss to all others.
//!
//! The crate also ships deterministic generators for the synthetic benchmark
//! datasets and a replication benchmark runner used by the `baggex` CLI.

pub mod benchmark;
pub mod data;
pub mod ensemble;
mod error;
pub mod infotheory;
pub mod kmeans;
pub mod partition;
pub mod resample;
pub mod rng;
pub mod synthgen;
pub mod validation;

pub use data::{load_csv, standardize, write_csv, Dataset, Standardized};
pub use ensemble::{explain, EnsembleConfig, EnsembleReport, ReplicaResult};
pub use error::{Error, Result};
pub use kmeans::{assign_nearest, kmeans_fit, KMeansConfig, KMeansModel};
pub use partition::{ContingencyMatrix, Partition};
pub use resample::{ResampleScheme, SchemeKind, WeightedSample};
pub use rng::RngStream;
