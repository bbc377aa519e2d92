//! Fixtures shared by the benchmarks.

use baggex::ensemble::{run_replica, ReplicaResult};
use baggex::rng::GENERATOR_STREAM;
use baggex::synthgen::SyntheticName;
use baggex::{standardize, Dataset, EnsembleConfig, RngStream};

/// A standardized synthetic dataset for a fixed seed.
pub fn dataset(name: SyntheticName, seed: u64) -> Dataset {
    standardize(&name.generate(&mut RngStream::new(seed, GENERATOR_STREAM))).dataset
}

/// `cfg.replicas` replica results, as fed to the aggregation steps.
pub fn replicas(d: &Dataset, cfg: &EnsembleConfig) -> Vec<ReplicaResult> {
    (0..cfg.replicas)
        .map(|b| run_replica(d, None, cfg, b).expect("replica runs"))
        .collect()
}
