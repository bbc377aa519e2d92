//! The bagged-clustering pipeline: replicas, feature importance and the
//! consensus partition.

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::infotheory::{feature_label_mi, normalize_mi, vi_from_contingency, MiVector};
use crate::partition::ContingencyMatrix;
use crate::resample::{draw_replica, elicit_prior, PriorModel};
use crate::rng::PRIOR_STREAM;
use crate::validation::dunn_index;
use crate::{
    assign_nearest, kmeans_fit, standardize, Dataset, Error, KMeansConfig, Partition, ResampleScheme, Result,
    RngStream, SchemeKind,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    /// Number of replicas `B`.
    pub replicas: usize,
    /// Features drawn per replica, `m`.
    pub subspace_size: usize,
    pub scheme: ResampleScheme,
    /// K-means settings for every replica; `kmeans.k` is the cluster count.
    pub kmeans: KMeansConfig,
    pub master_seed: u64,
}

impl EnsembleConfig {
    /// `B = 100` single-start replicas.
    pub fn new(k: usize, subspace_size: usize, scheme: ResampleScheme, master_seed: u64) -> Self {
        Self {
            replicas: 100,
            subspace_size,
            scheme,
            kmeans: KMeansConfig::new(k),
            master_seed,
        }
    }

    pub fn with_replicas(mut self, replicas: usize) -> Self {
        self.replicas = replicas;
        self
    }

    pub fn k(&self) -> usize {
        self.kmeans.k
    }

    pub fn validate(&self, d: &Dataset) -> Result<()> {
        if self.replicas == 0 {
            return Err(Error::InvalidConfig("B must be at least 1".into()));
        }
        if self.subspace_size == 0 || self.subspace_size > d.p() {
            return Err(Error::InvalidConfig(format!(
                "subspace size m = {} must lie in [1, {}]",
                self.subspace_size,
                d.p()
            )));
        }
        if self.k() == 0 || self.k() > d.n() {
            return Err(Error::InvalidConfig(format!(
                "K = {} must lie in [1, {}]",
                self.k(),
                d.n()
            )));
        }
        self.scheme.validate()
    }
}

/// Outcome of one replica.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicaResult {
    pub index: usize,
    /// Sorted feature indices used for clustering.
    pub subspace: Vec<usize>,
    /// Full-data labels by nearest centroid.
    pub partition: Partition,
    /// Dunn index of the full data under `partition`; 0 when fewer than two
    /// clusters are non-empty, `inf` (serialized as null) when every cluster
    /// has zero diameter.
    pub quality_weight: f64,
    /// Mutual information of each subspace feature with `partition`.
    pub mi: MiVector,
    /// K-means failed; the replica takes part in no aggregation.
    pub degenerate: bool,
}

/// Uniform `m`-subset of `0..p`, sorted.
pub fn sample_subspace(p: usize, m: usize, rng: &mut RngStream) -> Result<Vec<usize>> {
    if m == 0 || m > p {
        return Err(Error::InvalidConfig(format!("cannot draw {m} of {p} features")));
    }
    let mut s = index::sample(rng, p, m).into_vec();
    s.sort_unstable();
    Ok(s)
}

/// Runs replica `b` on a standardized dataset. Every random draw comes from
/// stream `b` of the master seed.
pub fn run_replica(d: &Dataset, prior: Option<&PriorModel>, cfg: &EnsembleConfig, b: usize) -> Result<ReplicaResult> {
    let mut rng = RngStream::new(cfg.master_seed, b as u64);
    let sample = draw_replica(d, prior, &cfg.scheme, &mut rng)?;
    let subspace = sample_subspace(d.p(), cfg.subspace_size, &mut rng)?;
    let points = sample.restrict(d, &subspace);

    let model = match kmeans_fit(points.view(), &sample.weights, &cfg.kmeans, &mut rng) {
        Ok(m) => m,
        Err(Error::TooFewPoints { .. } | Error::ZeroWeight) => {
            return Ok(ReplicaResult {
                index: b,
                subspace: subspace.clone(),
                partition: Partition::new(vec![0; d.n()]),
                quality_weight: 0.0,
                mi: normalize_mi(&vec![0.0; subspace.len()]),
                degenerate: true,
            })
        }
        Err(e) => return Err(e),
    };
    let partition = assign_nearest(d, &subspace, model.centroids.view())?;
    let quality_weight = match dunn_index(d.values().view(), &partition) {
        Ok(w) => w,
        Err(Error::TooFewClusters(_)) => 0.0,
        Err(e) => return Err(e),
    };
    let raw = subspace
        .iter()
        .map(|&j| {
            let col = d.column(j).to_vec();
            feature_label_mi(&col, &partition).map(|m| m.bits)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ReplicaResult {
        index: b,
        subspace,
        partition,
        quality_weight,
        mi: normalize_mi(&raw),
        degenerate: false,
    })
}

/// Aggregation weights: the Dunn index, with infinite values replaced by the
/// largest finite one and degenerate replicas set to zero.
pub fn effective_weights(results: &[ReplicaResult]) -> Vec<f64> {
    let usable = || results.iter().filter(|r| !r.degenerate);
    let finite_max = usable()
        .map(|r| r.quality_weight)
        .filter(|w| w.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    let cap = if finite_max > 0.0 { finite_max } else { 1.0 };
    results
        .iter()
        .map(|r| match r {
            r if r.degenerate => 0.0,
            r if r.quality_weight.is_infinite() => cap,
            r => r.quality_weight,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureImportance {
    /// `None` for features no usable replica selected.
    pub scores: Vec<Option<f64>>,
    /// Number of usable replicas that selected each feature.
    pub coverage: Vec<usize>,
    /// Features whose replicas all had zero weight and were averaged
    /// unweighted.
    pub unweighted: Vec<usize>,
}

/// Quality-weighted mean of the normalized mutual information of each
/// feature over the replicas that selected it.
pub fn aggregate_feature_importance(results: &[ReplicaResult], p: usize) -> Result<FeatureImportance> {
    if results.iter().all(|r| r.degenerate) {
        return Err(Error::AllReplicasDegenerate);
    }
    let weights = effective_weights(results);
    let mut num = vec![0.0; p];
    let mut den = vec![0.0; p];
    let mut plain = vec![0.0; p];
    let mut coverage = vec![0usize; p];
    for (r, &w) in results.iter().zip(&weights) {
        if r.degenerate {
            continue;
        }
        for (&j, &v) in r.subspace.iter().zip(&r.mi.normalized) {
            num[j] += w * v;
            den[j] += w;
            plain[j] += v;
            coverage[j] += 1;
        }
    }
    let mut unweighted = Vec::new();
    let scores = (0..p)
        .map(|j| match coverage[j] {
            0 => None,
            _ if den[j] > 0.0 => Some((num[j] / den[j]).clamp(0.0, 1.0)),
            c => {
                unweighted.push(j);
                Some(plain[j] / c as f64)
            }
        })
        .collect();
    Ok(FeatureImportance {
        scores,
        coverage,
        unweighted,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Consensus {
    pub partition: Partition,
    /// Replica whose partition was selected.
    pub replica: usize,
    pub loss: f64,
    /// All usable weights were zero, so every replica counted equally.
    pub uniform_weights: bool,
}

/// Weighted restricted Fréchet mean under the variation of information:
/// the realized partition minimizing `Σ_b w_b VI(ℓ, ℓ_b)`. Ties go to the
/// lowest replica index.
pub fn consensus_partition(results: &[ReplicaResult]) -> Result<Consensus> {
    let usable: Vec<&ReplicaResult> = results.iter().filter(|r| !r.degenerate).collect();
    if usable.is_empty() {
        return Err(Error::AllReplicasDegenerate);
    }
    let all = effective_weights(results);
    let mut weights: Vec<f64> = results
        .iter()
        .zip(&all)
        .filter(|(r, _)| !r.degenerate)
        .map(|(_, &w)| w)
        .collect();
    let uniform_weights = weights.iter().all(|&w| w == 0.0);
    if uniform_weights {
        weights.fill(1.0);
    }
    let n = usable.len();
    let mut vi = vec![0.0; n * n];
    for a in 0..n {
        for b in (a + 1)..n {
            let m = ContingencyMatrix::new(&usable[a].partition, &usable[b].partition)?;
            let d = vi_from_contingency(&m);
            vi[a * n + b] = d;
            vi[b * n + a] = d;
        }
    }
    let mut best = (0, f64::INFINITY);
    for a in 0..n {
        let loss: f64 = (0..n).map(|b| weights[b] * vi[a * n + b]).sum();
        if loss < best.1 {
            best = (a, loss);
        }
    }
    let winner = usable[best.0];
    Ok(Consensus {
        partition: winner.partition.clone(),
        replica: winner.index,
        loss: best.1,
        uniform_weights,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleReport {
    pub config: EnsembleConfig,
    pub n: usize,
    pub feature_names: Vec<String>,
    /// Columns that were constant and zeroed by standardization.
    pub constant_columns: Vec<usize>,
    pub consensus: Consensus,
    pub feature_importance: FeatureImportance,
    pub effective_weights: Vec<f64>,
    pub degenerate_replicas: usize,
    pub prior: Option<PriorModel>,
    pub replicas: Vec<ReplicaResult>,
}

impl EnsembleReport {
    pub fn consensus_labels(&self) -> &Partition {
        &self.consensus.partition
    }

    /// Indices of covered features, highest importance first; ties keep
    /// feature order.
    pub fn ranking(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.feature_names.len())
            .filter(|&j| self.feature_importance.scores[j].is_some())
            .collect();
        idx.sort_by(|&a, &b| {
            let (x, y) = (self.feature_importance.scores[a], self.feature_importance.scores[b]);
            y.partial_cmp(&x).unwrap_or(std::cmp::Ordering::Equal)
        });
        idx
    }
}

/// Standardizes `d`, elicits the prior when the scheme needs one, runs all
/// replicas (in parallel on the current rayon pool) and aggregates them.
/// Output depends only on the data and the configuration.
pub fn explain(d: &Dataset, cfg: &EnsembleConfig) -> Result<EnsembleReport> {
    cfg.validate(d)?;
    let std = standardize(d);
    let data = &std.dataset;
    let prior = match cfg.scheme.kind {
        SchemeKind::Pbb => Some(elicit_prior(
            data,
            cfg.k(),
            &mut RngStream::new(cfg.master_seed, PRIOR_STREAM),
        )?),
        _ => None,
    };
    let replicas = (0..cfg.replicas)
        .into_par_iter()
        .map(|b| run_replica(data, prior.as_ref(), cfg, b))
        .collect::<Result<Vec<_>>>()?;
    let feature_importance = aggregate_feature_importance(&replicas, data.p())?;
    let consensus = consensus_partition(&replicas)?;
    Ok(EnsembleReport {
        config: cfg.clone(),
        n: data.n(),
        feature_names: data.feature_names().to_vec(),
        constant_columns: std.constant_columns,
        consensus,
        feature_importance,
        effective_weights: effective_weights(&replicas),
        degenerate_replicas: replicas.iter().filter(|r| r.degenerate).count(),
        prior,
        replicas,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::validation::adjusted_rand;
    use ndarray::Array2;

    fn replica(index: usize, labels: &[usize], w: f64, subspace: &[usize], mi: &[f64]) -> ReplicaResult {
        ReplicaResult {
            index,
            subspace: subspace.to_vec(),
            partition: Partition::new(labels.to_vec()),
            quality_weight: w,
            mi: MiVector {
                raw_bits: mi.to_vec(),
                normalized: mi.to_vec(),
                all_zero: false,
            },
            degenerate: false,
        }
    }

    #[test]
    fn subspace_rules() {
        assert_eq!(
            sample_subspace(4, 4, &mut RngStream::new(0, 0)).unwrap(),
            vec![0, 1, 2, 3]
        );
        let a = sample_subspace(10, 3, &mut RngStream::new(1, 5)).unwrap();
        let b = sample_subspace(10, 3, &mut RngStream::new(1, 5)).unwrap();
        assert_eq!(a, b);
        assert!(a.windows(2).all(|w| w[0] < w[1]));
        assert!(sample_subspace(3, 4, &mut RngStream::new(0, 0)).is_err());
        assert!(sample_subspace(3, 0, &mut RngStream::new(0, 0)).is_err());
    }

    #[test]
    fn subspace_is_uniform() {
        let mut counts = [0usize; 3];
        for b in 0..30_000 {
            counts[sample_subspace(3, 1, &mut RngStream::new(2, b)).unwrap()[0]] += 1;
        }
        for c in counts {
            assert!((c as f64 / 30_000.0 - 1.0 / 3.0).abs() <= 0.01);
        }
    }

    #[test]
    fn importance_weighted_means() {
        let rs = vec![
            replica(0, &[0, 1], 1.0, &[0], &[0.4]),
            replica(1, &[0, 1], 1.0, &[0], &[0.6]),
        ];
        let fi = aggregate_feature_importance(&rs, 2).unwrap();
        assert!((fi.scores[0].unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(fi.scores[1], None);
        assert_eq!(fi.coverage, vec![2, 0]);

        let rs = vec![
            replica(0, &[0, 1], 3.0, &[0], &[1.0]),
            replica(1, &[0, 1], 1.0, &[0], &[0.0]),
        ];
        assert_eq!(aggregate_feature_importance(&rs, 1).unwrap().scores[0], Some(0.75));
    }

    #[test]
    fn importance_falls_back_to_plain_mean() {
        let rs = vec![
            replica(0, &[0, 0], 0.0, &[0], &[0.2]),
            replica(1, &[0, 0], 0.0, &[0], &[0.4]),
        ];
        let fi = aggregate_feature_importance(&rs, 1).unwrap();
        assert!((fi.scores[0].unwrap() - 0.3).abs() < 1e-15);
        assert_eq!(fi.unweighted, vec![0]);
    }

    #[test]
    fn all_degenerate_is_an_error() {
        let mut r = replica(0, &[0, 1], 1.0, &[0], &[1.0]);
        r.degenerate = true;
        assert!(matches!(
            aggregate_feature_importance(&[r.clone()], 1),
            Err(Error::AllReplicasDegenerate)
        ));
        assert!(matches!(consensus_partition(&[r]), Err(Error::AllReplicasDegenerate)));
    }

    #[test]
    fn consensus_of_identical_partitions() {
        let rs = vec![
            replica(0, &[0, 0, 1, 1], 1.0, &[0], &[1.0]),
            replica(1, &[1, 1, 0, 0], 2.0, &[0], &[1.0]),
        ];
        let c = consensus_partition(&rs).unwrap();
        assert_eq!(c.loss, 0.0);
        assert_eq!(c.replica, 0);
    }

    #[test]
    fn consensus_majority_with_equal_weights() {
        let rs = vec![
            replica(0, &[0, 1, 0, 1], 1.0, &[0], &[1.0]),
            replica(1, &[0, 0, 1, 1], 1.0, &[0], &[1.0]),
            replica(2, &[1, 1, 0, 0], 1.0, &[0], &[1.0]),
        ];
        // losses: replica 0 pays 2 + 2, replicas 1 and 2 pay 2 each
        let c = consensus_partition(&rs).unwrap();
        assert_eq!(c.replica, 1);
        assert!((c.loss - 2.0).abs() < 1e-12);
    }

    #[test]
    fn consensus_follows_heavy_weight() {
        let rs = vec![
            replica(0, &[0, 1, 0, 1], 10.0, &[0], &[1.0]),
            replica(1, &[0, 0, 1, 1], 1.0, &[0], &[1.0]),
            replica(2, &[0, 0, 1, 1], 1.0, &[0], &[1.0]),
        ];
        // heavy replica: 1·2 + 1·2 = 4; each light one: 10·2 + 0 = 20
        let c = consensus_partition(&rs).unwrap();
        assert_eq!(c.replica, 0);
        assert!((c.loss - 4.0).abs() < 1e-12);
    }

    #[test]
    fn infinite_dunn_is_capped() {
        let rs = vec![
            replica(0, &[0, 1], f64::INFINITY, &[0], &[1.0]),
            replica(1, &[0, 1], 2.5, &[0], &[1.0]),
        ];
        assert_eq!(effective_weights(&rs), vec![2.5, 2.5]);
    }

    fn separated_three_clusters() -> Dataset {
        let centres = [[0.0, 0.0], [10.0, 0.0], [0.0, 10.0]];
        let offsets = [[0.0, 0.0], [0.5, 0.0], [0.0, 0.5], [0.5, 0.5]];
        let mut values = Array2::zeros((12, 2));
        let mut labels = vec![];
        for (c, centre) in centres.iter().enumerate() {
            for (o, off) in offsets.iter().enumerate() {
                values[[c * 4 + o, 0]] = centre[0] + off[0];
                values[[c * 4 + o, 1]] = centre[1] + off[1];
                labels.push(c);
            }
        }
        Dataset::from_values(values)
            .unwrap()
            .with_truth(Partition::new(labels))
            .unwrap()
    }

    #[test]
    fn full_subspace_recovers_separated_clusters() {
        let d = separated_three_clusters();
        let mut cfg = EnsembleConfig::new(3, 2, ResampleScheme::basic(), 4).with_replicas(10);
        cfg.kmeans.restarts = 10;
        let std = standardize(&d).dataset;
        let r = run_replica(&std, None, &cfg, 0).unwrap();
        assert_eq!(adjusted_rand(&r.partition, d.truth().unwrap()).unwrap(), 1.0);
        assert!(r.quality_weight > 0.0);
    }

    #[test]
    fn singleton_ensemble_is_its_replica() {
        let d = separated_three_clusters();
        let cfg = EnsembleConfig::new(3, 2, ResampleScheme::basic(), 11).with_replicas(1);
        let report = explain(&d, &cfg).unwrap();
        let only = &report.replicas[0];
        assert_eq!(report.consensus.partition, only.partition);
        for (&j, &v) in only.subspace.iter().zip(&only.mi.normalized) {
            assert_eq!(report.feature_importance.scores[j], Some(v));
        }
    }

    #[test]
    fn replica_is_reproducible() {
        let d = standardize(&separated_three_clusters()).dataset;
        let prior = elicit_prior(&d, 3, &mut RngStream::new(1, PRIOR_STREAM)).unwrap();
        let cfg = EnsembleConfig::new(3, 1, ResampleScheme::pbb(0.1), 1);
        assert_eq!(
            run_replica(&d, Some(&prior), &cfg, 3).unwrap(),
            run_replica(&d, Some(&prior), &cfg, 3).unwrap()
        );
    }

    #[test]
    fn config_validation() {
        let d = separated_three_clusters();
        assert!(EnsembleConfig::new(3, 3, ResampleScheme::basic(), 0)
            .validate(&d)
            .is_err());
        assert!(EnsembleConfig::new(13, 2, ResampleScheme::basic(), 0)
            .validate(&d)
            .is_err());
        assert!(EnsembleConfig::new(3, 2, ResampleScheme::pbb(1.0), 0)
            .validate(&d)
            .is_err());
        assert!(EnsembleConfig::new(3, 2, ResampleScheme::basic(), 0)
            .with_replicas(0)
            .validate(&d)
            .is_err());
    }
}
