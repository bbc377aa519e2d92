//! Weighted Lloyd's K-means with Forgy initialization.

use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::{Dataset, Error, Partition, Result, RngStream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansConfig {
    pub k: usize,
    pub max_iter: usize,
    /// Lloyd stops once the relative WSS decrease falls to this value.
    pub tol: f64,
    pub restarts: usize,
}

impl KMeansConfig {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            max_iter: 100,
            tol: 1e-8,
            restarts: 1,
        }
    }

    pub fn with_restarts(mut self, restarts: usize) -> Self {
        self.restarts = restarts;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidConfig("K must be at least 1".into()));
        }
        if self.max_iter == 0 || self.restarts == 0 {
            return Err(Error::InvalidConfig("max_iter and restarts must be at least 1".into()));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::InvalidConfig("tol must be nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansModel {
    pub centroids: Array2<f64>,
    pub labels: Vec<usize>,
    pub wss: f64,
    /// WSS after every assignment step of the winning restart.
    pub wss_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

#[inline]
fn sq_dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index of the nearest centroid and its squared distance; ties go to the
/// lowest index.
#[inline]
fn nearest(x: ArrayView1<f64>, centroids: ArrayView2<f64>) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (k, c) in centroids.rows().into_iter().enumerate() {
        let d = sq_dist(x, c);
        if d < best.1 {
            best = (k, d);
        }
    }
    best
}

fn count_distinct(points: ArrayView2<f64>, weights: &[f64]) -> usize {
    let mut rows: Vec<ArrayView1<f64>> = points
        .rows()
        .into_iter()
        .zip(weights)
        .filter(|(_, &w)| w > 0.0)
        .map(|(r, _)| r)
        .collect();
    rows.sort_by(|a, b| {
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    rows.dedup_by(|a, b| a == b);
    rows.len()
}

/// Fits K-means to weighted points (one row per observation).
///
/// Each restart seeds `k` distinct points by weight-proportional sampling
/// without replacement, then alternates nearest-centroid assignment and
/// weighted-mean updates. A cluster left without weight is reseated at the
/// point with the largest weighted squared distance to its centroid. The
/// restart with the smallest WSS wins; earlier restarts win ties.
pub fn kmeans_fit(
    points: ArrayView2<f64>,
    weights: &[f64],
    cfg: &KMeansConfig,
    rng: &mut RngStream,
) -> Result<KMeansModel> {
    cfg.validate()?;
    if points.nrows() != weights.len() {
        return Err(Error::LengthMismatch {
            left: points.nrows(),
            right: weights.len(),
        });
    }
    if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
        return Err(Error::InvalidConfig("weights must be finite and nonnegative".into()));
    }
    if weights.iter().sum::<f64>() <= 0.0 {
        return Err(Error::ZeroWeight);
    }
    let distinct = count_distinct(points, weights);
    if distinct < cfg.k {
        return Err(Error::TooFewPoints {
            needed: cfg.k,
            found: distinct,
        });
    }

    let mut best: Option<KMeansModel> = None;
    for _ in 0..cfg.restarts {
        let init = forgy(points, weights, cfg.k, rng);
        let model = lloyd(points, weights, init, cfg);
        if best.as_ref().is_none_or(|b| model.wss < b.wss) {
            best = Some(model);
        }
    }
    Ok(best.expect("restarts >= 1"))
}

fn forgy(points: ArrayView2<f64>, weights: &[f64], k: usize, rng: &mut RngStream) -> Array2<f64> {
    let q = points.ncols();
    let mut remaining = weights.to_vec();
    let mut centroids = Array2::zeros((k, q));
    let mut chosen = 0;
    while chosen < k {
        let total: f64 = remaining.iter().sum();
        let target = rng.uniform() * total;
        let mut acc = 0.0;
        let mut pick = remaining.iter().rposition(|&w| w > 0.0).expect("distinct >= k");
        for (i, &w) in remaining.iter().enumerate() {
            acc += w;
            if w > 0.0 && target < acc {
                pick = i;
                break;
            }
        }
        let row = points.row(pick);
        // drop every copy of the picked point so the seeds stay distinct
        for (i, r) in points.rows().into_iter().enumerate() {
            if remaining[i] > 0.0 && r == row {
                remaining[i] = 0.0;
            }
        }
        centroids.row_mut(chosen).assign(&row);
        chosen += 1;
    }
    centroids
}

fn assign(points: ArrayView2<f64>, weights: &[f64], centroids: ArrayView2<f64>) -> (Vec<usize>, f64) {
    let mut labels = Vec::with_capacity(points.nrows());
    let mut wss = 0.0;
    for (x, &w) in points.rows().into_iter().zip(weights) {
        let (k, d) = nearest(x, centroids);
        labels.push(k);
        wss += w * d;
    }
    (labels, wss)
}

fn lloyd(points: ArrayView2<f64>, weights: &[f64], mut centroids: Array2<f64>, cfg: &KMeansConfig) -> KMeansModel {
    let (k, q) = centroids.dim();
    let (mut labels, mut wss) = assign(points, weights, centroids.view());
    let mut history = vec![wss];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < cfg.max_iter {
        iterations += 1;

        let mut sums = Array2::<f64>::zeros((k, q));
        let mut mass = vec![0.0; k];
        for ((x, &w), &l) in points.rows().into_iter().zip(weights).zip(&labels) {
            if w > 0.0 {
                sums.row_mut(l).scaled_add(w, &x);
                mass[l] += w;
            }
        }
        let mut taken = vec![false; points.nrows()];
        for c in 0..k {
            if mass[c] > 0.0 {
                let mut row = centroids.row_mut(c);
                row.assign(&sums.row(c));
                row.mapv_inplace(|v| v / mass[c]);
            }
        }
        for c in 0..k {
            if mass[c] > 0.0 {
                continue;
            }
            let mut far = None;
            let mut far_d = -1.0;
            for (i, (x, &w)) in points.rows().into_iter().zip(weights).enumerate() {
                if taken[i] || w <= 0.0 {
                    continue;
                }
                let d = w * sq_dist(x, centroids.row(labels[i]));
                if d > far_d {
                    far_d = d;
                    far = Some(i);
                }
            }
            if let Some(i) = far {
                taken[i] = true;
                centroids.row_mut(c).assign(&points.row(i));
            }
        }

        let prev_labels = std::mem::take(&mut labels);
        let prev = wss;
        (labels, wss) = assign(points, weights, centroids.view());
        history.push(wss);
        if labels == prev_labels || prev - wss <= cfg.tol * prev {
            converged = true;
            break;
        }
    }
    KMeansModel {
        centroids,
        labels,
        wss,
        wss_history: history,
        iterations,
        converged,
    }
}

/// Labels every row of `d` with its nearest centroid, measured on the
/// `subspace` columns only. Ties go to the lowest centroid index.
pub fn assign_nearest(d: &Dataset, subspace: &[usize], centroids: ArrayView2<f64>) -> Result<Partition> {
    if subspace.is_empty() {
        return Err(Error::EmptySubspace);
    }
    if let Some(&j) = subspace.iter().find(|&&j| j >= d.p()) {
        return Err(Error::InvalidConfig(format!("subspace index {j} out of range")));
    }
    if centroids.ncols() != subspace.len() {
        return Err(Error::LengthMismatch {
            left: centroids.ncols(),
            right: subspace.len(),
        });
    }
    let values = d.values();
    let mut buf = ndarray::Array1::zeros(subspace.len());
    let labels = (0..d.n())
        .map(|i| {
            for (slot, &j) in buf.iter_mut().zip(subspace) {
                *slot = values[[i, j]];
            }
            nearest(buf.view(), centroids).0
        })
        .collect();
    Ok(Partition::new(labels))
}

/// Weighted within-cluster sum of squares of `labels` against `centroids`.
pub fn wss(points: ArrayView2<f64>, weights: &[f64], labels: &[usize], centroids: ArrayView2<f64>) -> f64 {
    points
        .rows()
        .into_iter()
        .zip(weights)
        .zip(labels)
        .map(|((x, &w), &l)| w * sq_dist(x, centroids.row(l)))
        .sum()
}
