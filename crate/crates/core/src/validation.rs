//! External (Rand, ARI, Fowlkes–Mallows) and internal (Dunn) cluster indices.

use ndarray::ArrayView2;

use crate::partition::ContingencyMatrix;
use crate::{Error, Partition, Result};

/// An index value plus a flag for degenerate inputs where the textbook
/// formula is undefined and a convention was applied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Score {
    pub value: f64,
    pub degenerate: bool,
}

/// Pair counts between a predicted partition `a` and a reference `b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairCounts {
    /// Pairs together in both.
    pub both: u64,
    /// Pairs together in `a`.
    pub same_a: u64,
    /// Pairs together in `b`.
    pub same_b: u64,
    pub total: u64,
}

fn choose2(x: u64) -> u64 {
    x * x.saturating_sub(1) / 2
}

impl PairCounts {
    pub fn from_contingency(m: &ContingencyMatrix) -> Self {
        Self {
            both: m.nonzero_cells().map(choose2).sum(),
            same_a: m.row_sums().iter().copied().map(choose2).sum(),
            same_b: m.col_sums().iter().copied().map(choose2).sum(),
            total: choose2(m.n()),
        }
    }

    pub fn new(a: &Partition, b: &Partition) -> Result<Self> {
        Ok(Self::from_contingency(&ContingencyMatrix::new(a, b)?))
    }

    pub fn rand(&self) -> f64 {
        let agree = self.total + 2 * self.both - self.same_a - self.same_b;
        agree as f64 / self.total as f64
    }

    /// Hubert–Arabie adjusted Rand index, evaluated in exact integer
    /// arithmetic up to the final division.
    pub fn adjusted_rand(&self) -> Score {
        let (t, a, b, n2) = (
            self.both as i128,
            self.same_a as i128,
            self.same_b as i128,
            self.total as i128,
        );
        let num = 2 * (n2 * t - a * b);
        let den = n2 * (a + b) - 2 * a * b;
        if den == 0 {
            let identical = self.both == self.same_a && self.both == self.same_b;
            return Score {
                value: if identical { 1.0 } else { 0.0 },
                degenerate: true,
            };
        }
        Score {
            value: num as f64 / den as f64,
            degenerate: false,
        }
    }

    pub fn fowlkes_mallows(&self) -> Score {
        if self.same_a == 0 || self.same_b == 0 {
            return Score {
                value: 0.0,
                degenerate: true,
            };
        }
        let den = (self.same_a as u128 * self.same_b as u128) as f64;
        Score {
            value: self.both as f64 / den.sqrt(),
            degenerate: false,
        }
    }
}

fn pairs(a: &Partition, b: &Partition) -> Result<PairCounts> {
    if a.len() < 2 {
        return Err(Error::TooFewObservations {
            needed: 2,
            found: a.len(),
        });
    }
    PairCounts::new(a, b)
}

pub fn rand_index(a: &Partition, b: &Partition) -> Result<f64> {
    Ok(pairs(a, b)?.rand())
}

/// Adjusted Rand index. When the chance-corrected denominator vanishes the
/// value is 1 for identical clusterings and 0 otherwise.
pub fn adjusted_rand(a: &Partition, b: &Partition) -> Result<f64> {
    Ok(pairs(a, b)?.adjusted_rand().value)
}

/// Fowlkes–Mallows index; 0 when either side has no co-clustered pair.
pub fn fowlkes_mallows(a: &Partition, b: &Partition) -> Result<f64> {
    Ok(pairs(a, b)?.fowlkes_mallows().value)
}

/// Dunn index: smallest distance between points of different clusters over
/// the largest within-cluster distance. Empty labels are ignored. Returns
/// `f64::INFINITY` when every cluster has zero diameter.
pub fn dunn_index(points: ArrayView2<f64>, part: &Partition) -> Result<f64> {
    if points.nrows() != part.len() {
        return Err(Error::LengthMismatch {
            left: points.nrows(),
            right: part.len(),
        });
    }
    let nonempty = part.n_nonempty();
    if nonempty < 2 {
        return Err(Error::TooFewClusters(nonempty));
    }
    // group rows by cluster so each pair is classified once
    let mut order: Vec<usize> = (0..part.len()).collect();
    let labels = part.labels();
    order.sort_by_key(|&i| labels[i]);
    let rows: Vec<Vec<f64>> = order.iter().map(|&i| points.row(i).to_vec()).collect();
    let sorted_labels: Vec<usize> = order.iter().map(|&i| labels[i]).collect();

    let mut min_between = f64::INFINITY;
    let mut max_within = 0.0f64;
    for i in 0..rows.len() {
        let (xi, li) = (&rows[i], sorted_labels[i]);
        for j in (i + 1)..rows.len() {
            let d2: f64 = xi.iter().zip(&rows[j]).map(|(a, b)| (a - b) * (a - b)).sum();
            if sorted_labels[j] == li {
                max_within = max_within.max(d2);
            } else {
                min_between = min_between.min(d2);
            }
        }
    }
    if max_within == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(min_between.sqrt() / max_within.sqrt())
}
