use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Hard cluster assignment of `n` observations. Labels are `0..n_labels()`;
/// a label may be unused (an empty cluster).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Partition(Vec<usize>);

impl Partition {
    pub fn new(labels: Vec<usize>) -> Self {
        Self(labels)
    }

    pub fn labels(&self) -> &[usize] {
        &self.0
    }

    pub fn into_labels(self) -> Vec<usize> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// One past the largest label.
    pub fn n_labels(&self) -> usize {
        self.0.iter().max().map_or(0, |&m| m + 1)
    }

    /// Member counts per label, including zero counts for unused labels.
    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.n_labels()];
        for &l in &self.0 {
            sizes[l] += 1;
        }
        sizes
    }

    pub fn n_nonempty(&self) -> usize {
        self.sizes().iter().filter(|&&s| s > 0).count()
    }

    /// Relabels clusters by order of first appearance.
    pub fn canonical(&self) -> Partition {
        let mut map = vec![usize::MAX; self.n_labels()];
        let mut next = 0;
        let labels = self
            .0
            .iter()
            .map(|&l| {
                if map[l] == usize::MAX {
                    map[l] = next;
                    next += 1;
                }
                map[l]
            })
            .collect();
        Partition(labels)
    }

    /// Equality up to a relabeling of clusters.
    pub fn same_clustering(&self, other: &Partition) -> bool {
        self.len() == other.len() && self.canonical() == other.canonical()
    }
}

impl From<Vec<usize>> for Partition {
    fn from(labels: Vec<usize>) -> Self {
        Self(labels)
    }
}

/// Cross-tabulation of two partitions of the same observations.
#[derive(Debug, Clone, PartialEq)]
pub struct ContingencyMatrix {
    counts: Array2<u64>,
    row_sums: Vec<u64>,
    col_sums: Vec<u64>,
    n: u64,
}

impl ContingencyMatrix {
    pub fn new(a: &Partition, b: &Partition) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::LengthMismatch {
                left: a.len(),
                right: b.len(),
            });
        }
        let mut counts = Array2::zeros((a.n_labels(), b.n_labels()));
        for (&r, &c) in a.labels().iter().zip(b.labels()) {
            counts[[r, c]] += 1;
        }
        let row_sums = counts.rows().into_iter().map(|r| r.sum()).collect();
        let col_sums = counts.columns().into_iter().map(|c| c.sum()).collect();
        Ok(Self {
            counts,
            row_sums,
            col_sums,
            n: a.len() as u64,
        })
    }

    pub fn counts(&self) -> &Array2<u64> {
        &self.counts
    }

    pub fn row_sums(&self) -> &[u64] {
        &self.row_sums
    }

    pub fn col_sums(&self) -> &[u64] {
        &self.col_sums
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    /// Nonzero cell counts in row-major order.
    pub fn nonzero_cells(&self) -> impl Iterator<Item = u64> + '_ {
        self.counts.iter().copied().filter(|&c| c > 0)
    }
}

pub fn contingency(a: &Partition, b: &Partition) -> Result<ContingencyMatrix> {
    ContingencyMatrix::new(a, b)
}
