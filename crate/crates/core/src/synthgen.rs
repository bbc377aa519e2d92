//! Synthetic benchmark datasets with ground-truth labels.
//!
//! Rows are grouped by cluster (cluster 0 first). Features are named
//! `X1, X2, ...`.

use nalgebra::{DMatrix, DVector};
use ndarray::Array2;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::{Dataset, Error, Partition, Result, RngStream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SyntheticName {
    Illustrative,
    Overlap,
    Proportion,
    Correlation,
}

impl SyntheticName {
    pub const ALL: [SyntheticName; 4] = [
        SyntheticName::Illustrative,
        SyntheticName::Overlap,
        SyntheticName::Proportion,
        SyntheticName::Correlation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SyntheticName::Illustrative => "illustrative",
            SyntheticName::Overlap => "overlap",
            SyntheticName::Proportion => "proportion",
            SyntheticName::Correlation => "correlation",
        }
    }

    /// True number of clusters.
    pub fn k(self) -> usize {
        match self {
            SyntheticName::Illustrative => 3,
            SyntheticName::Overlap | SyntheticName::Correlation => 4,
            SyntheticName::Proportion => 5,
        }
    }

    pub fn generate(self, rng: &mut RngStream) -> Dataset {
        match self {
            SyntheticName::Illustrative => gen_illustrative(rng),
            SyntheticName::Overlap => gen_overlap(rng),
            SyntheticName::Proportion => gen_proportion(rng),
            SyntheticName::Correlation => gen_correlation(rng),
        }
    }
}

impl std::str::FromStr for SyntheticName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SyntheticName::ALL
            .into_iter()
            .find(|d| d.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::InvalidConfig(format!("unknown dataset {s:?}")))
    }
}

fn names(p: usize) -> Vec<String> {
    (1..=p).map(|j| format!("X{j}")).collect()
}

fn column_range(values: &Array2<f64>, cols: std::ops::Range<usize>) -> (f64, f64) {
    cols.flat_map(|j| values.column(j).to_vec())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)))
}

fn fill_uniform(values: &mut Array2<f64>, col: usize, (lo, hi): (f64, f64), rng: &mut RngStream) {
    let u = Uniform::new_inclusive(lo, hi).expect("finite range");
    for x in values.column_mut(col) {
        *x = u.sample(rng);
    }
}

/// Three clusters of 99 points in six features: a bivariate Gaussian
/// (X1 bimodal, X2 trimodal), a well-separated trimodal X3, and three uniform
/// noise features spanning the observed ranges of X1∪X2, X1 and X2.
pub fn gen_illustrative(rng: &mut RngStream) -> Dataset {
    const SIZE: usize = 99;
    let means = [(0.0, 0.0), (3.0, 3.0), (3.0, 6.0)];
    let x3_means = [1.0, 3.0, 5.0];
    let (sd1, sd2, sd3) = (0.5f64.sqrt(), 0.1f64.sqrt(), 0.3);
    let n = SIZE * means.len();
    let mut values = Array2::zeros((n, 6));
    let mut labels = Vec::with_capacity(n);
    for (c, (&(m1, m2), &m3)) in means.iter().zip(&x3_means).enumerate() {
        let d1 = Normal::new(m1, sd1).unwrap();
        let d2 = Normal::new(m2, sd2).unwrap();
        let d3 = Normal::new(m3, sd3).unwrap();
        for i in 0..SIZE {
            let row = c * SIZE + i;
            values[[row, 0]] = d1.sample(rng);
            values[[row, 1]] = d2.sample(rng);
            values[[row, 2]] = d3.sample(rng);
            labels.push(c);
        }
    }
    let r12 = column_range(&values, 0..2);
    let r1 = column_range(&values, 0..1);
    let r2 = column_range(&values, 1..2);
    fill_uniform(&mut values, 3, r12, rng);
    fill_uniform(&mut values, 4, r1, rng);
    fill_uniform(&mut values, 5, r2, rng);
    Dataset::new(values, names(6), Some(Partition::new(labels))).expect("valid generator output")
}

/// A block of informative features sharing one covariance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub dim: usize,
    /// Per-feature standard deviation within a cluster.
    pub scale: f64,
    /// Loadings `λ` of the correlation `R_ij = λ_i λ_j`, `R_ii = 1`;
    /// `None` means independent features.
    pub loadings: Option<Vec<f64>>,
}

impl Block {
    fn independent(dim: usize, scale: f64) -> Self {
        Self {
            dim,
            scale,
            loadings: None,
        }
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        let var = self.scale * self.scale;
        match &self.loadings {
            None => DMatrix::identity(self.dim, self.dim) * var,
            Some(l) => DMatrix::from_fn(self.dim, self.dim, |i, j| {
                if i == j {
                    var
                } else {
                    var * l[i.min(j)] * l[i.max(j)]
                }
            }),
        }
    }
}

/// Gaussian mixture over informative blocks plus uniform noise groups.
///
/// Cluster `k` (0-based) is centred at `(k + 1) · 1`. Noise group `g` has
/// `noise[g].0` features uniform on the pooled range of block `noise[g].1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureSpec {
    pub sizes: Vec<usize>,
    pub blocks: Vec<Block>,
    pub noise: Vec<(usize, usize)>,
}

impl MixtureSpec {
    pub fn overlap() -> Self {
        Self {
            sizes: vec![30; 4],
            blocks: [0.2, 0.35, 0.5].map(|s| Block::independent(5, s)).to_vec(),
            noise: vec![(2, 0), (2, 1), (2, 2)],
        }
    }

    pub fn proportion() -> Self {
        Self {
            sizes: vec![15, 20, 40, 30, 15],
            blocks: [0.25, 0.5].map(|s| Block::independent(4, s)).to_vec(),
            noise: vec![(4, 0), (4, 1)],
        }
    }

    pub fn correlation() -> Self {
        let lambda = vec![1.0, 0.75, 0.25, 0.1];
        Self {
            sizes: vec![30; 4],
            blocks: [0.25, 0.35, 0.45]
                .map(|s| Block {
                    dim: 4,
                    scale: s,
                    loadings: Some(lambda.clone()),
                })
                .to_vec(),
            noise: vec![(2, 0), (2, 1), (2, 2)],
        }
    }

    pub fn informative_dim(&self) -> usize {
        self.blocks.iter().map(|b| b.dim).sum()
    }

    pub fn dim(&self) -> usize {
        self.informative_dim() + self.noise.iter().map(|g| g.0).sum::<usize>()
    }

    pub fn mixture_weights(&self) -> Vec<f64> {
        let n: usize = self.sizes.iter().sum();
        self.sizes.iter().map(|&s| s as f64 / n as f64).collect()
    }

    pub fn generate(&self, rng: &mut RngStream) -> Result<Dataset> {
        let factors = self
            .blocks
            .iter()
            .map(|b| {
                b.covariance()
                    .cholesky()
                    .map(|c| c.l())
                    .ok_or_else(|| Error::InvalidConfig("block covariance is not positive definite".into()))
            })
            .collect::<Result<Vec<_>>>()?;
        let n: usize = self.sizes.iter().sum();
        let mut values = Array2::zeros((n, self.dim()));
        let mut labels = Vec::with_capacity(n);
        let std_normal = Normal::new(0.0, 1.0).unwrap();
        let mut row = 0;
        for (k, &size) in self.sizes.iter().enumerate() {
            let mean = (k + 1) as f64;
            for _ in 0..size {
                let mut col = 0;
                for (block, l) in self.blocks.iter().zip(&factors) {
                    let z = DVector::from_fn(block.dim, |_, _| std_normal.sample(rng));
                    let x = l * z;
                    for v in x.iter() {
                        values[[row, col]] = mean + v;
                        col += 1;
                    }
                }
                labels.push(k);
                row += 1;
            }
        }
        let offsets: Vec<usize> = self
            .blocks
            .iter()
            .scan(0, |acc, b| {
                let start = *acc;
                *acc += b.dim;
                Some(start)
            })
            .collect();
        let mut col = self.informative_dim();
        for &(count, block) in &self.noise {
            let start = offsets[block];
            let range = column_range(&values, start..start + self.blocks[block].dim);
            for _ in 0..count {
                fill_uniform(&mut values, col, range, rng);
                col += 1;
            }
        }
        Dataset::new(values, names(self.dim()), Some(Partition::new(labels)))
    }
}

/// Four clusters of 30 in 15 informative features (scales 0.2, 0.35, 0.5)
/// and 6 noise features.
pub fn gen_overlap(rng: &mut RngStream) -> Dataset {
    MixtureSpec::overlap().generate(rng).expect("valid spec")
}

/// Five imbalanced clusters (15, 20, 40, 30, 15) in 8 informative and 8 noise
/// features.
pub fn gen_proportion(rng: &mut RngStream) -> Dataset {
    MixtureSpec::proportion().generate(rng).expect("valid spec")
}

/// Four clusters of 30 in three correlated 4-blocks and 6 noise features.
pub fn gen_correlation(rng: &mut RngStream) -> Dataset {
    MixtureSpec::correlation().generate(rng).expect("valid spec")
}
