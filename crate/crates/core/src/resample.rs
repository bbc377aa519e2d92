//! Bootstrap replicas: cloning, Efron's multinomial bootstrap, and the proper
//! Bayesian bootstrap (pBB) with a Gaussian-mixture prior elicited by K-means.

use ndarray::Array2;
use rand_distr::{Distribution, Gamma, Normal};
use serde::{Deserialize, Serialize};

use crate::{kmeans_fit, Dataset, Error, KMeansConfig, Result, RngStream};

/// Restarts used when fitting the clustering that elicits the pBB prior.
pub const PRIOR_RESTARTS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Row {
    /// Index into the source dataset.
    Data(usize),
    /// Observation drawn from the prior, in the dataset's coordinates.
    Prior(Vec<f64>),
}

/// One bootstrap replica: observation records with nonnegative weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSample {
    pub rows: Vec<Row>,
    pub weights: Vec<f64>,
}

impl WeightedSample {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn n_prior_rows(&self) -> usize {
        self.rows.iter().filter(|r| matches!(r, Row::Prior(_))).count()
    }

    /// Materializes the replica's rows on the given columns.
    pub fn restrict(&self, d: &Dataset, subspace: &[usize]) -> Array2<f64> {
        let values = d.values();
        let mut out = Array2::zeros((self.rows.len(), subspace.len()));
        for (mut dst, row) in out.rows_mut().into_iter().zip(&self.rows) {
            for (slot, &j) in dst.iter_mut().zip(subspace) {
                *slot = match row {
                    Row::Data(i) => values[[*i, j]],
                    Row::Prior(x) => x[j],
                };
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeKind {
    Basic,
    Efron,
    #[serde(rename = "bbc")]
    Pbb,
}

impl SchemeKind {
    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::Basic => "basic",
            SchemeKind::Efron => "efron",
            SchemeKind::Pbb => "bbc",
        }
    }
}

impl std::str::FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "basic" => Ok(SchemeKind::Basic),
            "efron" => Ok(SchemeKind::Efron),
            "bbc" | "pbb" => Ok(SchemeKind::Pbb),
            other => Err(Error::InvalidConfig(format!("unknown scheme {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResampleScheme {
    pub kind: SchemeKind,
    /// Probability of drawing from the prior (pBB only), in `[0, 1)`.
    pub omega: f64,
    /// Replica size; `None` means `n`.
    pub replica_size: Option<usize>,
}

impl ResampleScheme {
    pub fn basic() -> Self {
        Self {
            kind: SchemeKind::Basic,
            omega: 0.0,
            replica_size: None,
        }
    }

    pub fn efron() -> Self {
        Self {
            kind: SchemeKind::Efron,
            ..Self::basic()
        }
    }

    pub fn pbb(omega: f64) -> Self {
        Self {
            kind: SchemeKind::Pbb,
            omega,
            replica_size: None,
        }
    }

    pub fn of_kind(kind: SchemeKind, omega: f64) -> Self {
        match kind {
            SchemeKind::Basic => Self::basic(),
            SchemeKind::Efron => Self::efron(),
            SchemeKind::Pbb => Self::pbb(omega),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.omega) {
            return Err(Error::InvalidConfig(format!(
                "omega must lie in [0, 1), got {}",
                self.omega
            )));
        }
        if self.replica_size == Some(0) {
            return Err(Error::InvalidConfig("replica size must be positive".into()));
        }
        Ok(())
    }
}

/// Diagonal Gaussian mixture used as the pBB baseline distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorModel {
    pub component_means: Array2<f64>,
    pub component_sds: Array2<f64>,
    pub mixture_weights: Vec<f64>,
}

impl PriorModel {
    fn draw(&self, rng: &mut RngStream) -> Vec<f64> {
        let u = rng.uniform();
        let mut acc = 0.0;
        let last = self.mixture_weights.len() - 1;
        let comp = self
            .mixture_weights
            .iter()
            .position(|&w| {
                acc += w;
                u < acc
            })
            .unwrap_or(last);
        let mean = self.component_means.row(comp);
        let sd = self.component_sds.row(comp);
        mean.iter()
            .zip(sd)
            .map(|(&m, &s)| {
                if s > 0.0 {
                    Normal::new(m, s).expect("finite sd").sample(rng)
                } else {
                    m
                }
            })
            .collect()
    }
}

/// All rows with unit weight; the randomness comes from elsewhere.
pub fn basic_replica(d: &Dataset, _rng: &mut RngStream) -> WeightedSample {
    WeightedSample {
        rows: (0..d.n()).map(Row::Data).collect(),
        weights: vec![1.0; d.n()],
    }
}

/// Multinomial(n, 1/n) counts as weights over all rows.
pub fn efron_replica(d: &Dataset, rng: &mut RngStream) -> WeightedSample {
    WeightedSample {
        rows: (0..d.n()).map(Row::Data).collect(),
        weights: multinomial_counts(d.n(), rng),
    }
}

/// Counts of `n` uniform draws over `n` cells.
pub fn multinomial_counts(n: usize, rng: &mut RngStream) -> Vec<f64> {
    let mut counts = vec![0.0; n];
    for _ in 0..n {
        counts[rng.index(n)] += 1.0;
    }
    counts
}

/// Fits K-means to the data and turns each cluster into a diagonal Gaussian
/// component: centroid mean, within-cluster sample sds (zero for singletons),
/// and the cluster's share of observations as mixture weight.
pub fn elicit_prior(d: &Dataset, k: usize, rng: &mut RngStream) -> Result<PriorModel> {
    if d.n() < k {
        return Err(Error::TooFewObservations {
            needed: k,
            found: d.n(),
        });
    }
    let cfg = KMeansConfig::new(k).with_restarts(PRIOR_RESTARTS);
    let model = kmeans_fit(d.values().view(), &vec![1.0; d.n()], &cfg, rng)?;
    let p = d.p();
    let mut sizes = vec![0usize; k];
    for &l in &model.labels {
        sizes[l] += 1;
    }
    let mut sds = Array2::<f64>::zeros((k, p));
    for (i, row) in d.values().rows().into_iter().enumerate() {
        let c = model.labels[i];
        for j in 0..p {
            sds[[c, j]] += (row[j] - model.centroids[[c, j]]).powi(2);
        }
    }
    for c in 0..k {
        for j in 0..p {
            sds[[c, j]] = if sizes[c] > 1 {
                (sds[[c, j]] / (sizes[c] - 1) as f64).sqrt()
            } else {
                0.0
            };
        }
    }
    let n = d.n() as f64;
    Ok(PriorModel {
        component_means: model.centroids,
        component_sds: sds,
        mixture_weights: sizes.iter().map(|&s| s as f64 / n).collect(),
    })
}

/// Prior mass `k` equivalent to prior weight `omega = k / (n + k)`.
pub fn prior_mass(omega: f64, n: usize) -> f64 {
    omega * n as f64 / (1.0 - omega)
}

/// Draws a pBB replica: each of the `m` records comes from the prior with
/// probability `omega`, otherwise it is a uniformly drawn data row; weights
/// are Dirichlet with every concentration equal to `(n + k) / m`.
pub fn pbb_replica(
    d: &Dataset,
    prior: &PriorModel,
    scheme: &ResampleScheme,
    rng: &mut RngStream,
) -> Result<WeightedSample> {
    scheme.validate()?;
    let n = d.n();
    let m = scheme.replica_size.unwrap_or(n);
    let alpha = (n as f64 + prior_mass(scheme.omega, n)) / m as f64;
    let gamma = Gamma::new(alpha, 1.0).map_err(|e| Error::InvalidConfig(e.to_string()))?;

    let mut rows = Vec::with_capacity(m);
    for _ in 0..m {
        if scheme.omega > 0.0 && rng.uniform() < scheme.omega {
            rows.push(Row::Prior(prior.draw(rng)));
        } else {
            rows.push(Row::Data(rng.index(n)));
        }
    }
    let mut weights: Vec<f64> = (0..m).map(|_| gamma.sample(rng)).collect();
    let mut total: f64 = weights.iter().sum();
    if total <= 0.0 {
        // every gamma draw underflowed; fall back to the Dirichlet mean
        weights.fill(1.0);
        total = m as f64;
    }
    weights.iter_mut().for_each(|w| *w /= total);
    Ok(WeightedSample { rows, weights })
}

/// Dispatches on the scheme kind. `prior` is required for pBB.
pub fn draw_replica(
    d: &Dataset,
    prior: Option<&PriorModel>,
    scheme: &ResampleScheme,
    rng: &mut RngStream,
) -> Result<WeightedSample> {
    match scheme.kind {
        SchemeKind::Basic => Ok(basic_replica(d, rng)),
        SchemeKind::Efron => Ok(efron_replica(d, rng)),
        SchemeKind::Pbb => {
            let prior = prior.ok_or_else(|| Error::InvalidConfig("pBB needs a prior".into()))?;
            pbb_replica(d, prior, scheme, rng)
        }
    }
}
