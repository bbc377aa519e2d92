//! Replication benchmarks: every (method, m) cell is run on `R` datasets and
//! scored against ground truth.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::format_real;
use crate::rng::{derive_seed, BASELINE_STREAM, GENERATOR_STREAM};
use crate::synthgen::SyntheticName;
use crate::validation::PairCounts;
use crate::{
    explain, kmeans_fit, standardize, Dataset, EnsembleConfig, Error, KMeansConfig, Partition, ResampleScheme, Result,
    RngStream, SchemeKind,
};

/// Restarts for the plain K-means baseline.
pub const BASELINE_RESTARTS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    Basic,
    Efron,
    Bbc,
    KMeans,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Basic, Method::Efron, Method::Bbc, Method::KMeans];
    pub const PROPOSED: [Method; 3] = [Method::Basic, Method::Efron, Method::Bbc];

    pub fn name(self) -> &'static str {
        match self {
            Method::Basic => "basic",
            Method::Efron => "efron",
            Method::Bbc => "bbc",
            Method::KMeans => "kmeans",
        }
    }

    fn id(self) -> u64 {
        self as u64
    }

    pub fn scheme(self) -> Option<SchemeKind> {
        match self {
            Method::Basic => Some(SchemeKind::Basic),
            Method::Efron => Some(SchemeKind::Efron),
            Method::Bbc => Some(SchemeKind::Pbb),
            Method::KMeans => None,
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::InvalidConfig(format!("unknown method {s:?}")))
    }
}

/// Where each replication's dataset comes from.
#[derive(Debug, Clone)]
pub enum Source {
    /// Regenerated from a fresh stream every replication.
    Synthetic(SyntheticName),
    /// The same data every replication; only the method seeds change.
    Fixed { name: String, data: Dataset },
}

impl Source {
    pub fn name(&self) -> &str {
        match self {
            Source::Synthetic(s) => s.name(),
            Source::Fixed { name, .. } => name,
        }
    }

    pub fn dataset(&self, seed: u64, replication: usize) -> Dataset {
        match self {
            Source::Synthetic(s) => s.generate(&mut RngStream::new(
                derive_seed(seed, &[replication as u64]),
                GENERATOR_STREAM,
            )),
            Source::Fixed { data, .. } => data.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub methods: Vec<Method>,
    pub subspace_sizes: Vec<usize>,
    pub replications: usize,
    pub seed: u64,
    /// Ensemble size `B`.
    pub replicas: usize,
    pub omega: f64,
    /// Cluster count; `None` uses the number of truth clusters.
    pub k: Option<usize>,
    /// K-means restarts inside each ensemble member.
    pub restarts: usize,
}

impl BenchmarkConfig {
    pub fn new(methods: Vec<Method>, subspace_sizes: Vec<usize>, replications: usize, seed: u64) -> Self {
        Self {
            methods,
            subspace_sizes,
            replications,
            seed,
            replicas: 100,
            omega: 0.1,
            k: None,
            restarts: 1,
        }
    }
}

/// One scored run, traceable to its seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub replication: usize,
    pub method: Method,
    /// `None` for the baseline, which uses all features.
    pub m: Option<usize>,
    pub seed: u64,
    pub ari: f64,
    pub fmi: f64,
    pub feature_importance: Vec<Option<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: f64,
    pub count: usize,
}

impl MeanSd {
    pub fn of(xs: impl IntoIterator<Item = f64>) -> Option<Self> {
        let xs: Vec<f64> = xs.into_iter().collect();
        if xs.is_empty() {
            return None;
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let sd = if xs.len() > 1 {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Some(Self {
            mean,
            sd,
            count: xs.len(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub method: Method,
    pub m: usize,
    pub ari: MeanSd,
    pub fmi: MeanSd,
    /// Per feature; `None` when no replication covered the feature.
    pub feature_importance: Vec<Option<MeanSd>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub dataset: String,
    pub k: usize,
    pub feature_names: Vec<String>,
    pub config: BenchmarkConfig,
    pub cells: Vec<CellSummary>,
    pub runs: Vec<RunRecord>,
}

impl BenchmarkReport {
    pub fn cell(&self, method: Method, m: usize) -> Option<&CellSummary> {
        self.cells.iter().find(|c| c.method == method && c.m == m)
    }

    pub fn runs_of(&self, method: Method, m: Option<usize>) -> impl Iterator<Item = &RunRecord> {
        self.runs
            .iter()
            .filter(move |r| r.method == method && (method == Method::KMeans || r.m == m))
    }
}

fn score(pred: &Partition, truth: &Partition) -> Result<(f64, f64)> {
    let pc = PairCounts::new(pred, truth)?;
    Ok((pc.adjusted_rand().value, pc.fowlkes_mallows().value))
}

#[derive(Debug, Clone, Copy)]
struct Job {
    replication: usize,
    method: Method,
    m: Option<usize>,
}

fn run_job(source: &Source, cfg: &BenchmarkConfig, job: Job) -> Result<RunRecord> {
    let data = source.dataset(cfg.seed, job.replication);
    let truth = data.truth().ok_or(Error::MissingTruth)?.clone();
    let k = cfg.k.unwrap_or_else(|| truth.n_nonempty());
    let seed = derive_seed(
        cfg.seed,
        &[job.replication as u64, job.method.id(), job.m.unwrap_or(0) as u64],
    );
    let (pred, fi) = match (job.method.scheme(), job.m) {
        (Some(kind), Some(m)) => {
            let mut ecfg =
                EnsembleConfig::new(k, m, ResampleScheme::of_kind(kind, cfg.omega), seed).with_replicas(cfg.replicas);
            ecfg.kmeans.restarts = cfg.restarts;
            let report = explain(&data, &ecfg)?;
            (report.consensus.partition, report.feature_importance.scores)
        }
        _ => {
            let std = standardize(&data).dataset;
            let kcfg = KMeansConfig::new(k).with_restarts(BASELINE_RESTARTS);
            let model = kmeans_fit(
                std.values().view(),
                &vec![1.0; std.n()],
                &kcfg,
                &mut RngStream::new(seed, BASELINE_STREAM),
            )?;
            (Partition::new(model.labels), vec![None; std.p()])
        }
    };
    let (ari, fmi) = score(&pred, &truth)?;
    Ok(RunRecord {
        replication: job.replication,
        method: job.method,
        m: job.m,
        seed,
        ari,
        fmi,
        feature_importance: fi,
    })
}

/// Runs every cell on every replication. Jobs run on the current rayon pool;
/// results are reduced in job order, so output does not depend on the number
/// of workers.
pub fn run_benchmark(source: &Source, cfg: &BenchmarkConfig) -> Result<BenchmarkReport> {
    if cfg.replications == 0 {
        return Err(Error::InvalidConfig("need at least one replication".into()));
    }
    let probe = source.dataset(cfg.seed, 0);
    let truth = probe.truth().ok_or(Error::MissingTruth)?;
    let k = cfg.k.unwrap_or_else(|| truth.n_nonempty());
    if let Some(&m) = cfg.subspace_sizes.iter().find(|&&m| m == 0 || m > probe.p()) {
        return Err(Error::InvalidConfig(format!("m = {m} outside [1, {}]", probe.p())));
    }

    let mut jobs = Vec::new();
    for replication in 0..cfg.replications {
        for &method in &cfg.methods {
            if method == Method::KMeans {
                jobs.push(Job {
                    replication,
                    method,
                    m: None,
                });
            } else {
                for &m in &cfg.subspace_sizes {
                    jobs.push(Job {
                        replication,
                        method,
                        m: Some(m),
                    });
                }
            }
        }
    }
    let runs = jobs
        .par_iter()
        .map(|&job| run_job(source, cfg, job))
        .collect::<Result<Vec<_>>>()?;

    let p = probe.p();
    let mut cells = Vec::new();
    for &method in &cfg.methods {
        for &m in &cfg.subspace_sizes {
            let sel: Vec<&RunRecord> = runs
                .iter()
                .filter(|r| r.method == method && (method == Method::KMeans || r.m == Some(m)))
                .collect();
            let feature_importance = (0..p)
                .map(|j| MeanSd::of(sel.iter().filter_map(|r| r.feature_importance[j])))
                .collect();
            cells.push(CellSummary {
                method,
                m,
                ari: MeanSd::of(sel.iter().map(|r| r.ari)).expect("R >= 1"),
                fmi: MeanSd::of(sel.iter().map(|r| r.fmi)).expect("R >= 1"),
                feature_importance,
            });
        }
    }
    Ok(BenchmarkReport {
        dataset: source.name().to_owned(),
        k,
        feature_names: probe.feature_names().to_vec(),
        config: cfg.clone(),
        cells,
        runs,
    })
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Long-format table: `dataset,method,m,metric,mean,sd,R`. Baseline rows are
/// repeated for every `m` so the table pivots directly. Feature-importance
/// metrics are named `FI:<feature>`.
pub fn write_benchmark_csv(report: &BenchmarkReport, path: &Path) -> Result<()> {
    let mut out = String::from("dataset,method,m,metric,mean,sd,R\n");
    for cell in &report.cells {
        let mut row = |metric: &str, s: &MeanSd| {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                report.dataset,
                cell.method.name(),
                cell.m,
                metric,
                format_real(s.mean),
                format_real(s.sd),
                s.count
            ));
        };
        row("ARI", &cell.ari);
        row("FMI", &cell.fmi);
        for (name, fi) in report.feature_names.iter().zip(&cell.feature_importance) {
            if let Some(fi) = fi {
                row(&format!("FI:{name}"), fi);
            }
        }
    }
    std::fs::write(path, out).map_err(io_err(path))
}

pub fn write_benchmark_json(report: &BenchmarkReport, path: &Path) -> Result<()> {
    let json = serde_json::to_string_pretty(report).map_err(|e| Error::Csv(e.to_string()))?;
    std::fs::write(path, json + "\n").map_err(io_err(path))
}

/// Per-m series for plotting: `plot_ari.csv` and `plot_fmi.csv` with one
/// mean/sd column pair per method, and `plot_fi_<method>.csv` with one column
/// per feature.
pub fn write_plot_data(report: &BenchmarkReport, dir: &Path) -> Result<()> {
    let methods = &report.config.methods;
    let ms = &report.config.subspace_sizes;
    for (file, pick) in [
        ("plot_ari.csv", (|c: &CellSummary| c.ari) as fn(&CellSummary) -> MeanSd),
        ("plot_fmi.csv", |c: &CellSummary| c.fmi),
    ] {
        let mut out = String::from("m");
        for m in methods {
            out.push_str(&format!(",{0}_mean,{0}_sd", m.name()));
        }
        out.push('\n');
        for &m in ms {
            out.push_str(&m.to_string());
            for &method in methods {
                let s = pick(report.cell(method, m).expect("cell exists"));
                out.push_str(&format!(",{},{}", format_real(s.mean), format_real(s.sd)));
            }
            out.push('\n');
        }
        let path = dir.join(file);
        std::fs::write(&path, out).map_err(io_err(&path))?;
    }
    for &method in methods.iter().filter(|m| **m != Method::KMeans) {
        let mut out = String::from("m");
        for name in &report.feature_names {
            out.push(',');
            out.push_str(name);
        }
        out.push('\n');
        for &m in ms {
            out.push_str(&m.to_string());
            for fi in &report.cell(method, m).expect("cell exists").feature_importance {
                out.push(',');
                if let Some(fi) = fi {
                    out.push_str(&format_real(fi.mean));
                }
            }
            out.push('\n');
        }
        let path = dir.join(format!("plot_fi_{}.csv", method.name()));
        std::fs::write(&path, out).map_err(io_err(&path))?;
    }
    Ok(())
}
