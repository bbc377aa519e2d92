use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use baggex::benchmark::{
    run_benchmark, write_benchmark_csv, write_benchmark_json, write_plot_data, BenchmarkConfig, Method, Source,
};
use baggex::synthgen::SyntheticName;
use baggex::validation::{adjusted_rand, fowlkes_mallows};
use baggex::{
    explain, load_csv, write_csv, Dataset, EnsembleConfig, EnsembleReport, Error, KMeansConfig, ResampleScheme,
    RngStream, SchemeKind,
};
use clap::{Args, Parser, Subcommand};

const SEED_ENV: &str = "BAGGEX_SEED";

#[derive(Parser, Debug)]
#[command(name = "baggex", version, about = "Explainable bagged clustering")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic benchmark dataset as CSV with a trailing truth column.
    Generate(GenerateArgs),
    /// Cluster a CSV file and report the consensus partition and feature importance.
    Explain(ExplainArgs),
    /// Score methods over repeated replications of a dataset.
    Benchmark(BenchmarkArgs),
}

#[derive(Args, Debug)]
struct GenerateArgs {
    /// illustrative, overlap, proportion or correlation
    name: SyntheticName,
    /// Generator seed; falls back to $BAGGEX_SEED, then 0.
    #[arg(long)]
    seed: Option<u64>,
    /// Destination CSV file.
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct Common {
    /// Master seed; falls back to $BAGGEX_SEED, then 0.
    #[arg(long)]
    seed: Option<u64>,
    /// Ensemble size.
    #[arg(long = "B", value_parser = clap::value_parser!(u64).range(1..))]
    replicas: Option<u64>,
    /// Prior weight for the bbc scheme, in [0, 1).
    #[arg(long)]
    omega: Option<f64>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Worker threads; defaults to all cores.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    workers: Option<u64>,
    /// Column holding truth labels (default: `truth` when present).
    #[arg(long)]
    label_column: Option<String>,
    /// K-means restarts inside each ensemble member.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    restarts: Option<u64>,
    /// key=value file; flags take precedence over it.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ExplainArgs {
    /// CSV file with a header row.
    input: PathBuf,
    /// Number of clusters (default: number of truth clusters).
    #[arg(long = "K", value_parser = clap::value_parser!(u64).range(1..))]
    k: Option<u64>,
    /// Subspace size (default: p - 1).
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    m: Option<u64>,
    /// Resampling scheme: basic, efron or bbc (default: bbc).
    #[arg(long, value_parser = parse_scheme)]
    scheme: Option<SchemeKind>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct BenchmarkArgs {
    /// A synthetic dataset name or a CSV file with truth labels.
    dataset: String,
    /// Comma-separated subset of basic,efron,bbc,kmeans (default: all).
    #[arg(long, value_delimiter = ',', value_parser = parse_method)]
    methods: Option<Vec<Method>>,
    /// Comma-separated subspace sizes (default: p - 1).
    #[arg(long, value_delimiter = ',', value_parser = clap::value_parser!(u64).range(1..))]
    m: Option<Vec<u64>>,
    /// Replications per cell (default: 20).
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    replications: Option<u64>,
    /// Number of clusters (default: number of truth clusters).
    #[arg(long = "K", value_parser = clap::value_parser!(u64).range(1..))]
    k: Option<u64>,
    /// Also write per-m series files for plotting.
    #[arg(long)]
    plot_data: bool,
    #[command(flatten)]
    common: Common,
}

fn parse_scheme(s: &str) -> Result<SchemeKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Debug)]
struct Failure(String);

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(e.to_string())
    }
}

type CliResult<T> = Result<T, Failure>;

fn fail<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(Failure(msg.into()))
}

/// Values from a `key=value` file. Blank lines and `#` comments are ignored.
struct ConfigFile {
    path: PathBuf,
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(Self {
                path: PathBuf::new(),
                values: BTreeMap::new(),
            });
        };
        let text = fs::read_to_string(path).map_err(|e| Failure(format!("cannot read {}: {e}", path.display())))?;
        let mut values = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return fail(format!("{}:{}: expected key=value", path.display(), i + 1));
            };
            values.insert(key.trim().to_owned(), value.trim().to_owned());
        }
        Ok(Self {
            path: path.to_path_buf(),
            values,
        })
    }

    fn get<T: std::str::FromStr>(&self, key: &str) -> CliResult<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.values.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|e| Failure(format!("{}: bad value {v:?} for {key}: {e}", self.path.display()))),
        }
    }

    fn get_list<T: std::str::FromStr>(&self, key: &str) -> CliResult<Option<Vec<T>>>
    where
        T::Err: std::fmt::Display,
    {
        match self.values.get(key) {
            None => Ok(None),
            Some(v) => v
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse()
                        .map_err(|e| Failure(format!("{}: bad value {s:?} for {key}: {e}", self.path.display())))
                })
                .collect::<CliResult<Vec<T>>>()
                .map(Some),
        }
    }

    fn check_keys(&self, allowed: &[&str]) -> CliResult<()> {
        match self.values.keys().find(|k| !allowed.contains(&k.as_str())) {
            Some(k) => fail(format!("{}: unknown key {k:?}", self.path.display())),
            None => Ok(()),
        }
    }
}

/// Settings shared by `explain` and `benchmark` after merging flags, config
/// file, environment and defaults.
struct Resolved {
    seed: u64,
    replicas: usize,
    omega: f64,
    workers: Option<usize>,
    label_column: Option<String>,
    restarts: usize,
}

const COMMON_KEYS: [&str; 6] = ["seed", "B", "omega", "workers", "label-column", "restarts"];

fn seed_or_env(seed: Option<u64>) -> CliResult<u64> {
    match seed {
        Some(s) => Ok(s),
        None => match std::env::var(SEED_ENV) {
            Ok(v) => v
                .trim()
                .parse()
                .map_err(|_| Failure(format!("{SEED_ENV}={v:?} is not an unsigned integer"))),
            Err(_) => Ok(0),
        },
    }
}

fn resolve_common(c: &Common, file: &ConfigFile) -> CliResult<Resolved> {
    let seed = seed_or_env(c.seed.or(file.get("seed")?))?;
    let replicas = c.replicas.or(file.get("B")?).unwrap_or(100) as usize;
    if replicas == 0 {
        return fail("B must be at least 1");
    }
    let workers = c.workers.or(file.get("workers")?).map(|w| w as usize);
    if workers == Some(0) {
        return fail("workers must be at least 1");
    }
    let restarts = c.restarts.or(file.get("restarts")?).unwrap_or(1) as usize;
    if restarts == 0 {
        return fail("restarts must be at least 1");
    }
    Ok(Resolved {
        restarts,
        seed,
        replicas,
        omega: c.omega.or(file.get("omega")?).unwrap_or(0.1),
        workers,
        label_column: c.label_column.clone().or(file.get("label-column")?),
    })
}

fn with_pool<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> CliResult<T> {
    match workers {
        None => Ok(f()),
        Some(n) => Ok(rayon::ThreadPoolBuilder::new().num_threads(n).build()?.install(f)),
    }
}

/// Loads a CSV with a header. An explicit label column must exist; otherwise
/// a `truth` column is used when present.
fn load_input(path: &Path, label_column: Option<&str>) -> CliResult<Dataset> {
    match label_column {
        Some(col) => Ok(load_csv(path, true, Some(col))?),
        None => match load_csv(path, true, Some(baggex::data::TRUTH_COLUMN)) {
            Err(Error::MissingLabelColumn(_)) => Ok(load_csv(path, true, None)?),
            other => Ok(other?),
        },
    }
}

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| Failure(format!("cannot create {}: {e}", dir.display())))
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    fs::write(path, contents).map_err(|e| Failure(format!("cannot write {}: {e}", path.display())))
}

fn cmd_generate(args: GenerateArgs) -> CliResult<()> {
    let seed = seed_or_env(args.seed)?;
    let d = args
        .name
        .generate(&mut RngStream::new(seed, baggex::rng::GENERATOR_STREAM));
    write_csv(&d, &args.output)?;
    println!(
        "{}: {} rows x {} features + truth ({} clusters) -> {}",
        args.name.name(),
        d.n(),
        d.p(),
        args.name.k(),
        args.output.display()
    );
    Ok(())
}

fn importance_csv(report: &EnsembleReport) -> String {
    let fi = &report.feature_importance;
    let mut out = String::from("feature,importance,coverage\n");
    for (j, name) in report.feature_names.iter().enumerate() {
        let score = fi.scores[j]
            .map(baggex::data::format_real)
            .unwrap_or_else(|| "NA".into());
        out.push_str(&format!("{name},{score},{}\n", fi.coverage[j]));
    }
    out
}

fn labels_csv(report: &EnsembleReport) -> String {
    let mut out = String::from("row,label\n");
    for (i, l) in report.consensus_labels().labels().iter().enumerate() {
        out.push_str(&format!("{i},{l}\n"));
    }
    out
}

fn cmd_explain(args: ExplainArgs) -> CliResult<()> {
    let file = ConfigFile::load(args.common.config.as_deref())?;
    let mut keys = COMMON_KEYS.to_vec();
    keys.extend(["K", "m", "scheme"]);
    file.check_keys(&keys)?;
    let common = resolve_common(&args.common, &file)?;

    let d = load_input(&args.input, common.label_column.as_deref())?;
    let k = match args.k.or(file.get("K")?) {
        Some(k) => k as usize,
        None => match d.truth() {
            Some(t) => t.n_nonempty(),
            None => return fail("K is required when the input has no truth labels"),
        },
    };
    let m = args
        .m
        .or(file.get("m")?)
        .map(|m| m as usize)
        .unwrap_or(d.p().saturating_sub(1).max(1));
    if m == 0 {
        return fail("m must be at least 1");
    }
    let kind = match args.scheme {
        Some(s) => s,
        None => file.get("scheme")?.unwrap_or(SchemeKind::Pbb),
    };
    let cfg = EnsembleConfig {
        replicas: common.replicas,
        subspace_size: m,
        scheme: ResampleScheme::of_kind(kind, common.omega),
        kmeans: KMeansConfig::new(k).with_restarts(common.restarts),
        master_seed: common.seed,
    };

    let started = Instant::now();
    let report = with_pool(common.workers, || explain(&d, &cfg))??;
    let elapsed = started.elapsed();

    let out = &args.common.out_dir;
    create_dir(out)?;
    write_file(&out.join("labels.csv"), &labels_csv(&report))?;
    write_file(&out.join("importance.csv"), &importance_csv(&report))?;
    write_file(
        &out.join("report.json"),
        &(serde_json::to_string_pretty(&report)? + "\n"),
    )?;

    let stdout = std::io::stdout();
    let mut so = stdout.lock();
    writeln!(so, "rank  feature  importance  coverage")?;
    for (rank, j) in report.ranking().into_iter().enumerate() {
        writeln!(
            so,
            "{:>4}  {:<7}  {:>10.4}  {:>8}",
            rank + 1,
            report.feature_names[j],
            report.feature_importance.scores[j].unwrap_or(f64::NAN),
            report.feature_importance.coverage[j]
        )?;
    }
    for (j, name) in report.feature_names.iter().enumerate() {
        if report.feature_importance.scores[j].is_none() {
            writeln!(so, "   -  {name:<7}  {:>10}  {:>8}", "NA", 0)?;
        }
    }
    if let Some(truth) = d.truth() {
        let labels = report.consensus_labels();
        writeln!(so, "ARI {:.4}", adjusted_rand(labels, truth)?)?;
        writeln!(so, "FMI {:.4}", fowlkes_mallows(labels, truth)?)?;
    }
    if report.degenerate_replicas > 0 {
        eprintln!(
            "warning: {} of {} replicas degenerate",
            report.degenerate_replicas, cfg.replicas
        );
    }
    eprintln!("elapsed {:.3}s", elapsed.as_secs_f64());
    Ok(())
}

fn cmd_benchmark(args: BenchmarkArgs) -> CliResult<()> {
    let file = ConfigFile::load(args.common.config.as_deref())?;
    let mut keys = COMMON_KEYS.to_vec();
    keys.extend(["K", "m", "methods", "replications"]);
    file.check_keys(&keys)?;
    let common = resolve_common(&args.common, &file)?;

    let source = match args.dataset.parse::<SyntheticName>() {
        Ok(name) => Source::Synthetic(name),
        Err(_) => {
            let path = PathBuf::from(&args.dataset);
            if !path.exists() {
                return fail(format!(
                    "{:?} is neither a synthetic dataset (illustrative, overlap, proportion, correlation) nor a file",
                    args.dataset
                ));
            }
            let data = load_input(&path, common.label_column.as_deref())?;
            let name = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            Source::Fixed { name, data }
        }
    };
    let p = source.dataset(common.seed, 0).p();

    let methods = match args.methods {
        Some(m) => m,
        None => file.get_list("methods")?.unwrap_or_else(|| Method::ALL.to_vec()),
    };
    let sizes: Vec<usize> = match args.m {
        Some(m) => m.into_iter().map(|x| x as usize).collect(),
        None => match file.get_list::<usize>("m")? {
            Some(m) => m,
            None => vec![p.saturating_sub(1).max(1)],
        },
    };
    if sizes.contains(&0) {
        return fail("m must be at least 1");
    }
    let replications = args.replications.or(file.get("replications")?).unwrap_or(20) as usize;
    let mut cfg = BenchmarkConfig::new(methods, sizes, replications, common.seed);
    cfg.replicas = common.replicas;
    cfg.omega = common.omega;
    cfg.k = args.k.or(file.get("K")?).map(|k| k as usize);
    cfg.restarts = common.restarts;

    let started = Instant::now();
    let report = with_pool(common.workers, || run_benchmark(&source, &cfg))??;
    let elapsed = started.elapsed().as_secs_f64();

    let out = &args.common.out_dir;
    create_dir(out)?;
    write_benchmark_csv(&report, &out.join("benchmark.csv"))?;
    write_benchmark_json(&report, &out.join("benchmark.json"))?;
    if args.plot_data {
        write_plot_data(&report, out)?;
    }
    // wall-clock lives apart from the reports so those stay byte-reproducible
    let timing = serde_json::json!({
        "dataset": report.dataset,
        "jobs": report.runs.len(),
        "seconds": elapsed,
        "workers": common.workers.unwrap_or_else(rayon::current_num_threads),
    });
    write_file(
        &out.join("timing.json"),
        &(serde_json::to_string_pretty(&timing)? + "\n"),
    )?;

    println!("{:<8} {:>4} {:>15} {:>15}", "method", "m", "ARI", "FMI");
    for c in &report.cells {
        println!(
            "{:<8} {:>4} {:>7.3} ± {:<5.3} {:>7.3} ± {:<5.3}",
            c.method.name(),
            c.m,
            c.ari.mean,
            c.ari.sd,
            c.fmi.mean,
            c.fmi.sd
        );
    }
    eprintln!("{} runs in {elapsed:.3}s", report.runs.len());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                e.exit();
            }
            let rendered = e.render().to_string();
            let first = rendered.lines().next().unwrap_or("error: invalid arguments");
            eprintln!("{first}");
            return ExitCode::from(2);
        }
    };
    let result = match cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Explain(a) => cmd_explain(a),
        Command::Benchmark(a) => cmd_benchmark(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure(msg)) => {
            eprintln!("error: {}", msg.replace('\n', " "));
            ExitCode::from(1)
        }
    }
}
