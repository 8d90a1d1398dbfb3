use std::fs::{self, File};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use coversumm::datagen::{self, GenKind, GenSpec};
use coversumm::engine::{EngineConfig, SupportWidth, DEFAULT_CAPACITY_FACTOR};
use coversumm::harness::{self, AlgoConfig, Algorithm, BenchRow, DEFAULT_REPEATS};
use coversumm::io::{self, Dataset, FloatWidth, Format};

#[derive(Parser)]
#[command(name = "coversumm", version, about = "Incremental k-nearest-to-centroid summaries of vector streams")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset.
    Gen(GenArgs),
    /// Stream a dataset through one algorithm and write per-step outputs.
    Run(RunArgs),
    /// Time several algorithms on one dataset and score them against brute force.
    Bench(BenchArgs),
    /// Check an algorithm (or a summaries file) against brute force.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Uniform,
    Lda,
    Multimodal,
    Adversarial,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Bin,
    Jsonl,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    kind: KindArg,
    #[arg(long, default_value_t = 10_000)]
    n: usize,
    /// Ignored for lda, whose dimension is the vocabulary size.
    #[arg(long, default_value_t = 100)]
    dim: usize,
    #[arg(long, env = "COVERSUMM_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = datagen::DEFAULT_TOPICS)]
    topics: usize,
    #[arg(long, default_value_t = datagen::DEFAULT_VOCAB)]
    vocab: usize,
    #[arg(long, default_value_t = datagen::DEFAULT_MEAN_LEN)]
    mean_len: f64,
    #[arg(long, default_value_t = 4)]
    modes: usize,
    #[arg(long, default_value_t = datagen::DEFAULT_SIGMA)]
    sigma: f64,
    /// Output encoding; inferred from the extension when omitted (.jsonl or binary).
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Store 32-bit floats in the binary encoding.
    #[arg(long)]
    f32: bool,
    #[arg(long, short)]
    out: PathBuf,
}

/// Algorithm parameters. Precedence: flags, then `--config`, then defaults.
#[derive(Args, Default)]
struct AlgoArgs {
    /// TOML file with any of the keys below (snake_case).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    c_max: Option<usize>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Pin the support width b instead of tracking it from the data.
    #[arg(long)]
    support_width: Option<f64>,
    /// Admission probability of the random variant.
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    c1: Option<f64>,
    #[arg(long)]
    c2: Option<f64>,
    #[arg(long, env = "COVERSUMM_SEED")]
    seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    k: Option<usize>,
    alpha: Option<f64>,
    c_max: Option<usize>,
    gamma: Option<f64>,
    support_width: Option<f64>,
    p: Option<f64>,
    c1: Option<f64>,
    c2: Option<f64>,
    seed: Option<u64>,
}

impl AlgoArgs {
    fn resolve(&self) -> Result<AlgoConfig> {
        let file: FileConfig = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
            }
            None => FileConfig::default(),
        };
        let defaults = AlgoConfig::default();
        let k = self.k.or(file.k).unwrap_or(defaults.engine.k);
        let mut engine = EngineConfig::with_k(k);
        engine.alpha = self.alpha.or(file.alpha).unwrap_or(engine.alpha);
        engine.c_max = self.c_max.or(file.c_max).unwrap_or(DEFAULT_CAPACITY_FACTOR * k);
        engine.gamma = self.gamma.or(file.gamma).unwrap_or(engine.gamma);
        if let Some(b) = self.support_width.or(file.support_width) {
            engine.support = SupportWidth::Fixed(b);
        }
        engine.validate()?;
        Ok(AlgoConfig {
            engine,
            p: self.p.or(file.p).unwrap_or(defaults.p),
            c1: self.c1.or(file.c1).unwrap_or(defaults.c1),
            c2: self.c2.or(file.c2).unwrap_or(defaults.c2),
            seed: self.seed.or(file.seed).unwrap_or(defaults.seed),
        })
    }
}

#[derive(Args)]
struct RunArgs {
    /// One or more datasets; each is an independent entity.
    #[arg(long, required = true, num_args = 1..)]
    data: Vec<PathBuf>,
    #[arg(long, short, default_value = "coversumm")]
    algorithm: Algorithm,
    #[command(flatten)]
    algo: AlgoArgs,
    /// Output directory. With several datasets, one subdirectory per dataset.
    #[arg(long, short)]
    out: PathBuf,
    /// Worker threads used to process several datasets at once.
    #[arg(long, default_value_t = 1)]
    parallel_entities: usize,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    data: PathBuf,
    /// Comma-separated list; defaults to every algorithm.
    #[arg(long, value_delimiter = ',')]
    algorithms: Vec<Algorithm>,
    #[arg(long, default_value_t = DEFAULT_REPEATS)]
    repeats: usize,
    #[command(flatten)]
    algo: AlgoArgs,
    /// Write the table as CSV, or as JSON when the path ends in .json.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, short, default_value = "coversumm")]
    algorithm: Algorithm,
    #[command(flatten)]
    algo: AlgoArgs,
    /// Check this summaries file (as written by `run`) instead of running an algorithm.
    #[arg(long)]
    summaries: Option<PathBuf>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    version: &'a str,
    algorithm: String,
    dataset: String,
    dataset_sha256: &'a str,
    seed: u64,
    config: &'a AlgoConfig,
    steps: usize,
    total_ns: u64,
    reservoir_searches: u64,
    max_reservoir: usize,
    changed_steps: usize,
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Gen(a) => gen(a).map(|_| ExitCode::SUCCESS),
        Command::Run(a) => run(a).map(|_| ExitCode::SUCCESS),
        Command::Bench(a) => bench(a).map(|_| ExitCode::SUCCESS),
        Command::Verify(a) => verify(a),
    }
}

fn gen(a: GenArgs) -> Result<()> {
    let kind = match a.kind {
        KindArg::Uniform => GenKind::Uniform,
        KindArg::Lda => GenKind::Lda { topics: a.topics, vocab: a.vocab, mean_len: a.mean_len },
        KindArg::Multimodal => GenKind::Multimodal { modes: a.modes },
        KindArg::Adversarial => GenKind::Adversarial { sigma: a.sigma },
    };
    let spec = GenSpec::new(kind, a.n, a.dim, a.seed);
    let points = datagen::generate(&spec)?;
    let format = match a.format {
        Some(FormatArg::Jsonl) => Format::Jsonl,
        Some(FormatArg::Bin) => Format::Binary,
        None if a.out.extension().is_some_and(|e| e == "jsonl") => Format::Jsonl,
        None => Format::Binary,
    };
    let width = if a.f32 { FloatWidth::F32 } else { FloatWidth::F64 };
    io::write_dataset(&a.out, &points, format, width).with_context(|| format!("writing {}", a.out.display()))?;
    eprintln!("wrote {} points of dim {} to {}", points.len(), spec.dim, a.out.display());
    Ok(())
}

fn load(path: &Path) -> Result<Dataset> {
    let d = io::read_dataset(path).with_context(|| format!("reading {}", path.display()))?;
    if d.points.is_empty() {
        bail!("{} holds no points", path.display());
    }
    Ok(d)
}

fn run_one(path: &Path, algo: Algorithm, cfg: &AlgoConfig, out: &Path) -> Result<()> {
    let data = load(path)?;
    let result = harness::run(algo, &data.points, cfg)?;
    fs::create_dir_all(out)?;
    io::write_steps_csv(File::create(out.join("steps.csv"))?, &result.records)?;
    io::write_summaries_jsonl(File::create(out.join("summaries.jsonl"))?, &result.records, &data.points)?;
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION"),
        algorithm: result.algorithm.clone(),
        dataset: path.display().to_string(),
        dataset_sha256: &data.sha256,
        seed: cfg.seed,
        config: cfg,
        steps: result.records.len(),
        total_ns: result.total_ns,
        reservoir_searches: result.reservoir_searches,
        max_reservoir: result.max_reservoir,
        changed_steps: result.changed_steps(),
    };
    serde_json::to_writer_pretty(File::create(out.join("manifest.json"))?, &manifest)?;
    eprintln!(
        "{}: {} steps in {:.3}s, {} reservoir searches, max reservoir {}",
        path.display(),
        manifest.steps,
        result.total_secs(),
        manifest.reservoir_searches,
        manifest.max_reservoir
    );
    Ok(())
}

fn run(a: RunArgs) -> Result<()> {
    let cfg = a.algo.resolve()?;
    if a.data.len() == 1 {
        return run_one(&a.data[0], a.algorithm, &cfg, &a.out);
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(a.parallel_entities.max(1)).build()?;
    pool.install(|| {
        a.data.par_iter().try_for_each(|path| {
            let stem = path.file_stem().map_or_else(|| "dataset".into(), |s| s.to_string_lossy().into_owned());
            run_one(path, a.algorithm, &cfg, &a.out.join(stem))
        })
    })
}

fn bench(a: BenchArgs) -> Result<()> {
    let cfg = a.algo.resolve()?;
    let data = load(&a.data)?;
    let algos = if a.algorithms.is_empty() { Algorithm::ALL.to_vec() } else { a.algorithms };
    let rows = harness::bench(&data.points, &algos, &cfg, a.repeats)?;
    print_table(&rows);
    if let Some(out) = a.out {
        let file = File::create(&out).with_context(|| format!("creating {}", out.display()))?;
        if out.extension().is_some_and(|e| e == "json") {
            serde_json::to_writer_pretty(file, &rows)?;
        } else {
            harness::write_bench_csv(file, &rows)?;
        }
    }
    Ok(())
}

fn print_table(rows: &[BenchRow]) {
    println!(
        "{:<22} {:>12} {:>10} {:>9} {:>8} {:>8}",
        "algorithm", "time (s)", "sd", "acc (%)", "max |R|", "n_rs"
    );
    for r in rows {
        println!(
            "{:<22} {:>12.4} {:>10.4} {:>9.2} {:>8} {:>8}",
            r.algorithm, r.mean_secs, r.sd_secs, r.accuracy_pct, r.max_reservoir, r.reservoir_searches
        );
    }
}

fn verify(a: VerifyArgs) -> Result<ExitCode> {
    let cfg = a.algo.resolve()?;
    let data = load(&a.data)?;
    let (report, passed) = match &a.summaries {
        Some(path) => {
            let lines = io::read_summaries_jsonl(path).with_context(|| format!("reading {}", path.display()))?;
            let ids: Vec<Vec<u64>> = lines.into_iter().map(|l| l.ids).collect();
            let report = harness::verify_summaries(&ids, &data.points, cfg.engine.k)?;
            let ok = report.steps_exact == report.steps_total;
            (report, ok)
        }
        None => {
            let v = harness::verify(a.algorithm, &data.points, &cfg)?;
            let ok = v.passed();
            (v.report, ok)
        }
    };
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(if passed { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}
