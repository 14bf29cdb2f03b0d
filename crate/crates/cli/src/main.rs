//! `fforge`: Fréchet means, geodesics, benchmarks and PGA from the shell.

use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use fforge::adaptive::{adaptive_solve, BatchConfig};
use fforge::baselines::{run_first_order, Minibatch, OptimizerConfig};
use fforge::bench::{gen_dataset, run_experiment, write_outputs, write_rows_csv, AnyField, ExperimentSpec, FinslerSpec, WindKind};
use fforge::frechet::{solve, FrechetOptions, InitMean, Mode, ResultSummary, WeightedDataset};
use fforge::geodesic::{georce, DiscreteCurve, GeorceOptions};
use fforge::manifold::zoo::ManifoldParams;
use fforge::manifold::ManifoldSpec;
use fforge::stats::{pga, LogConvention};
use fforge::Error;

#[derive(Parser)]
#[command(name = "fforge", version, about = "Fréchet means and geodesics on Riemannian and Finsler manifolds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute one Fréchet mean and print the result JSON.
    Mean(MeanArgs),
    /// Compute the geodesic between two points and print it as CSV.
    Geodesic(GeodesicArgs),
    /// Run every method of an experiment spec and print the results table.
    Benchmark(BenchmarkArgs),
    /// Principal geodesic analysis of a saved mean result.
    Pga(PgaArgs),
    /// Generate a synthetic dataset as CSV.
    GenData(GenDataArgs),
}

#[derive(Args, Clone)]
struct ManifoldArgs {
    /// Zoo manifold name (sphere, ellipsoid, torus, hyperbolic, ...).
    #[arg(long)]
    manifold: String,
    #[arg(long)]
    dim: Option<usize>,
    /// Manifold parameters as JSON, or @path to a JSON file.
    #[arg(long)]
    params: Option<String>,
    /// Turn the manifold into a Randers field with this wind.
    #[arg(long, value_enum)]
    finsler_wind: Option<Wind>,
    #[arg(long, default_value_t = 1.0)]
    v0: f64,
    #[arg(long, default_value_t = 1.0)]
    wind_scale: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Wind {
    Generic,
    None,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Riemannian,
    Finsler,
    FinslerBackward,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Riemannian => Mode::Riemannian,
            ModeArg::Finsler => Mode::Finsler,
            ModeArg::FinslerBackward => Mode::FinslerBackward,
        }
    }
}

#[derive(Args)]
struct MeanArgs {
    #[command(flatten)]
    manifold: ManifoldArgs,
    /// Dataset CSV (header x_0,...,x_{d-1}[,weight]).
    #[arg(long, conflicts_with = "gen")]
    data: Option<PathBuf>,
    /// Generate the dataset instead of reading it.
    #[arg(long)]
    gen: bool,
    #[arg(long = "N", default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long = "T", default_value_t = 100)]
    steps: usize,
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
    #[arg(long)]
    max_iter: Option<usize>,
    /// georce_fm, adaptive_georce_fm, or an optimizer (adam, rmsprop, ...).
    #[arg(long, default_value = "georce_fm")]
    method: String,
    /// Mode of the mean; defaults to finsler when a wind is given.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    sub_iters: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    /// Write the result JSON here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write each curve as curve_<i>.csv into this directory.
    #[arg(long)]
    curves_dir: Option<PathBuf>,
}

#[derive(Args)]
struct GeodesicArgs {
    #[command(flatten)]
    manifold: ManifoldArgs,
    /// Start point, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    from: Vec<f64>,
    /// End point, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    to: Vec<f64>,
    #[arg(long = "T", default_value_t = 100)]
    steps: usize,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 100)]
    max_iter: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchmarkArgs {
    /// Experiment spec (JSON).
    spec: PathBuf,
    /// Overrides the spec's output_dir.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct PgaArgs {
    #[command(flatten)]
    manifold: ManifoldArgs,
    /// Result JSON written by `fforge mean`.
    #[arg(long)]
    result: PathBuf,
    #[arg(long, value_enum, default_value = "mean-tangent")]
    convention: Convention,
    /// Number of sample geodesics along the first principal direction.
    #[arg(long, default_value_t = 0)]
    samples: usize,
    /// Sample coefficients run over [-range, range] times √λ₁.
    #[arg(long, default_value_t = 1.0)]
    range: f64,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Directory for sample_<k>.csv files.
    #[arg(long)]
    curves_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Convention {
    FirstControl,
    MeanTangent,
}

#[derive(Args)]
struct GenDataArgs {
    #[arg(long)]
    manifold: String,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    params: Option<String>,
    #[arg(long = "N", default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Any failure with the exit code it maps to.
enum Failure {
    Usage(String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

type CliResult<T> = Result<T, Failure>;

fn io_err(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::Core(Error::Io(format!("{}: {e}", path.display())))
}

fn parse_params(raw: Option<&str>) -> CliResult<ManifoldParams> {
    let Some(raw) = raw else {
        return Ok(ManifoldParams::default());
    };
    let text = match raw.strip_prefix('@') {
        Some(path) => std::fs::read_to_string(path).map_err(|e| io_err(Path::new(path), e))?,
        None => raw.to_string(),
    };
    serde_json::from_str(&text).map_err(|e| Failure::Core(Error::Config(format!("--params: {e}"))))
}

impl ManifoldArgs {
    fn spec(&self) -> CliResult<ManifoldSpec> {
        Ok(ManifoldSpec {
            name: self.manifold.clone(),
            dim: self.dim,
            params: parse_params(self.params.as_deref())?,
        })
    }

    fn finsler(&self) -> Option<FinslerSpec> {
        self.finsler_wind.map(|w| FinslerSpec {
            wind: match w {
                Wind::Generic => WindKind::Generic,
                Wind::None => WindKind::None,
            },
            v0: self.v0,
            scale: self.wind_scale,
        })
    }

    fn field(&self) -> CliResult<AnyField> {
        Ok(AnyField::build(&self.spec()?, self.finsler().as_ref())?)
    }
}

fn output(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(File::create(p).map_err(|e| io_err(p, e))?),
        None => Box::new(io::stdout().lock()),
    })
}

fn write_json(path: Option<&Path>, value: &Value) -> CliResult<()> {
    let mut out = output(path)?;
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::Core(Error::Io(e.to_string())))?;
    writeln!(out, "{text}").map_err(|e| Failure::Core(e.into()))
}

fn write_curves(dir: &Path, prefix: &str, curves: &[DiscreteCurve]) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    for (i, c) in curves.iter().enumerate() {
        let p = dir.join(format!("{prefix}_{i}.csv"));
        c.write_csv(File::create(&p).map_err(|e| io_err(&p, e))?)?;
    }
    Ok(())
}

fn cmd_mean(a: &MeanArgs) -> CliResult<()> {
    let field = a.manifold.field()?;
    let data = match (&a.data, a.gen) {
        (Some(p), _) => WeightedDataset::read_csv(File::open(p).map_err(|e| io_err(p, e))?)?,
        (None, true) => gen_dataset(field.background(), a.n, a.seed)?,
        (None, false) => return Err(Failure::Usage("give either --data <csv> or --gen".into())),
    };
    let mode: Mode = match a.mode {
        Some(m) => m.into(),
        None if a.manifold.finsler_wind.is_some() => Mode::Finsler,
        None => Mode::Riemannian,
    };
    let (result, mut extra) = match a.method.as_str() {
        "georce_fm" => {
            let mut opts = FrechetOptions {
                steps: a.steps,
                tol: a.tol,
                init: InitMean::FirstPoint,
                ..Default::default()
            };
            if let Some(k) = a.max_iter {
                opts.max_iter = k;
            }
            (solve(&field, &data, &opts, mode)?, serde_json::Map::new())
        }
        "adaptive_georce_fm" => {
            let mut cfg = BatchConfig {
                batch_size: a.batch_size.unwrap_or(data.len().div_ceil(10)),
                tol: a.tol,
                inner_tol: a.tol,
                seed: a.seed,
                ..Default::default()
            };
            if let Some(s) = a.sub_iters {
                cfg.sub_iters = s;
            }
            if let Some(l) = a.lambda {
                cfg.lambda = l;
            }
            if let Some(k) = a.max_iter {
                cfg.max_outer = k;
            }
            let r = adaptive_solve(&field, &data, a.steps, &cfg, mode)?;
            let extra = r.summary().extra;
            (r.result, extra)
        }
        name => {
            let mut cfg = OptimizerConfig {
                method: name.parse()?,
                steps: a.steps,
                tol: a.tol,
                ..Default::default()
            };
            if let Some(k) = a.max_iter {
                cfg.max_iter = k;
            }
            let batch = a.batch_size.map(|batch_size| Minibatch { batch_size, seed: a.seed });
            let r = run_first_order(&cfg, &field, &data, batch, mode)?;
            let extra = r.summary().extra;
            (r.result, extra)
        }
    };
    extra.insert("manifold".into(), Value::String(a.manifold.manifold.clone()));
    extra.insert("method".into(), Value::String(a.method.clone()));
    let summary = ResultSummary {
        extra,
        ..result.summary()
    };
    if let Some(dir) = &a.curves_dir {
        write_curves(dir, "curve", &result.curves)?;
    }
    let value = serde_json::to_value(&summary).map_err(|e| Failure::Core(Error::Io(e.to_string())))?;
    write_json(a.out.as_deref(), &value)
}

fn cmd_geodesic(a: &GeodesicArgs) -> CliResult<()> {
    let field = a.manifold.field()?;
    let opts = GeorceOptions {
        steps: a.steps,
        tol: a.tol,
        max_iter: a.max_iter,
        ..Default::default()
    };
    let report = georce(&field, &a.from, &a.to, &opts)?;
    report.curve.write_csv(output(a.out.as_deref())?)?;
    Ok(())
}

fn cmd_benchmark(a: &BenchmarkArgs) -> CliResult<()> {
    let text = std::fs::read_to_string(&a.spec).map_err(|e| io_err(&a.spec, e))?;
    let spec: ExperimentSpec =
        serde_json::from_str(&text).map_err(|e| Failure::Core(Error::Config(format!("{}: {e}", a.spec.display()))))?;
    let rows = run_experiment(&spec)?;
    let dir = a.out_dir.clone().or_else(|| spec.output_dir.as_ref().map(PathBuf::from));
    if let Some(dir) = dir {
        write_outputs(&rows, &dir)?;
    }
    write_rows_csv(&rows, io::stdout().lock())?;
    Ok(())
}

fn cmd_pga(a: &PgaArgs) -> CliResult<()> {
    let text = std::fs::read_to_string(&a.result).map_err(|e| io_err(&a.result, e))?;
    let result: ResultSummary = serde_json::from_str(&text)
        .map_err(|e| Failure::Core(Error::Config(format!("{}: {e}", a.result.display()))))?;
    let convention = match a.convention {
        Convention::FirstControl => LogConvention::FirstControl,
        Convention::MeanTangent => LogConvention::MeanTangent,
    };
    let p = pga(&result, convention)?;
    if a.samples > 0 {
        let metric = a.manifold.spec()?.build()?;
        let spread = p.eigenvalues[0].max(0.0).sqrt() * a.range;
        let mut curves = Vec::with_capacity(a.samples);
        for k in 0..a.samples {
            let c = if a.samples == 1 {
                spread
            } else {
                -spread + 2.0 * spread * k as f64 / (a.samples - 1) as f64
            };
            let path = p.sample_path(&metric, &[c])?;
            curves.push(DiscreteCurve {
                points: path.into_iter().map(|(_, x)| x).collect(),
            });
        }
        match &a.curves_dir {
            Some(dir) => write_curves(dir, "sample", &curves)?,
            None => return Err(Failure::Usage("--samples needs --curves-dir".into())),
        }
    }
    write_json(
        a.out.as_deref(),
        &json!({ "eigenvalues": p.eigenvalues, "directions": p.directions, "base": p.base }),
    )
}

fn cmd_gen_data(a: &GenDataArgs) -> CliResult<()> {
    let spec = ManifoldSpec {
        name: a.manifold.clone(),
        dim: a.dim,
        params: parse_params(a.params.as_deref())?,
    };
    let data = gen_dataset(&spec.build()?, a.n, a.seed)?;
    data.write_csv(output(a.out.as_deref())?)?;
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Shape { .. } | Error::Domain { .. } | Error::Io(_) => 2,
        _ => 3,
    }
}

fn report(kind: &str, message: &str, code: u8) -> ExitCode {
    eprintln!("{}", json!({ "error": kind, "message": message }));
    ExitCode::from(code)
}

fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var("FFORGE_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| format!("FFORGE_THREADS must be a positive integer, got '{raw}'"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let _ = e.print();
            return report("usage", &e.kind().to_string(), 1);
        }
    };
    if let Err(msg) = configure_threads() {
        return report("config", &msg, 2);
    }
    let outcome = match &cli.command {
        Command::Mean(a) => cmd_mean(a),
        Command::Geodesic(a) => cmd_geodesic(a),
        Command::Benchmark(a) => cmd_benchmark(a),
        Command::Pga(a) => cmd_pga(a),
        Command::GenData(a) => cmd_gen_data(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => report("usage", &msg, 1),
        Err(Failure::Core(e)) => report(e.kind(), &e.to_string(), exit_code(&e)),
    }
}
