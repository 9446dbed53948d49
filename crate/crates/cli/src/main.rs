mod input;
mod report;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use nsp_core::pipeline::{
    DetectSettings, Detector, SelfNormSettings, SigmaChoice, ThresholdChoice,
};
use nsp_core::scenarios::{ScenarioKind, ScenarioSpec};
use nsp_core::selection::cusum_locate;
use nsp_core::sequences::FamilyKind;
use nsp_core::sim::{presets, run_coverage, ExperimentSpec};
use nsp_core::thresholds::{
    gaussian_sampler, gaussian_threshold, light_tailed_threshold, monte_carlo_threshold,
    self_normalised_quantile_cached, ThresholdCache, DEFAULT_EPSILON,
};
use nsp_core::{NspError, Overlap, Sampling};

use crate::report::{DetectReport, LocateReport, RunManifest};

#[derive(Parser, Debug)]
#[command(
    name = "nsp",
    version,
    about = "Narrowest Significance Pursuit: intervals that must contain a change-point"
)]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "NSP_THREADS")]
    threads: Option<usize>,
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Find intervals of significance in a series.
    Detect(DetectArgs),
    /// Print a calibrated threshold.
    Threshold(ThresholdArgs),
    /// Run a replicated coverage experiment.
    Simulate(SimulateArgs),
    /// Locate a change-point inside each interval of a previous detect run.
    Locate(LocateArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ScenarioArg {
    Const,
    Linear,
    Poly,
    Custom,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SamplingArg {
    Grid,
    Random,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum OverlapArg {
    None,
    Half,
    InInference,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ThresholdArg {
    Gaussian,
    LightTailed,
    MonteCarlo,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MethodArg {
    Gaussian,
    LightTailed,
    MonteCarlo,
    Selfnorm,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FamilyArg {
    Dyadic,
    All,
}

impl From<FamilyArg> for FamilyKind {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Dyadic => FamilyKind::Dyadic,
            FamilyArg::All => FamilyKind::All,
        }
    }
}

#[derive(Args, Debug)]
struct DetectArgs {
    /// CSV with one response column (header optional).
    #[arg(long)]
    input: PathBuf,
    /// CSV design matrix with one row per observation; implies --scenario custom.
    #[arg(long)]
    design: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "const")]
    scenario: ScenarioArg,
    /// Polynomial degree for --scenario poly.
    #[arg(long, default_value_t = 2)]
    degree: usize,
    /// Autoregressive order added to the design.
    #[arg(long, default_value_t = 0)]
    ar_order: usize,
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    /// Number of sub-intervals drawn per search interval.
    #[arg(long = "M", visible_alias = "m", default_value_t = 1000)]
    m: usize,
    #[arg(long, value_enum, default_value = "grid")]
    sampling: SamplingArg,
    #[arg(long, value_enum, default_value = "none")]
    overlap: OverlapArg,
    /// rice, mad, mols or a positive number; default mad for const/poly
    /// without lags, mols otherwise.
    #[arg(long)]
    sigma: Option<SigmaChoice>,
    #[arg(long, value_enum, default_value = "gaussian")]
    threshold: ThresholdArg,
    /// Light-tailed threshold: tail exponent d (at least 3).
    #[arg(long, default_value_t = 3)]
    d: u32,
    /// Light-tailed threshold: tail constant kappa.
    #[arg(long, default_value_t = 0.5)]
    kappa: f64,
    /// Monte Carlo threshold replicates.
    #[arg(long, default_value_t = 1000)]
    mc_reps: usize,
    #[arg(long, value_enum, default_value = "dyadic")]
    mc_family: FamilyArg,
    /// Use the self-normalised deviation and threshold.
    #[arg(long)]
    selfnorm: bool,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    epsilon: f64,
    /// Replicates for the self-normalised quantile.
    #[arg(long, default_value_t = 5000)]
    sn_reps: usize,
    /// Grid size for the self-normalised quantile.
    #[arg(long, default_value_t = 1024)]
    sn_grid: usize,
    /// Shortest sub-interval in the self-normalised deviation.
    #[arg(long)]
    sn_min_length: Option<usize>,
    /// JSON file caching self-normalised quantiles.
    #[arg(long)]
    threshold_cache: Option<PathBuf>,
    /// Skip the second-stage search inside each detection.
    #[arg(long)]
    one_stage: bool,
    /// Add a CUSUM change-point location to every interval.
    #[arg(long)]
    locate: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Result JSON (default: stdout).
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Plot-ready CSV of interval shading and located points.
    #[arg(long)]
    plot_csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ThresholdArgs {
    #[arg(long, value_enum, default_value = "gaussian")]
    method: MethodArg,
    /// Series length T (not needed for selfnorm).
    #[arg(long)]
    length: Option<usize>,
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    /// Noise scale to express the threshold in.
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long, default_value_t = 3)]
    d: u32,
    #[arg(long, default_value_t = 0.5)]
    kappa: f64,
    #[arg(long, default_value_t = 1000)]
    reps: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, value_enum, default_value = "dyadic")]
    family: FamilyArg,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    epsilon: f64,
    #[arg(long, default_value_t = 1024)]
    grid: usize,
    #[arg(long)]
    cache: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Experiment spec, JSON or TOML.
    #[arg(long, conflicts_with = "preset")]
    spec: Option<PathBuf>,
    /// Built-in experiment: squarewave, null, ar, squarewave-t4, high-snr.
    #[arg(long)]
    preset: Option<String>,
    /// Override the number of replicates.
    #[arg(long)]
    reps: Option<usize>,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Summary JSON (default: stdout).
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// One CSV row per replicate.
    #[arg(long)]
    replicates_csv: Option<PathBuf>,
    /// Print the resolved spec and exit.
    #[arg(long)]
    print_spec: bool,
}

#[derive(Args, Debug)]
struct LocateArgs {
    /// The series the detect run was made on.
    #[arg(long)]
    input: PathBuf,
    /// JSON written by detect.
    #[arg(long)]
    results: PathBuf,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<NspError>() {
        Some(e) if e.is_numerical() => 3,
        _ => 2,
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            bail!(NspError::InvalidArgument(
                "--threads must be at least 1".into()
            ));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    let threads = rayon::current_num_threads();
    match cli.command {
        Command::Detect(args) => detect(args, threads),
        Command::Threshold(args) => threshold(args),
        Command::Simulate(args) => simulate(args),
        Command::Locate(args) => locate(args),
    }
}

fn writer(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p)
                .map_err(NspError::Io)
                .with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json<T: serde::Serialize>(path: Option<&Path>, value: &T) -> anyhow::Result<()> {
    let mut w = writer(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn detect_settings(args: &DetectArgs) -> anyhow::Result<DetectSettings> {
    let kind = match (args.scenario, &args.design) {
        (_, Some(_)) | (ScenarioArg::Custom, _) => ScenarioKind::CustomRegression,
        (ScenarioArg::Const, None) => ScenarioKind::PiecewiseConstant,
        (ScenarioArg::Linear, None) => ScenarioKind::PiecewisePolynomial { degree: 1 },
        (ScenarioArg::Poly, None) => ScenarioKind::PiecewisePolynomial {
            degree: args.degree,
        },
    };
    if matches!(kind, ScenarioKind::CustomRegression) && args.design.is_none() {
        bail!(NspError::InvalidArgument(
            "--scenario custom needs --design".into()
        ));
    }
    let threshold = match args.threshold {
        ThresholdArg::Gaussian => ThresholdChoice::Gaussian,
        ThresholdArg::LightTailed => ThresholdChoice::LightTailed {
            d: args.d,
            kappa: args.kappa,
        },
        ThresholdArg::MonteCarlo => ThresholdChoice::MonteCarlo {
            n_rep: args.mc_reps,
            seed: args.seed,
            family: args.mc_family.into(),
        },
    };
    let selfnorm = args.selfnorm.then_some(SelfNormSettings {
        epsilon: args.epsilon,
        n_rep: args.sn_reps,
        grid_size: args.sn_grid,
        seed: args.seed,
        min_length: args.sn_min_length,
    });
    Ok(DetectSettings {
        scenario: ScenarioSpec::with_autoregression(kind, args.ar_order),
        alpha: args.alpha,
        m: args.m,
        sampling: match args.sampling {
            SamplingArg::Grid => Sampling::Grid,
            SamplingArg::Random => Sampling::Random,
        },
        overlap: match args.overlap {
            OverlapArg::None => Overlap::None,
            OverlapArg::Half => Overlap::Half,
            OverlapArg::InInference => Overlap::InInference,
        },
        sigma: args.sigma,
        threshold,
        selfnorm,
        seed: args.seed,
        two_stage: !args.one_stage,
        gap_pvalues: true,
    })
}

fn detect(args: DetectArgs, threads: usize) -> anyhow::Result<()> {
    let started = Instant::now();
    let settings = detect_settings(&args)?;
    let y = input::read_series(&args.input)
        .with_context(|| format!("reading {}", args.input.display()))?;
    let design = match &args.design {
        Some(p) => Some(
            input::read_design(p, y.len()).with_context(|| format!("reading {}", p.display()))?,
        ),
        None => None,
    };
    let mut cache = match &args.threshold_cache {
        Some(p) => Some(ThresholdCache::open(p)?),
        None => None,
    };
    let detector = Detector::with_cache(settings.clone(), y.len(), cache.as_mut())?;
    let out = detector.detect(&y, design.as_ref())?;
    info!(
        "{} intervals of significance, threshold {}",
        out.significance.len(),
        out.threshold.lambda
    );

    let located: Vec<Option<usize>> = out
        .significance
        .detections
        .iter()
        .map(|d| match (d.location, args.locate) {
            (Some(l), _) => Ok(Some(l)),
            (None, true) => cusum_locate(&y, d.interval).map(Some),
            (None, false) => Ok(None),
        })
        .collect::<Result<_, _>>()?;

    let manifest = RunManifest {
        input: args.input.clone(),
        design: args.design.clone(),
        settings,
        config: out.config.clone(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: args.seed,
        threads,
        started_unix: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    };
    let report = DetectReport::new(out, &located, manifest);
    if let Some(p) = &args.plot_csv {
        report.write_plot_csv(writer(Some(p))?)?;
    }
    write_json(args.output.as_deref(), &report)
}

fn threshold(args: ThresholdArgs) -> anyhow::Result<()> {
    let length = || {
        args.length
            .ok_or_else(|| NspError::InvalidArgument("--length is required for this method".into()))
    };
    let spec = match args.method {
        MethodArg::Gaussian => gaussian_threshold(length()?, args.alpha, args.sigma)?,
        MethodArg::LightTailed => {
            light_tailed_threshold(length()?, args.alpha, args.d, args.kappa)?
                .with_sigma(args.sigma, None)?
        }
        MethodArg::MonteCarlo => monte_carlo_threshold(
            length()?,
            args.alpha,
            gaussian_sampler,
            args.family.into(),
            args.reps,
            args.seed,
        )?
        .with_sigma(args.sigma, None)?,
        MethodArg::Selfnorm => {
            let mut cache = match &args.cache {
                Some(p) => Some(ThresholdCache::open(p)?),
                None => None,
            };
            self_normalised_quantile_cached(
                args.alpha,
                args.epsilon,
                args.reps,
                args.grid,
                args.seed,
                cache.as_mut(),
            )?
        }
    };
    write_json(None, &spec)
}

fn simulate(args: SimulateArgs) -> anyhow::Result<()> {
    let mut spec = match (&args.spec, &args.preset) {
        (Some(p), _) => ExperimentSpec::load(p)?,
        (None, Some(name)) => presets::by_name(name).ok_or_else(|| {
            NspError::InvalidArgument(format!(
                "unknown preset '{name}'; known: {}",
                presets::NAMES.join(", ")
            ))
        })?,
        (None, None) => bail!(NspError::InvalidArgument(
            "one of --spec or --preset is required".into()
        )),
    };
    if let Some(n) = args.reps {
        spec.n_rep = n;
    }
    if let Some(s) = args.seed {
        spec.seed = s;
    }
    if args.print_spec {
        return write_json(args.output.as_deref(), &spec);
    }
    let result = run_coverage(&spec)?;
    info!(
        "coverage {}% over {} replicates",
        result.coverage_pct, result.n_rep
    );
    if let Some(p) = &args.replicates_csv {
        result.write_replicates_csv(writer(Some(p))?)?;
    }
    let mut w = writer(args.output.as_deref())?;
    result.write_summary_json(&mut w)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn locate(args: LocateArgs) -> anyhow::Result<()> {
    let y = input::read_series(&args.input)
        .with_context(|| format!("reading {}", args.input.display()))?;
    let text = std::fs::read_to_string(&args.results)
        .map_err(NspError::Io)
        .with_context(|| format!("reading {}", args.results.display()))?;
    let results: DetectReport = serde_json::from_str(&text)
        .map_err(|e| NspError::Parse(format!("{}: {e}", args.results.display())))?;
    let report = LocateReport::new(&results, &y)?;
    write_json(args.output.as_deref(), &report)
}
