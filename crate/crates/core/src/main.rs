use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use epd_wavelet::error::{Error, Result};
use epd_wavelet::experiments::{
    fit_groups, read_records, run_convergence, write_records, ExperimentConfig, RateFit, RateModel,
};
use epd_wavelet::geometry::{DomainGeometry, Order, QuadraturePartition};
use epd_wavelet::homology::{persistence_cohomology, rips_persistence, HomologyDegree, PointCloud};
use epd_wavelet::measures::{read_diagram, read_diagram_dir, write_diagram, PersistenceMeasure};
use epd_wavelet::samplers::{sample_cloud, SamplerSpec, Shape};
use epd_wavelet::transport::{multiscale_upper_bound, ot_distance};
use epd_wavelet::wavelet::{EstimatorLevels, ThresholdRule, WaveletEstimator};

/// Haar wavelet estimation of expected persistence diagrams.
#[derive(Parser)]
#[command(name = "epd", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a noisy point cloud and write it as CSV.
    Sample(SampleArgs),
    /// Vietoris-Rips persistence of a point cloud.
    Ph(PhArgs),
    /// Fit a (thresholded) Haar estimator to a directory of diagrams.
    Estimate(EstimateArgs),
    /// Block-averaged density of a saved estimator on a dyadic grid.
    DensityGrid(DensityGridArgs),
    /// Exact partial optimal transport distance between two diagrams.
    Ot(OtArgs),
    /// Multiscale upper bound on OT_p^p between two diagrams.
    Bound(BoundArgs),
    /// Full convergence experiment: records CSV, fit JSON and reference summary.
    Converge(ConvergeArgs),
    /// Fit a rate model to a records CSV.
    Fit(FitArgs),
}

#[derive(Args)]
struct SampleArgs {
    /// torus, double-torus or circle.
    #[arg(long, default_value = "torus")]
    shape: String,
    /// Number of points.
    #[arg(long, default_value_t = 200)]
    n: usize,
    /// Variance of the additive Gaussian noise.
    #[arg(long, default_value_t = 0.5)]
    noise_var: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// ChaCha stream, for independent clouds under one seed.
    #[arg(long, default_value_t = 0)]
    stream: u64,
    /// Output CSV, one point per row.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PhArgs {
    /// Point cloud CSV.
    #[arg(long = "in")]
    input: PathBuf,
    /// Homology degree, 0 or 1.
    #[arg(long, default_value = "1")]
    degree: HomologyDegree,
    /// Filtration cutoff; defaults to the enclosing radius.
    #[arg(long)]
    t_max: Option<f64>,
    /// Output diagram (CSV or JSON by extension).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EstimateArgs {
    /// Directory of diagram files (CSV or JSON).
    #[arg(long = "in")]
    input: PathBuf,
    /// Number of strips, or "auto" for ceil(log2 N).
    #[arg(long = "K", default_value = "auto")]
    strips: String,
    /// Detail depth, or "auto" for ceil(log2 N).
    #[arg(long = "J", default_value = "auto")]
    depth: String,
    /// Support radius; defaults to the smallest power of two around the data.
    #[arg(long)]
    radius: Option<f64>,
    /// Hard-threshold constant; 0 keeps every coefficient.
    #[arg(long, default_value_t = 0.0)]
    tau: f64,
    /// Transport exponent used by the threshold rule.
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    /// Output estimator JSON.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DensityGridArgs {
    /// Estimator JSON written by `estimate`.
    #[arg(long)]
    estimator: PathBuf,
    /// Dyadic level of the grid (at most 12).
    #[arg(long, default_value_t = 6)]
    level: usize,
    /// Output CSV with columns u, v, value.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct OtArgs {
    a: PathBuf,
    b: PathBuf,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    /// Ground norm: a number >= 1 or "inf".
    #[arg(long, default_value = "2")]
    q: Order,
    /// Write the optimal plan as CSV; index -1 is the diagonal.
    #[arg(long)]
    plan: Option<PathBuf>,
}

#[derive(Args)]
struct BoundArgs {
    a: PathBuf,
    b: PathBuf,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    /// Number of refinement levels inside each strip.
    #[arg(long = "J", default_value_t = 6)]
    depth: usize,
    /// Support radius; defaults to the smallest power of two around both diagrams.
    #[arg(long)]
    radius: Option<f64>,
}

#[derive(Args)]
struct ConvergeArgs {
    /// JSON config; flags given here override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// torus, double-torus or circle.
    #[arg(long)]
    shape: Option<String>,
    /// Points per cloud.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    noise_var: Option<f64>,
    /// Reference pool size.
    #[arg(long = "M")]
    m: Option<usize>,
    /// Comma-separated sample sizes.
    #[arg(long = "Ns", value_delimiter = ',')]
    ns: Option<Vec<usize>>,
    /// Comma-separated transport exponents.
    #[arg(long, value_delimiter = ',')]
    p: Option<Vec<f64>>,
    /// Comma-separated threshold constants.
    #[arg(long, value_delimiter = ',')]
    tau: Option<Vec<f64>>,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of strips, or "auto".
    #[arg(long = "K")]
    strips: Option<String>,
    /// Detail depth, or "auto".
    #[arg(long = "J")]
    depth: Option<String>,
    #[arg(long)]
    degree: Option<HomologyDegree>,
    #[arg(long)]
    radius: Option<f64>,
    /// Ground norm of the transport cost.
    #[arg(long)]
    q: Option<f64>,
    /// Strip-relative level of the quadrature cells.
    #[arg(long)]
    resolution: Option<usize>,
    /// Strips at or beyond this index are pooled into diagonal squares.
    #[arg(long)]
    quadrature_depth: Option<usize>,
    /// Worker threads, 0 for all cores.
    #[arg(long)]
    threads: Option<usize>,
    /// Fill the seconds column with wall-clock times (breaks byte reproducibility).
    #[arg(long)]
    timing: bool,
    /// Rate model for the fit JSON; both are fitted when omitted.
    #[arg(long)]
    model: Option<RateModel>,
    /// Output directory for records.csv, fit.json and reference.json.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    /// Records CSV written by `converge`.
    #[arg(long)]
    records: PathBuf,
    #[arg(long, default_value = "power")]
    model: RateModel,
    /// Output JSON; printed to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_shape(name: &str) -> Result<Shape> {
    match name {
        "torus" => Ok(Shape::torus()),
        "double-torus" | "double_torus" => Ok(Shape::double_torus()),
        "circle" => Ok(Shape::circle()),
        other => Err(Error::InvalidInput(format!(
            "unknown shape {other:?} (expected torus, double-torus or circle)"
        ))),
    }
}

fn parse_level(value: &str, auto: usize, what: &str) -> Result<usize> {
    if value == "auto" {
        return Ok(auto);
    }
    value.parse().map_err(|_| {
        Error::InvalidInput(format!(
            "{what} must be a positive integer or \"auto\", got {value:?}"
        ))
    })
}

fn load_diagram(path: &Path) -> Result<PersistenceMeasure> {
    let file = read_diagram(path)?;
    if file.dropped_infinite > 0 {
        eprintln!(
            "warning: {}: dropped {} infinite bars",
            path.display(),
            file.dropped_infinite
        );
    }
    Ok(file.measure)
}

fn geometry_for<'a>(
    radius: Option<f64>,
    diagrams: impl IntoIterator<Item = &'a PersistenceMeasure>,
) -> Result<DomainGeometry> {
    match radius {
        Some(r) => DomainGeometry::new(r),
        None => DomainGeometry::fitting(
            diagrams
                .into_iter()
                .flat_map(|d| d.atoms().iter().map(|a| (a.birth, a.death))),
        ),
    }
}

fn write_json<T: serde::Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n")
        .map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

fn sample(args: SampleArgs) -> Result<()> {
    if !(args.noise_var >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "noise variance must be nonnegative, got {}",
            args.noise_var
        )));
    }
    let spec = SamplerSpec::new(
        parse_shape(&args.shape)?,
        args.n,
        args.noise_var.sqrt(),
        args.seed,
    )
    .with_stream(args.stream);
    sample_cloud(&spec)?.write_csv(&args.out)
}

fn ph(args: PhArgs) -> Result<()> {
    let cloud = PointCloud::read_csv(&args.input)?;
    let diagrams = match args.t_max {
        Some(t) => persistence_cohomology(&cloud, t)?,
        None => rips_persistence(&cloud)?,
    };
    let infinite = match args.degree {
        HomologyDegree::H0 => diagrams.h0_infinite,
        HomologyDegree::H1 => diagrams.h1_infinite,
    };
    if infinite > 0 {
        eprintln!("warning: {infinite} classes never die and are left out");
    }
    let measure = diagrams.degree(args.degree);
    write_diagram(measure, &args.out)?;
    println!("bars={}", measure.len());
    Ok(())
}

fn estimate(args: EstimateArgs) -> Result<()> {
    let files = read_diagram_dir(&args.input)?;
    if files.is_empty() {
        return Err(Error::InvalidInput(format!(
            "no diagrams in {}",
            args.input.display()
        )));
    }
    let diagrams: Vec<PersistenceMeasure> = files.into_iter().map(|(_, f)| f.measure).collect();
    let samples = diagrams.len();
    let auto = EstimatorLevels::auto(samples);
    let levels = EstimatorLevels::new(
        parse_level(&args.strips, auto.strips, "K")?,
        parse_level(&args.depth, auto.depth, "J")?,
    )?;
    let geom = geometry_for(args.radius, &diagrams)?;
    let mut estimator = WaveletEstimator::estimate(&diagrams, geom, levels)?;
    if estimator.outside_mass() > 0.0 {
        eprintln!(
            "warning: mass {} lies outside Omega_R and was ignored",
            estimator.outside_mass()
        );
    }
    if args.tau > 0.0 {
        estimator = estimator.apply_threshold(&ThresholdRule::new(args.tau, args.p, samples)?);
    }
    estimator.save_json(&args.out)?;
    println!(
        "N={samples} K={} J={} R={} nnz_coeffs={}",
        levels.strips,
        levels.depth,
        geom.radius(),
        estimator.nonzero_details()
    );
    Ok(())
}

fn density_grid(args: DensityGridArgs) -> Result<()> {
    WaveletEstimator::load_json(&args.estimator)?.write_density_grid(args.level, &args.out)
}

fn ot(args: OtArgs) -> Result<()> {
    let (a, b) = (load_diagram(&args.a)?, load_diagram(&args.b)?);
    let (value, plan) = ot_distance(&a, &b, args.p, args.q)?;
    if let Some(path) = &args.plan {
        plan.write_csv(path)?;
    }
    println!("{value}");
    Ok(())
}

fn bound(args: BoundArgs) -> Result<()> {
    let (a, b) = (load_diagram(&args.a)?, load_diagram(&args.b)?);
    let geom = geometry_for(args.radius, [&a, &b])?;
    println!(
        "{}",
        multiscale_upper_bound(&a, &b, &geom, args.depth, args.p)?
    );
    Ok(())
}

fn level_override(value: &Option<String>, what: &str) -> Result<Option<Option<usize>>> {
    match value.as_deref() {
        None => Ok(None),
        Some("auto") => Ok(Some(None)),
        Some(v) => v.parse().map(|n| Some(Some(n))).map_err(|_| {
            Error::InvalidInput(format!(
                "{what} must be a positive integer or \"auto\", got {v:?}"
            ))
        }),
    }
}

fn converge(args: ConvergeArgs) -> Result<()> {
    let mut config = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = &args.shape {
        config.shape = parse_shape(s)?;
    }
    macro_rules! set {
        ($($flag:ident => $field:ident),*) => {
            $(if let Some(v) = args.$flag.clone() { config.$field = v; })*
        };
    }
    set!(n => n, noise_var => noise_var, m => m, ns => ns, p => ps, tau => taus,
         replicates => replicates, seed => seed, degree => degree, q => q, threads => threads);
    if let Some(r) = args.radius {
        config.radius = Some(r);
    }
    if let Some(k) = level_override(&args.strips, "K")? {
        config.strips = k;
    }
    if let Some(j) = level_override(&args.depth, "J")? {
        config.depth = j;
    }
    if let Some(r) = args.resolution {
        config.quadrature.resolution = r;
    }
    if let Some(d) = args.quadrature_depth {
        config.quadrature.depth = d;
    }
    config.quadrature =
        QuadraturePartition::new(config.quadrature.resolution, config.quadrature.depth)?;
    config.timing |= args.timing;
    if let Some(dir) = args.out_dir {
        config.output_dir = Some(dir);
    }
    let dir = config
        .output_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir)
        .map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;

    let run = run_convergence(&config)?;
    write_records(&run.records, &dir.join("records.csv"))?;
    write_json(&run.reference, &dir.join("reference.json"))?;
    let models = match args.model {
        Some(m) => vec![m],
        None => vec![RateModel::Power, RateModel::PowerLog],
    };
    let mut fits: Vec<RateFit> = Vec::new();
    for model in models {
        fits.extend(fit_groups(&run.records, model)?);
    }
    write_json(&fits, &dir.join("fit.json"))?;
    for f in &fits {
        println!(
            "p={} tau={} model={} a={} b={} residual={}",
            f.p, f.tau, f.model, f.a, f.b, f.residual
        );
    }
    Ok(())
}

fn fit(args: FitArgs) -> Result<()> {
    let fits = fit_groups(&read_records(&args.records)?, args.model)?;
    match &args.out {
        Some(path) => write_json(&fits, path),
        None => {
            println!("{}", serde_json::to_string_pretty(&fits)?);
            Ok(())
        }
    }
}

fn fail(kind: &str, message: &str) -> ExitCode {
    let line = serde_json::json!({ "error": kind, "message": message });
    eprintln!("{line}");
    ExitCode::from(if kind == "validation" { 1 } else { 2 })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let message = e.to_string();
            let first = message.lines().next().unwrap_or_default();
            return fail("validation", first.trim_start_matches("error: "));
        }
    };
    let result = match cli.command {
        Command::Sample(a) => sample(a),
        Command::Ph(a) => ph(a),
        Command::Estimate(a) => estimate(a),
        Command::DensityGrid(a) => density_grid(a),
        Command::Ot(a) => ot(a),
        Command::Bound(a) => bound(a),
        Command::Converge(a) => converge(a),
        Command::Fit(a) => fit(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(
            if e.is_validation() {
                "validation"
            } else {
                "runtime"
            },
            &e.to_string(),
        ),
    }
}
