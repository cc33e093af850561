use std::collections::HashSet;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};

use cassi_gsm::export::{self, BandScaling};
use cassi_gsm::metrics::MetricReport;
use cassi_gsm::noise::{self, NoiseModel};
use cassi_gsm::scene::{self, SceneSpec};
use cassi_gsm::solver::{self, TvConfig};
use cassi_gsm::tune::{self, Method, Param, ParamGrid, TrainingPair, TunerSpec};
use cassi_gsm::{io, Dims, Error, ErrorKind, ForwardOperator, InitMode, Mask2D, Measurement};
use cassi_gsm::{ScalePrior, SolverConfig, StepRule};

const THREADS_ENV: &str = "CASSI_THREADS";

/// Flags that are never echoed or accepted from a config file.
const META_FLAGS: [&str; 2] = ["config", "echo-config"];

#[derive(Parser, Debug)]
#[command(
    name = "cassi",
    version,
    about = "Snapshot spectral imaging reconstruction toolkit"
)]
#[command(args_override_self = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Meta {
    /// Plain-text key=value file; command-line flags take precedence.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Also write the resolved configuration to this file.
    #[arg(long, value_name = "PATH")]
    echo_config: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Render a synthetic scene to an HSC1 cube.
    Gen(GenArgs),
    /// Write a random coded aperture as MSK1.
    GenMask(GenMaskArgs),
    /// Apply the forward model (plus optional noise) and write MEA1.
    Simulate(SimulateArgs),
    /// Reconstruct a cube from a measurement.
    Reconstruct(ReconstructArgs),
    /// Compare two cubes and print per-band PSNR/SSIM as CSV.
    Evaluate(EvaluateArgs),
    /// Coordinate search over solver hyperparameters.
    Tune(TuneArgs),
    /// Write one band as an 8-bit grayscale PNG.
    ExportBand(ExportBandArgs),
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 48)]
    height: usize,
    #[arg(long, default_value_t = 48)]
    width: usize,
    #[arg(long, default_value_t = 8)]
    bands: usize,
    #[arg(long, default_value_t = 12)]
    blobs: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Highest spectral frequency in cycles across the band range.
    #[arg(long, default_value_t = 1.0)]
    smoothness: f64,
    #[command(flatten)]
    meta: Meta,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum MaskKind {
    Binary,
    Uniform,
}

#[derive(Args, Debug)]
struct GenMaskArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 48)]
    height: usize,
    #[arg(long, default_value_t = 48)]
    width: usize,
    #[arg(long, value_enum, default_value_t = MaskKind::Binary)]
    kind: MaskKind,
    /// Open fraction for binary masks.
    #[arg(long, default_value_t = 0.5)]
    fill: f64,
    #[arg(long, default_value_t = 11)]
    seed: u64,
    #[command(flatten)]
    meta: Meta,
}

#[derive(Copy, Clone, Debug, ValueEnum, PartialEq)]
enum NoiseChoice {
    None,
    Gaussian,
    Shot,
}

#[derive(Args, Debug, Clone)]
struct NoiseArgs {
    #[arg(long, value_enum, default_value_t = NoiseChoice::None)]
    noise: NoiseChoice,
    #[arg(long, default_value_t = 0.01)]
    noise_sigma: f64,
    #[arg(long, default_value_t = 11)]
    noise_bits: u32,
    #[arg(long, default_value_t = 0)]
    noise_seed: u64,
}

impl NoiseArgs {
    fn model(&self) -> Option<NoiseModel> {
        match self.noise {
            NoiseChoice::None => None,
            NoiseChoice::Gaussian => Some(NoiseModel::gaussian(self.noise_sigma, self.noise_seed)),
            NoiseChoice::Shot => Some(NoiseModel::shot(self.noise_bits, self.noise_seed)),
        }
    }

    fn apply(&self, meas: Measurement) -> cassi_gsm::Result<Measurement> {
        match self.model() {
            Some(m) => noise::add_noise(&meas, &m),
            None => Ok(meas),
        }
    }
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long)]
    cube: PathBuf,
    #[arg(long)]
    mask: PathBuf,
    /// Dispersion step in pixels per band.
    #[arg(long, default_value_t = 2)]
    step: usize,
    #[command(flatten)]
    noise: NoiseArgs,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    meta: Meta,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum MethodChoice {
    Gsm,
    Tv,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum PriorChoice {
    Jeffreys,
    Localvar,
    Constant,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum StepChoice {
    Backtracking,
    Fixed,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum InitChoice {
    Adjoint,
    Zero,
}

#[derive(Args, Debug, Clone)]
struct SolverArgs {
    #[arg(long, value_enum, default_value_t = MethodChoice::Gsm)]
    method: MethodChoice,
    #[arg(long, default_value_t = 4)]
    stages: usize,
    /// Gradient steps per stage.
    #[arg(long, default_value_t = 10)]
    inner: usize,
    #[arg(long, value_enum, default_value_t = StepChoice::Backtracking)]
    step_rule: StepChoice,
    /// Initial (or fixed) gradient step size.
    #[arg(long, default_value_t = 0.5)]
    delta0: f64,
    #[arg(long, default_value_t = 0.5)]
    shrink: f64,
    #[arg(long, default_value_t = cassi_gsm::prior::DEFAULT_SIGMA)]
    sigma: f64,
    #[arg(long, value_enum, default_value_t = PriorChoice::Jeffreys)]
    prior: PriorChoice,
    #[arg(long, default_value_t = cassi_gsm::prior::DEFAULT_EPS)]
    eps: f64,
    /// Window side for the local-variance prior.
    #[arg(long, default_value_t = 3)]
    window: usize,
    /// Weight for the constant prior.
    #[arg(long, default_value_t = 1.0)]
    w0: f64,
    /// Filter length per axis (odd).
    #[arg(long, default_value_t = cassi_gsm::filters::DEFAULT_Q)]
    q: usize,
    #[arg(long, default_value_t = cassi_gsm::filters::DEFAULT_BANDWIDTH)]
    bandwidth: f64,
    #[arg(long, value_enum, default_value_t = InitChoice::Adjoint)]
    init: InitChoice,
    #[arg(long, default_value_t = 0.01)]
    lambda_tv: f64,
    #[arg(long, default_value_t = 100)]
    tv_iterations: usize,
    #[arg(long, default_value_t = 20)]
    tv_sweeps: usize,
}

impl SolverArgs {
    fn step_rule(&self) -> StepRule {
        match self.step_rule {
            StepChoice::Fixed => StepRule::Fixed(self.delta0),
            StepChoice::Backtracking => StepRule::Backtracking {
                initial: self.delta0,
                shrink: self.shrink,
            },
        }
    }

    fn init(&self) -> InitMode {
        match self.init {
            InitChoice::Adjoint => InitMode::Adjoint,
            InitChoice::Zero => InitMode::Zero,
        }
    }

    fn method(&self) -> Method {
        match self.method {
            MethodChoice::Gsm => Method::Gsm(SolverConfig {
                stages: self.stages,
                inner_steps: self.inner,
                step: self.step_rule(),
                sigma: self.sigma,
                prior: match self.prior {
                    PriorChoice::Jeffreys => ScalePrior::Jeffreys { eps: self.eps },
                    PriorChoice::Localvar => ScalePrior::LocalVariance {
                        window: self.window,
                        eps: self.eps,
                    },
                    PriorChoice::Constant => ScalePrior::Constant { w0: self.w0 },
                },
                q: self.q,
                bandwidth: self.bandwidth,
                init: self.init(),
            }),
            MethodChoice::Tv => Method::Tv(TvConfig {
                lambda: self.lambda_tv,
                iterations: self.tv_iterations,
                sweeps: self.tv_sweeps,
                step: self.step_rule(),
                init: self.init(),
            }),
        }
    }
}

#[derive(Args, Debug)]
struct ReconstructArgs {
    #[arg(long)]
    measurement: PathBuf,
    #[arg(long)]
    mask: PathBuf,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    out: PathBuf,
    /// Per-iteration objective trace as CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[command(flatten)]
    meta: Meta,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[arg(long)]
    reference: PathBuf,
    #[arg(long)]
    estimate: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    peak: f64,
    /// Also write the CSV report here.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    meta: Meta,
}

#[derive(Args, Debug)]
struct TuneArgs {
    /// Ground-truth training cube (repeatable).
    #[arg(long, required = true)]
    truth: Vec<PathBuf>,
    #[arg(long)]
    mask: PathBuf,
    #[arg(long, default_value_t = 2)]
    step: usize,
    #[command(flatten)]
    noise: NoiseArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// `param=v1,v2,...` (repeatable). Params: sigma, eps, bandwidth, delta0, lambda_tv.
    #[arg(long, value_parser = parse_grid)]
    grid: Vec<ParamGrid>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 3)]
    max_cycles: usize,
    /// Search log CSV.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    meta: Meta,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum ScalingChoice {
    Minmax,
    Fixed,
}

#[derive(Args, Debug)]
struct ExportBandArgs {
    #[arg(long)]
    cube: PathBuf,
    #[arg(long)]
    band: usize,
    #[arg(long, value_enum, default_value_t = ScalingChoice::Minmax)]
    scaling: ScalingChoice,
    /// Full-scale value for fixed scaling.
    #[arg(long, default_value_t = 1.0)]
    peak: f32,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    meta: Meta,
}

fn parse_grid(s: &str) -> Result<ParamGrid, String> {
    let (name, values) = s
        .split_once('=')
        .ok_or_else(|| format!("expected param=v1,v2,..., got {s:?}"))?;
    let param = Param::ALL
        .into_iter()
        .find(|p| p.name() == name.trim())
        .ok_or_else(|| format!("unknown tuning parameter {name:?}"))?;
    let values = values
        .split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|e| format!("{v:?}: {e}")))
        .collect::<Result<Vec<_>, _>>()?;
    ParamGrid::new(param, values).map_err(|e| e.to_string())
}

fn default_grids(method: &Method) -> cassi_gsm::Result<Vec<ParamGrid>> {
    Ok(match method {
        Method::Gsm(_) => vec![
            ParamGrid::new(Param::Sigma, vec![0.025, 0.05, 0.1, 0.2, 0.4])?,
            ParamGrid::new(Param::Eps, vec![1e-4, 1e-3, 1e-2, 1e-1])?,
            ParamGrid::new(Param::Bandwidth, vec![0.1, 0.2, 0.3, 0.5, 1.0])?,
        ],
        Method::Tv(_) => vec![ParamGrid::log(Param::LambdaTv, 1e-4, 1e-1, 7)?],
    })
}

enum Failure {
    Lib(Error),
    Usage(String),
    /// Already printed by clap.
    Reported,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) | Failure::Reported => 2,
            Failure::Lib(e) => match e.kind() {
                ErrorKind::Usage | ErrorKind::InputOutput => 2,
                ErrorKind::Shape => 3,
                ErrorKind::Divergence => 4,
            },
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(m) => f.write_str(m),
            Failure::Reported => Ok(()),
            Failure::Lib(e) => write!(f, "{e}"),
        }
    }
}

fn read_config(path: &Path) -> Result<Vec<(String, String)>, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let mut pairs = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            Failure::Usage(format!("{}:{}: expected key=value", path.display(), n + 1))
        })?;
        pairs.push((k.trim().replace('_', "-"), v.trim().to_string()));
    }
    Ok(pairs)
}

fn long_flag(arg: &OsString) -> Option<String> {
    let s = arg.to_str()?;
    let name = s.strip_prefix("--")?;
    Some(name.split_once('=').map_or(name, |(k, _)| k).to_string())
}

/// Splice `--config` file entries in front of the command-line flags, so the
/// latter win. Keys given on the command line drop the file's values entirely,
/// which matters for repeatable flags.
fn expand_config(args: Vec<OsString>) -> Result<Vec<OsString>, Failure> {
    let Some(sub_name) = args.get(1).and_then(|a| a.to_str()).map(str::to_owned) else {
        return Ok(args);
    };
    let root = Cli::command();
    let Some(sub) = root.find_subcommand(&sub_name) else {
        return Ok(args);
    };

    let mut rest = Vec::new();
    let mut config = None;
    let mut it = args[2..].iter().cloned();
    while let Some(a) = it.next() {
        match a.to_str() {
            Some("--config") => {
                config =
                    Some(PathBuf::from(it.next().ok_or_else(|| {
                        Failure::Usage("--config requires a path".into())
                    })?))
            }
            Some(s) if s.starts_with("--config=") => {
                config = Some(PathBuf::from(&s["--config=".len()..]))
            }
            _ => rest.push(a),
        }
    }
    let Some(path) = config else {
        return Ok(args);
    };

    let known: HashSet<String> = sub
        .get_arguments()
        .filter_map(|a| a.get_long().map(str::to_owned))
        .filter(|l| !META_FLAGS.contains(&l.as_str()) && l != "help")
        .collect();
    let on_cli: HashSet<String> = rest.iter().filter_map(long_flag).collect();

    let mut out = vec![args[0].clone(), args[1].clone()];
    for (k, v) in read_config(&path)? {
        if !known.contains(&k) {
            return Err(Failure::Usage(format!(
                "{}: unknown key {k:?} for `{sub_name}`",
                path.display()
            )));
        }
        if !on_cli.contains(&k) {
            out.push(format!("--{k}").into());
            out.push(v.into());
        }
    }
    out.extend(rest);
    Ok(out)
}

/// Every resolved argument, defaults included, as replayable key=value lines.
fn resolved_config(sub: &clap::Command, m: &clap::ArgMatches) -> String {
    let mut s = String::new();
    for arg in sub.get_arguments() {
        let Some(long) = arg.get_long() else { continue };
        if META_FLAGS.contains(&long) || long == "help" {
            continue;
        }
        if let Some(values) = m.get_raw(arg.get_id().as_str()) {
            for v in values {
                let _ = writeln!(s, "{long}={}", v.to_string_lossy());
            }
        }
    }
    s
}

fn emit_config(text: &str, meta: &Meta) -> Result<(), Failure> {
    eprint!("{text}");
    if let Some(p) = &meta.echo_config {
        fs::write(p, text).map_err(Error::from)?;
    }
    Ok(())
}

fn operator_for(mask: &Path, bands: usize, step: usize) -> cassi_gsm::Result<ForwardOperator> {
    ForwardOperator::new(io::load_mask(mask)?, bands, step)
}

fn write_text(path: &Path, text: &str) -> cassi_gsm::Result<()> {
    fs::write(path, text).map_err(Error::from)
}

fn cmd_gen(a: &GenArgs) -> Result<(), Failure> {
    let mut spec = SceneSpec::new(Dims::new(a.height, a.width, a.bands)?, a.blobs, a.seed);
    spec.spectral_smoothness = a.smoothness;
    io::save_cube(&scene::generate_scene(&spec)?, &a.out)?;
    Ok(())
}

fn cmd_gen_mask(a: &GenMaskArgs) -> Result<(), Failure> {
    let mask = match a.kind {
        MaskKind::Binary => Mask2D::random_binary(a.height, a.width, a.fill, a.seed)?,
        MaskKind::Uniform => Mask2D::random_uniform(a.height, a.width, a.seed)?,
    };
    io::save_mask(&mask, &a.out)?;
    Ok(())
}

fn cmd_simulate(a: &SimulateArgs) -> Result<(), Failure> {
    let cube = io::load_cube(&a.cube)?;
    let op = operator_for(&a.mask, cube.dims().bands, a.step)?;
    let meas = a.noise.apply(op.forward(&cube)?)?;
    io::save_measurement(&meas, &a.out)?;
    Ok(())
}

fn cmd_reconstruct(a: &ReconstructArgs) -> Result<(), Failure> {
    let meas = io::load_measurement(&a.measurement)?;
    let op = operator_for(&a.mask, meas.bands(), meas.step())?;
    let (x, trace) = match a.solver.method() {
        Method::Gsm(cfg) => solver::run(&meas, &op, &cfg)?,
        Method::Tv(cfg) => solver::tv_baseline(&meas, &op, &cfg)?,
    };
    io::save_cube(&x, &a.out)?;
    if let Some(p) = &a.trace {
        write_text(p, &trace.to_csv())?;
    }
    if let Some(last) = trace.records.last() {
        eprintln!("final objective {:e}", last.objective);
    }
    Ok(())
}

fn cmd_evaluate(a: &EvaluateArgs) -> Result<(), Failure> {
    let reference = io::load_cube(&a.reference)?;
    let estimate = io::load_cube(&a.estimate)?;
    let report = MetricReport::evaluate(&reference, &estimate, a.peak)?;
    let csv = report.to_csv();
    print!("{csv}");
    if let Some(p) = &a.out {
        write_text(p, &csv)?;
    }
    eprintln!("{}", report.summary());
    Ok(())
}

fn cmd_tune(a: &TuneArgs) -> Result<(), Failure> {
    let truths = a
        .truth
        .iter()
        .map(io::load_cube)
        .collect::<cassi_gsm::Result<Vec<_>>>()?;
    let op = operator_for(&a.mask, truths[0].dims().bands, a.step)?;
    let pairs = truths
        .into_iter()
        .enumerate()
        .map(|(d, truth)| {
            let mut noise = a.noise.clone();
            noise.noise_seed = noise.noise_seed.wrapping_add(d as u64);
            Ok(TrainingPair {
                measurement: noise.apply(op.forward(&truth)?)?,
                truth,
            })
        })
        .collect::<cassi_gsm::Result<Vec<_>>>()?;
    let method = a.solver.method();
    let grids = if a.grid.is_empty() {
        default_grids(&method)?
    } else {
        a.grid.clone()
    };
    let spec = TunerSpec {
        grids,
        pairs,
        operator: op,
        method,
        seed: a.seed,
        max_cycles: a.max_cycles,
    };
    let outcome = tune::coordinate_search(&spec)?;
    write_text(&a.out, &outcome.log_csv())?;
    for p in Param::ALL {
        println!("{}={}", p.name(), outcome.best.get(p));
    }
    println!("loss={}", outcome.best_loss);
    eprintln!(
        "loss {:.6} -> {:.6} after {} evaluations",
        outcome.initial_loss,
        outcome.best_loss,
        outcome.log.len()
    );
    Ok(())
}

fn cmd_export_band(a: &ExportBandArgs) -> Result<(), Failure> {
    let cube = io::load_cube(&a.cube)?;
    let scaling = match a.scaling {
        ScalingChoice::Minmax => BandScaling::MinMax,
        ScalingChoice::Fixed => BandScaling::Fixed { peak: a.peak },
    };
    export::export_band(&cube, a.band, scaling, &a.out)?;
    Ok(())
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().map_err(|_| {
        Failure::Usage(format!("{THREADS_ENV} must be a thread count, got {raw:?}"))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Usage(format!("cannot configure thread pool: {e}")))
}

fn run() -> Result<(), Failure> {
    configure_threads()?;
    let args = expand_config(std::env::args_os().collect())?;
    let mut root = Cli::command();
    let sub_name = args.get(1).and_then(|a| a.to_str()).map(str::to_owned);
    let matches = match root.try_get_matches_from_mut(args) {
        Ok(m) => m,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let _ = e.print();
            let usage = sub_name
                .and_then(|n| root.find_subcommand_mut(&n).map(|c| c.render_usage()))
                .unwrap_or_else(|| root.render_usage());
            eprintln!("\n{usage}");
            return Err(Failure::Reported);
        }
    };
    let cli = Cli::from_arg_matches(&matches).unwrap_or_else(|e| e.exit());

    let (name, sub_matches) = matches.subcommand().expect("subcommand is required");
    let sub = root
        .find_subcommand(name)
        .expect("parsed subcommand exists");
    let echo = resolved_config(sub, sub_matches);

    let meta = match &cli.command {
        Command::Gen(a) => &a.meta,
        Command::GenMask(a) => &a.meta,
        Command::Simulate(a) => &a.meta,
        Command::Reconstruct(a) => &a.meta,
        Command::Evaluate(a) => &a.meta,
        Command::Tune(a) => &a.meta,
        Command::ExportBand(a) => &a.meta,
    };
    emit_config(&echo, meta)?;

    match &cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::GenMask(a) => cmd_gen_mask(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Reconstruct(a) => cmd_reconstruct(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Tune(a) => cmd_tune(a),
        Command::ExportBand(a) => cmd_export_band(a),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            if !matches!(f, Failure::Reported) {
                eprintln!("cassi: {f}");
            }
            ExitCode::from(f.exit_code())
        }
    }
}
