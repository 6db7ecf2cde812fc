//! Command-line front end. [`run`] parses arguments, dispatches the
//! subcommand and returns the process exit status:
//! 0 success, 1 usage error, 2 data error, 3 numeric failure.

use std::fmt::Display;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{ArgAction, Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};

use crate::cost::{build_cost_matrix, CostSpec, DEFAULT_COST_CAP};
use crate::error::PapmError;
use crate::fit::{fit_map, FitConfig, FitInit, FitLoss, DEFAULT_DECAY};
use crate::io::{read_map, read_points, write_field, write_map, write_points, MapFormat};
use crate::kernel::{generate_hd_papm, KernelSpec, Normalization};
use crate::loss::{AlPapmLoss, DEFAULT_LAMBDA};
use crate::metrics::{game, localize_and_match, mae_mse, EvalRecord};
use crate::noise::{perturb, robustness_sweep, PerturbMode, PerturbSpec, SweepConfig, SweepMetric};
use crate::ot::{exact_ot, normalize_measures, sinkhorn, EpsilonRule, SinkhornConfig};
use crate::types::{GgdParams, PointSet, Shape};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

/// Flags that take no value; `key = true` in a config file turns them on.
const SWITCHES: &[&str] = &["localize"];

#[derive(Debug, Parser)]
#[command(name = "papm", version, about = "Point annotation probability maps for dense counting")]
struct Cli {
    /// File of `key = value` lines applied beneath the flags given here.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a hand-designed target map from point annotations.
    GenPapm(GenPapmArgs),
    /// Write the point-to-pixel transport cost matrix as CSV.
    CostMatrix(CostMatrixArgs),
    /// Evaluate the transport plus similarity loss of a predicted map.
    OtLoss(OtLossArgs),
    /// Score a directory of predicted maps against point annotations.
    Eval(EvalArgs),
    /// Extract peaks from a map and match them to annotations.
    Localize(LocalizeArgs),
    /// Displace annotations by seeded random noise.
    Perturb(PerturbArgs),
    /// Fit maps against perturbed annotations and tabulate the error.
    Sweep(SweepArgs),
    /// Fit a free nonnegative map to annotations.
    Fit(FitArgs),
    /// Compare the entropic solver against the exact transport optimum.
    OracleOt(OracleArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Family {
    GgdL2,
    SquaredEuclidean,
    PowerRatio,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Norm {
    Discrete,
    Analytic,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Binary,
}

impl From<Format> for MapFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Text => MapFormat::Text,
            Format::Binary => MapFormat::Binary,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Mode {
    Exact,
    Disk,
}

impl From<Mode> for PerturbMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Exact => PerturbMode::ExactRadius,
            Mode::Disk => PerturbMode::UniformDisk,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum LossKind {
    AlPapm,
    HdL2,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Init {
    Uniform,
    Random,
}

#[derive(Debug, Args)]
struct CostArgs {
    #[arg(long, value_enum, default_value = "ggd-l2")]
    family: Family,
    /// Bandwidth for ggd-l2, scale for power-ratio.
    #[arg(long, default_value_t = 16.0)]
    sigma: f64,
    /// Shape for ggd-l2, exponent for power-ratio.
    #[arg(long, default_value_t = 2.0)]
    shape: f64,
    #[arg(long, default_value_t = DEFAULT_COST_CAP)]
    cost_cap: f64,
}

impl CostArgs {
    fn spec(&self) -> Result<CostSpec, PapmError> {
        let mut spec = match self.family {
            Family::GgdL2 => CostSpec::ggd_l2(GgdParams::new(self.sigma, self.shape)?),
            Family::SquaredEuclidean => CostSpec::squared_euclidean(),
            Family::PowerRatio => CostSpec::power_ratio(self.sigma, self.shape)?,
        };
        if !(self.cost_cap > 0.0) {
            return Err(PapmError::invalid("cost-cap", "must be > 0"));
        }
        spec.cap = self.cost_cap;
        Ok(spec)
    }
}

#[derive(Debug, Args)]
struct SolverArgs {
    /// Absolute entropic regularization; overrides --eps-rel.
    #[arg(long)]
    eps: Option<f64>,
    /// Regularization as a fraction of the median cost.
    #[arg(long, default_value_t = 0.01)]
    eps_rel: f64,
    #[arg(long, default_value_t = 500)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// Geometric decay of a regularization schedule starting at max(C).
    #[arg(long)]
    eps_decay: Option<f64>,
    /// Newton refinement steps when the fixed-point loop stops short.
    #[arg(long, default_value_t = 30)]
    newton_steps: usize,
}

impl SolverArgs {
    fn config(&self) -> Result<SinkhornConfig, PapmError> {
        let cfg = SinkhornConfig {
            epsilon: match self.eps {
                Some(e) => EpsilonRule::Absolute(e),
                None => EpsilonRule::RelativeMedian(self.eps_rel),
            },
            max_iters: self.max_iters,
            marginal_tol: self.tol,
            epsilon_schedule: self.eps_decay,
            newton_steps: self.newton_steps,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
struct GenPapmArgs {
    #[arg(long)]
    points: PathBuf,
    #[arg(long, default_value_t = 4.0)]
    sigma: f64,
    #[arg(long, default_value_t = 8.0)]
    shape: f64,
    #[arg(long, value_enum, default_value = "discrete")]
    norm: Norm,
    /// Relative truncation level of each kernel.
    #[arg(long, default_value_t = 1e-6)]
    tau: f64,
    #[arg(long, default_value_t = 1)]
    stride: u32,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

#[derive(Debug, Args)]
struct CostMatrixArgs {
    #[arg(long)]
    points: PathBuf,
    /// Grid as HxW; defaults to the image extent.
    #[arg(long)]
    grid: Option<String>,
    #[command(flatten)]
    cost: CostArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct OtLossArgs {
    #[arg(long)]
    points: PathBuf,
    #[arg(long)]
    pred: PathBuf,
    #[command(flatten)]
    cost: CostArgs,
    #[arg(long, default_value_t = DEFAULT_LAMBDA)]
    lambda: f64,
    #[command(flatten)]
    solver: SolverArgs,
    /// Write the gradient with respect to the map here.
    #[arg(long)]
    grad_out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    pred_dir: PathBuf,
    #[arg(long)]
    gt_dir: PathBuf,
    /// Also report GAME at this level (0 to 3).
    #[arg(long)]
    game: Option<u32>,
    #[arg(long, action = ArgAction::SetTrue)]
    localize: bool,
    #[arg(long, default_value_t = 8.0)]
    radius: f64,
    /// Peak threshold as a fraction of the map maximum.
    #[arg(long, default_value_t = 0.5)]
    peak: f64,
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct LocalizeArgs {
    #[arg(long)]
    pred: PathBuf,
    /// Ground truth to match against; without it only peaks are reported.
    #[arg(long)]
    points: Option<PathBuf>,
    #[arg(long, default_value_t = 8.0)]
    radius: f64,
    #[arg(long, default_value_t = 0.5)]
    peak: f64,
    /// Write the detected peaks as a point file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PerturbArgs {
    #[arg(long)]
    points: PathBuf,
    #[arg(long)]
    radius: f64,
    #[arg(long)]
    seed: u64,
    #[arg(long, value_enum, default_value = "exact")]
    mode: Mode,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct FitParams {
    #[arg(long, default_value_t = FitConfig::default().steps)]
    steps: usize,
    #[arg(long, default_value_t = FitConfig::default().step_size)]
    step_size: f64,
    #[arg(long, default_value_t = DEFAULT_LAMBDA)]
    lambda: f64,
    /// Bound on the gradient norm per step; 0 disables it.
    #[arg(long, default_value_t = 1.0)]
    clip: f64,
    /// Step decay horizon in steps; 0 keeps the step size fixed.
    /// Defaults to 5 for al-papm and 0 for hd-l2.
    #[arg(long)]
    decay: Option<f64>,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long)]
    points: PathBuf,
    /// Comma-separated displacement magnitudes in pixels.
    #[arg(long, default_value = "4,8,16,32")]
    radii: String,
    /// Seeds as `a..b` (inclusive) or a comma-separated list.
    #[arg(long)]
    seeds: String,
    #[command(flatten)]
    cost: CostArgs,
    #[arg(long, value_enum, default_value = "exact")]
    mode: Mode,
    /// GAME level used as the error; omit for plain count error.
    #[arg(long, default_value = "2")]
    game: Option<u32>,
    #[arg(long, action = ArgAction::SetTrue, conflicts_with = "game")]
    count_error: bool,
    #[command(flatten)]
    fit: FitParams,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct FitArgs {
    #[arg(long)]
    points: PathBuf,
    /// Grid as HxW; defaults to the image extent.
    #[arg(long)]
    grid: Option<String>,
    #[arg(long, value_enum, default_value = "al-papm")]
    loss: LossKind,
    #[arg(long, value_enum, default_value = "ggd-l2")]
    family: Family,
    /// Defaults to 16 for al-papm and 4 for hd-l2.
    #[arg(long)]
    sigma: Option<f64>,
    /// Defaults to 2 for al-papm and 8 for hd-l2.
    #[arg(long)]
    shape: Option<f64>,
    #[arg(long, value_enum, default_value = "uniform")]
    init: Init,
    /// Required with `--init random`.
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    fit: FitParams,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct OracleArgs {
    #[arg(long)]
    points: PathBuf,
    #[arg(long)]
    pred: PathBuf,
    #[command(flatten)]
    cost: CostArgs,
    #[command(flatten)]
    solver: SolverArgs,
}

/// Why a subcommand stopped; maps onto the exit statuses.
enum Failure {
    Usage(String),
    Data(String),
    Numeric(String),
}

impl From<PapmError> for Failure {
    fn from(e: PapmError) -> Self {
        let msg = e.to_string();
        match e {
            PapmError::InvalidParameter { .. } | PapmError::GridTooSmall { .. } => Failure::Usage(msg),
            PapmError::Diverged { step, trace, .. } => {
                let tail: Vec<String> = trace.iter().rev().take(5).rev().map(|v| v.to_string()).collect();
                Failure::Numeric(format!("{msg}\ndiverged_step={step} trace_tail={}", tail.join(",")))
            }
            _ => Failure::Data(msg),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Data(e.to_string())
    }
}

type Outcome = Result<Vec<(&'static str, String)>, Failure>;

/// Runs the CLI on `argv` (program name first) and returns the exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<String>,
{
    let argv: Vec<String> = argv.into_iter().map(Into::into).collect();
    let argv = match merge_config(argv) {
        Ok(a) => a,
        Err(msg) => {
            eprintln!("error: {msg}");
            return EXIT_USAGE;
        }
    };
    let command = Cli::command()
        .args_override_self(true)
        .mut_subcommands(|s| s.args_override_self(true));
    let cli = match command.try_get_matches_from(&argv).and_then(|m| Cli::from_arg_matches(&m)) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let threads = match std::env::var("PAPM_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(t) => t,
            Err(_) => {
                eprintln!("error: PAPM_THREADS must be a non-negative integer, got `{v}`");
                return EXIT_USAGE;
            }
        },
        Err(_) => 0,
    };

    let outcome = match &cli.command {
        Command::GenPapm(a) => gen_papm(a),
        Command::CostMatrix(a) => cost_matrix(a),
        Command::OtLoss(a) => ot_loss(a),
        Command::Eval(a) => eval(a),
        Command::Localize(a) => localize(a),
        Command::Perturb(a) => perturb_cmd(a),
        Command::Sweep(a) => sweep(a, threads),
        Command::Fit(a) => fit(a),
        Command::OracleOt(a) => oracle_ot(a),
    };
    match outcome {
        Ok(fields) => {
            let line: Vec<String> = fields.iter().map(|(k, v)| format!("{k}={v}")).collect();
            println!("RESULT {}", line.join(" "));
            EXIT_OK
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            println!("RESULT status=usage_error");
            EXIT_USAGE
        }
        Err(Failure::Data(msg)) => {
            eprintln!("error: {msg}");
            println!("RESULT status=data_error");
            EXIT_DATA
        }
        Err(Failure::Numeric(msg)) => {
            eprintln!("error: {msg}");
            println!("RESULT status=numeric_failure");
            EXIT_NUMERIC
        }
    }
}

/// Splices the config file's entries in right after the subcommand name,
/// so that flags given on the command line, which come later, win.
fn merge_config(argv: Vec<String>) -> Result<Vec<String>, String> {
    let mut path = None;
    for (i, a) in argv.iter().enumerate() {
        if a == "--config" {
            path = Some(argv.get(i + 1).ok_or("--config needs a file")?.clone());
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_string());
        }
    }
    let Some(path) = path else {
        return Ok(argv);
    };
    let text = std::fs::read_to_string(&path).map_err(|e| format!("--config {path}: {e}"))?;
    let mut extra = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("--config {path}:{}: expected key = value", lineno + 1))?;
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        if SWITCHES.contains(&key.as_str()) {
            match value {
                "true" => extra.push(format!("--{key}")),
                "false" => {}
                _ => return Err(format!("--config {path}: `{key}` takes true or false")),
            }
        } else {
            extra.push(format!("--{key}={value}"));
        }
    }
    let names: Vec<String> = Cli::command()
        .get_subcommands()
        .map(|s| s.get_name().to_string())
        .collect();
    let at = argv
        .iter()
        .position(|a| names.contains(a))
        .map(|i| i + 1)
        .unwrap_or(argv.len());
    let mut merged = argv[..at].to_vec();
    merged.extend(extra);
    merged.extend_from_slice(&argv[at..]);
    Ok(merged)
}

fn load_points(path: &Path) -> Result<PointSet, Failure> {
    let f = File::open(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
    Ok(read_points(BufReader::new(f))?)
}

fn load_map(path: &Path) -> Result<crate::types::GridMap, Failure> {
    let f = File::open(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
    Ok(read_map(BufReader::new(f))?)
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    let f = File::create(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
    Ok(BufWriter::new(f))
}

fn parse_grid(flag: &str, text: &str) -> Result<Shape, Failure> {
    let bad = || Failure::Usage(format!("--{flag} expects HxW with positive integers, got `{text}`"));
    let (h, w) = text.split_once(['x', 'X']).ok_or_else(bad)?;
    let h: usize = h.trim().parse().map_err(|_| bad())?;
    let w: usize = w.trim().parse().map_err(|_| bad())?;
    if h == 0 || w == 0 {
        return Err(bad());
    }
    Ok(Shape::new(h, w))
}

fn parse_list(flag: &str, text: &str) -> Result<Vec<f64>, Failure> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite() && *v >= 0.0)
                .ok_or_else(|| Failure::Usage(format!("--{flag}: `{t}` is not a non-negative number")))
        })
        .collect()
}

fn parse_seeds(text: &str) -> Result<Vec<u64>, Failure> {
    let bad = || Failure::Usage(format!("--seeds expects `a..b` or a comma list, got `{text}`"));
    if let Some((a, b)) = text.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
        if a > b {
            return Err(bad());
        }
        Ok((a..=b).collect())
    } else {
        text.split(',').map(|t| t.trim().parse().map_err(|_| bad())).collect()
    }
}

fn check_positive(flag: &str, v: f64) -> Result<(), Failure> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Failure::Usage(format!("--{flag} must be a positive number, got {v}")))
    }
}

fn kv(key: &'static str, v: impl Display) -> (&'static str, String) {
    (key, v.to_string())
}

fn gen_papm(a: &GenPapmArgs) -> Outcome {
    let params = GgdParams::new(a.sigma, a.shape)?;
    let normalization = match a.norm {
        Norm::Discrete => Normalization::DiscreteRenormalized,
        Norm::Analytic => Normalization::Analytic,
    };
    let spec = KernelSpec {
        params,
        normalization,
        truncation_tau: a.tau,
        stride: a.stride,
    };
    spec.validate()?;
    let points = load_points(&a.points)?;
    let map = generate_hd_papm(&points, &spec)?;
    write_map(&map, create(&a.out)?, a.format.into())?;
    println!(
        "wrote {}x{} map for {} points to {}",
        map.rows(),
        map.cols(),
        points.count(),
        a.out.display()
    );
    Ok(vec![
        kv("n", points.count()),
        kv("rows", map.rows()),
        kv("cols", map.cols()),
        kv("mass", map.total_mass()),
    ])
}

fn cost_matrix(a: &CostMatrixArgs) -> Outcome {
    let spec = a.cost.spec()?;
    let grid = a.grid.as_deref().map(|g| parse_grid("grid", g)).transpose()?;
    let points = load_points(&a.points)?;
    let grid = grid.unwrap_or_else(|| points.shape());
    let matrix = build_cost_matrix(&points, grid, &spec)?;
    let mut out = create(&a.out)?;
    for i in 0..matrix.rows() {
        let row: Vec<String> = matrix.row(i).iter().map(|v| v.to_string()).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    out.flush()?;
    if matrix.clamped() > 0 {
        println!("{} entries clamped at {}", matrix.clamped(), spec.cap);
    }
    Ok(vec![
        kv("rows", matrix.rows()),
        kv("cols", matrix.cols()),
        kv("max", matrix.max()),
        kv("clamped", matrix.clamped()),
    ])
}

fn ot_loss(a: &OtLossArgs) -> Outcome {
    let cost = a.cost.spec()?;
    let solver = a.solver.config()?;
    let mut loss = AlPapmLoss::new(cost, solver, a.lambda)?;
    let points = load_points(&a.points)?;
    let pred = load_map(&a.pred)?;
    let b = loss.evaluate(&points, &pred, false)?;
    if !b.total.is_finite() {
        return Err(Failure::Numeric(format!("loss is not finite: {b:?}")));
    }
    let d = &b.diagnostics;
    println!("ot_term {}", b.ot_term);
    println!("similarity_term {}", b.similarity_term);
    println!("total {}", b.total);
    if let Some(reason) = d.degenerate {
        println!("note: transport term skipped ({reason}); similarity term only");
    }
    if let Some(path) = &a.grad_out {
        write_field(&b.grad, create(path)?, a.format.into())?;
    }
    let converged = match d.converged {
        Some(c) => c.to_string(),
        None => "skipped".to_string(),
    };
    Ok(vec![
        kv("ot_term", b.ot_term),
        kv("similarity_term", b.similarity_term),
        kv("total", b.total),
        kv("lambda", b.lambda),
        kv("converged", converged),
        kv("iterations", d.iterations),
        kv("marginal_violation", d.marginal_violation),
        kv("epsilon", d.epsilon),
        kv("clamped_costs", d.clamped_costs),
        kv("degenerate", d.degenerate.unwrap_or("none").replace(' ', "_")),
    ])
}

fn eval(a: &EvalArgs) -> Outcome {
    if let Some(level) = a.game {
        if level > 3 {
            return Err(Failure::Usage(format!("--game must be 0..=3, got {level}")));
        }
    }
    check_positive("radius", a.radius)?;
    if !(a.peak > 0.0 && a.peak <= 1.0) {
        return Err(Failure::Usage(format!("--peak must lie in (0, 1], got {}", a.peak)));
    }
    let mut maps: Vec<PathBuf> = std::fs::read_dir(&a.pred_dir)
        .map_err(|e| Failure::Data(format!("{}: {e}", a.pred_dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    maps.sort();

    let mut records = Vec::new();
    let mut rows = Vec::new();
    let (mut game_sum, mut hits, mut predicted, mut truth) = (0.0, 0usize, 0usize, 0usize);
    for path in &maps {
        let id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let gt_path = a.gt_dir.join(format!("{id}.json"));
        let points = load_points(&gt_path)?;
        let pred = load_map(path)?;
        let record = EvalRecord::new(id.clone(), pred.total_mass(), points.count());
        let mut row = vec![
            id,
            record.estimated.to_string(),
            record.ground_truth.to_string(),
            (record.estimated - record.ground_truth as f64).abs().to_string(),
        ];
        if let Some(level) = a.game {
            let g = game(&pred, &points, level)?;
            game_sum += g;
            row.push(g.to_string());
        }
        if a.localize {
            let loc = localize_and_match(&pred, &points, a.peak, a.radius);
            hits += loc.matches.len();
            predicted += loc.predicted.len();
            truth += points.count();
            row.extend([loc.precision.to_string(), loc.recall.to_string(), loc.f1.to_string()]);
        }
        records.push(record);
        rows.push(row);
    }
    let (mae, mse) = mae_mse(&records)?;

    let mut header = vec!["id", "estimate", "truth", "abs_error"];
    if a.game.is_some() {
        header.push("game");
    }
    if a.localize {
        header.extend(["precision", "recall", "f1"]);
    }
    println!("{}", header.join("\t"));
    for row in &rows {
        println!("{}", row.join("\t"));
    }
    if let Some(path) = &a.csv {
        let mut out = create(path)?;
        writeln!(out, "{}", header.join(","))?;
        for row in &rows {
            writeln!(out, "{}", row.join(","))?;
        }
        out.flush()?;
    }

    let mut fields = vec![kv("images", records.len()), kv("mae", mae), kv("mse", mse)];
    if let Some(level) = a.game {
        fields.push(kv("game_level", level));
        fields.push(kv("game", game_sum / records.len() as f64));
    }
    if a.localize {
        let ratio = |den: usize| if den == 0 { 0.0 } else { hits as f64 / den as f64 };
        let (p, r) = (ratio(predicted), ratio(truth));
        let f1 = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
        fields.extend([kv("precision", p), kv("recall", r), kv("f1", f1)]);
    }
    Ok(fields)
}

fn localize(a: &LocalizeArgs) -> Outcome {
    check_positive("radius", a.radius)?;
    if !(a.peak > 0.0 && a.peak <= 1.0) {
        return Err(Failure::Usage(format!("--peak must lie in (0, 1], got {}", a.peak)));
    }
    let pred = load_map(&a.pred)?;
    let truth = match &a.points {
        Some(p) => Some(load_points(p)?),
        None => None,
    };
    let reference = match &truth {
        Some(t) => t.clone(),
        None => PointSet::empty(pred.cols() as u32, pred.rows() as u32)?,
    };
    let loc = localize_and_match(&pred, &reference, a.peak, a.radius);
    for p in &loc.predicted {
        println!("peak {} {}", p.x, p.y);
    }
    if let Some(path) = &a.out {
        let peaks = PointSet::new(pred.cols() as u32, pred.rows() as u32, loc.predicted.clone())?;
        write_points(&peaks, create(path)?)?;
    }
    let mut fields = vec![kv("predicted", loc.predicted.len())];
    if truth.is_some() {
        fields.extend([
            kv("matched", loc.matches.len()),
            kv("precision", loc.precision),
            kv("recall", loc.recall),
            kv("f1", loc.f1),
        ]);
    }
    Ok(fields)
}

fn perturb_cmd(a: &PerturbArgs) -> Outcome {
    if !(a.radius.is_finite() && a.radius >= 0.0) {
        return Err(Failure::Usage(format!("--radius must be >= 0, got {}", a.radius)));
    }
    let points = load_points(&a.points)?;
    let spec = PerturbSpec {
        magnitude: a.radius,
        mode: a.mode.into(),
        seed: a.seed,
    };
    let out = perturb(&points, &spec)?;
    write_points(&out.points, create(&a.out)?)?;
    Ok(vec![
        kv("n", out.points.count()),
        kv("clamped", out.clamped),
        kv("seed", a.seed),
    ])
}

fn fit_config(loss: FitLoss, p: &FitParams, init: FitInit) -> Result<FitConfig, Failure> {
    check_positive("step-size", p.step_size)?;
    let decay = match (p.decay, &loss) {
        (Some(d), _) if !(d.is_finite() && d >= 0.0) => {
            return Err(Failure::Usage(format!("--decay must be >= 0, got {d}")))
        }
        (Some(d), _) => (d > 0.0).then_some(d),
        (None, FitLoss::HdL2(_)) => None,
        (None, _) => Some(DEFAULT_DECAY),
    };
    if p.steps == 0 {
        return Err(Failure::Usage("--steps must be >= 1".into()));
    }
    Ok(FitConfig {
        loss,
        steps: p.steps,
        step_size: p.step_size,
        init,
        clip: (p.clip > 0.0).then_some(p.clip),
        decay,
    })
}

fn sweep(a: &SweepArgs, threads: usize) -> Outcome {
    let radii = parse_list("radii", &a.radii)?;
    let seeds = parse_seeds(&a.seeds)?;
    let metric = if a.count_error {
        SweepMetric::Count
    } else {
        match a.game {
            Some(l) if l <= 3 => SweepMetric::Game(l),
            Some(l) => return Err(Failure::Usage(format!("--game must be 0..=3, got {l}"))),
            None => SweepMetric::Count,
        }
    };
    let loss = FitLoss::AlPapm {
        cost: a.cost.spec()?,
        sinkhorn: a.fit.solver.config()?,
        lambda: a.fit.lambda,
    };
    let cfg = fit_config(loss, &a.fit, FitInit::UniformMassN)?;
    let points = load_points(&a.points)?;
    let sweep_cfg = SweepConfig {
        mode: a.mode.into(),
        metric,
        threads,
    };
    let rows = robustness_sweep(
        &points,
        |p: &PointSet| fit_map(p, p.shape(), &cfg).map(|r| r.map),
        &radii,
        &seeds,
        &sweep_cfg,
    )?;
    println!("magnitude\tmae\tmse\tcompleted\tfailed");
    for r in &rows {
        println!("{}\t{}\t{}\t{}\t{}", r.magnitude, r.mae, r.mse, r.completed, r.failures.len());
        for (seed, msg) in &r.failures {
            eprintln!("magnitude {} seed {seed}: {msg}", r.magnitude);
        }
    }
    if let Some(path) = &a.out {
        let mut out = create(path)?;
        writeln!(out, "magnitude,mae,mse,completed,failed")?;
        for r in &rows {
            writeln!(out, "{},{},{},{},{}", r.magnitude, r.mae, r.mse, r.completed, r.failures.len())?;
        }
        out.flush()?;
    }
    let failed: usize = rows.iter().map(|r| r.failures.len()).sum();
    let maes: Vec<String> = rows.iter().map(|r| r.mae.to_string()).collect();
    Ok(vec![
        kv("cells", radii.len() * seeds.len()),
        kv("failed", failed),
        kv("mae", maes.join(",")),
    ])
}

fn fit(a: &FitArgs) -> Outcome {
    let grid = a.grid.as_deref().map(|g| parse_grid("grid", g)).transpose()?;
    let init = match (a.init, a.seed) {
        (Init::Uniform, _) => FitInit::UniformMassN,
        (Init::Random, Some(seed)) => FitInit::SeededRandom(seed),
        (Init::Random, None) => return Err(Failure::Usage("--init random requires an explicit --seed".into())),
    };
    let loss = match a.loss {
        LossKind::HdL2 => {
            let params = GgdParams::new(a.sigma.unwrap_or(4.0), a.shape.unwrap_or(8.0))?;
            FitLoss::HdL2(KernelSpec::new(params, Normalization::DiscreteRenormalized))
        }
        LossKind::AlPapm => {
            let cost = CostArgs {
                family: a.family,
                sigma: a.sigma.unwrap_or(16.0),
                shape: a.shape.unwrap_or(2.0),
                cost_cap: DEFAULT_COST_CAP,
            };
            FitLoss::AlPapm {
                cost: cost.spec()?,
                sinkhorn: a.fit.solver.config()?,
                lambda: a.fit.lambda,
            }
        }
    };
    let cfg = fit_config(loss, &a.fit, init)?;
    let points = load_points(&a.points)?;
    let grid = grid.unwrap_or_else(|| points.shape());
    let result = fit_map(&points, grid, &cfg)?;
    write_map(&result.map, create(&a.out)?, a.format.into())?;
    if let Some(path) = &a.trace {
        let mut out = create(path)?;
        writeln!(out, "step,loss")?;
        for (i, v) in result.trace.iter().enumerate() {
            writeln!(out, "{i},{v}")?;
        }
        out.flush()?;
    }
    println!("initial loss {}", result.trace[0]);
    println!("final loss {}", result.final_loss);
    Ok(vec![
        kv("steps", cfg.steps),
        kv("final_loss", result.final_loss),
        kv("mass", result.map.total_mass()),
        kv("n", points.count()),
    ])
}

fn oracle_ot(a: &OracleArgs) -> Outcome {
    let cost = a.cost.spec()?;
    let solver = a.solver.config()?;
    let points = load_points(&a.points)?;
    let pred = load_map(&a.pred)?;
    let measures = normalize_measures(&points, &pred)?;
    let matrix = build_cost_matrix(&points, pred.shape(), &cost)?;
    let exact = exact_ot(&matrix, &measures.source, &measures.target)?;
    let approx = sinkhorn(&matrix, &measures.source, &measures.target, &solver)?;
    let gap = if exact.value != 0.0 {
        (approx.value - exact.value).abs() / exact.value.abs()
    } else {
        approx.value.abs()
    };
    println!("exact {}", exact.value);
    println!("sinkhorn {}", approx.value);
    Ok(vec![
        kv("exact", exact.value),
        kv("sinkhorn", approx.value),
        kv("relative_gap", gap),
        kv("converged", approx.converged),
        kv("marginal_violation", approx.marginal_violation),
    ])
}
