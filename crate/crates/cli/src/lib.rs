//! Command-line front end: `analyze`, `optimize`, `train`, `verify`, `bench`.
//!
//! Exit codes: 0 success, 1 runtime failure (a JSON error object on stderr)
//! or failed verification, 2 usage error.

use std::ffi::OsString;
use std::path::PathBuf;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use vne_core::diagnostics::{self, ReportOptions, DEFAULT_MAX_PAIRS, DEFAULT_PROBES};
use vne_core::io::{self, MatrixFormat, ReportFile};
use vne_core::optimize::{self, Mode, OptimizeConfig};
use vne_core::trainer::{self, Regime, Task, TrainConfig, SSL_ALPHA2};
use vne_core::verify::{self, Suite};
use vne_core::{entropy, Error, RepresentationMatrix, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Entropy weight used when `--alpha` is omitted for a supervised regime.
pub const DEFAULT_ALPHA: f64 = 0.01;

#[derive(Debug, Parser)]
#[command(name = "vne", version, about = "Von Neumann entropy of representation autocorrelation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Diagnostics report for a representation matrix.
    Analyze(AnalyzeArgs),
    /// Entropy ascent or descent on random unit rows.
    Optimize(OptimizeArgs),
    /// Train a toy MLP with or without an entropy regularizer.
    Train(TrainArgs),
    /// Run the verification suites; exits 0 only if all pass.
    Verify(VerifyArgs),
    /// Time the entropy gradient against a full training step.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Auto,
    Csv,
    Bin,
}

impl From<FormatArg> for MatrixFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Auto => MatrixFormat::Auto,
            FormatArg::Csv => MatrixFormat::Csv,
            FormatArg::Bin => MatrixFormat::Bin,
        }
    }
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = FormatArg::Auto)]
    format: FormatArg,
    /// Write the report here instead of stdout.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, env = "VNE_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_PROBES)]
    probes: usize,
    #[arg(long, default_value_t = DEFAULT_MAX_PAIRS)]
    max_pairs: usize,
    /// Include per-probe and per-pair values.
    #[arg(long)]
    values: bool,
    /// Record the current time in the report (makes output time-dependent).
    #[arg(long)]
    timestamp: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Max,
    Min,
}

#[derive(Debug, Args)]
struct OptimizeArgs {
    #[arg(long, value_enum, default_value_t = ModeArg::Max)]
    mode: ModeArg,
    #[arg(long, default_value_t = 16)]
    n: usize,
    #[arg(long, default_value_t = 64)]
    d: usize,
    #[arg(long, default_value_t = 2000)]
    steps: usize,
    #[arg(long, default_value_t = 0.05)]
    lr: f64,
    #[arg(long, env = "VNE_SEED", default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    record_every: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, ValueEnum)]
enum TaskArg {
    Supervised,
    Ssl,
}

#[derive(Debug, Clone, Copy, PartialEq, ValueEnum)]
enum RegArg {
    Vanilla,
    #[value(name = "vne+")]
    VnePlus,
    #[value(name = "vne-")]
    VneMinus,
    Frobenius,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long, value_enum)]
    task: Option<TaskArg>,
    /// For SSL, `vanilla` is the invariance-only run and `vne+` is I-VNE⁺.
    #[arg(long, value_enum)]
    reg: Option<RegArg>,
    /// Regularizer weight (the regime carries the sign). For SSL with
    /// `vne+` this is the entropy weight.
    #[arg(long)]
    alpha: Option<f64>,
    /// SSL invariance weight.
    #[arg(long)]
    alpha1: Option<f64>,
    /// JSON training configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, env = "VNE_SEED")]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    /// Also write the generated dataset (label in the last column) as CSV.
    #[arg(long)]
    export_dataset: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SuiteArg {
    All,
    Bounds,
    Rank,
    Disentangle,
    Isotropy,
    Gradient,
    Paths,
}

impl From<SuiteArg> for Suite {
    fn from(s: SuiteArg) -> Self {
        match s {
            SuiteArg::All => Suite::All,
            SuiteArg::Bounds => Suite::Bounds,
            SuiteArg::Rank => Suite::Rank,
            SuiteArg::Disentangle => Suite::Disentangle,
            SuiteArg::Isotropy => Suite::Isotropy,
            SuiteArg::Gradient => Suite::Gradient,
            SuiteArg::Paths => Suite::Paths,
        }
    }
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long, value_enum, default_value_t = SuiteArg::All)]
    suite: SuiteArg,
    #[arg(long, env = "VNE_SEED", default_value_t = 0)]
    seed: u64,
    /// Omit per-trial records.
    #[arg(long)]
    brief: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Comma-separated batch sizes, each optionally `BATCHxWIDTH`.
    #[arg(long, default_value = "256,128,64")]
    sizes: String,
    /// Penultimate width for sizes given without one.
    #[arg(long, default_value_t = 64)]
    width: usize,
    #[arg(long, default_value_t = 20)]
    repeats: usize,
    #[arg(long, env = "VNE_SEED", default_value_t = 0)]
    seed: u64,
    /// Emit JSON instead of the table.
    #[arg(long)]
    json: bool,
}

/// Parses `argv` (including the program name) and runs the command.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Analyze(a) => analyze(a),
        Command::Optimize(a) => optimize_cmd(a),
        Command::Train(a) => train_cmd(a),
        Command::Verify(a) => verify_cmd(a),
        Command::Bench(a) => bench_cmd(a),
    };
    match result {
        Ok(code) => code,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(CliError::Runtime(e)) => {
            eprintln!("{}", error_json(&e));
            EXIT_FAILURE
        }
    }
}

enum CliError {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Runtime(e)
    }
}

type CliResult = std::result::Result<i32, CliError>;

/// `{"error": {"kind": ..., "message": ...}}` on one line.
pub fn error_json(e: &Error) -> String {
    serde_json::json!({ "error": { "kind": e.kind(), "message": e.to_string() } }).to_string()
}

fn analyze(a: AnalyzeArgs) -> CliResult {
    let m = io::load_matrix(&a.input, a.format.into())?;
    let opts = ReportOptions {
        probes: a.probes,
        max_pairs: a.max_pairs,
        keep_values: a.values,
        ..Default::default()
    };
    let report = diagnostics::full_report_with(&m, &opts, a.seed)?;
    let timestamp = a.timestamp.then(|| {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0)
    });
    let file = ReportFile::new(report, a.seed, timestamp, m.shape());
    io::emit_json(&file, a.report.as_deref())?;
    Ok(EXIT_OK)
}

fn optimize_cmd(a: OptimizeArgs) -> CliResult {
    let cfg = OptimizeConfig {
        n: a.n,
        d: a.d,
        mode: match a.mode {
            ModeArg::Max => Mode::Maximize,
            ModeArg::Min => Mode::Minimize,
        },
        steps: a.steps,
        step_size: a.lr,
        seed: a.seed,
        record_every: a.record_every,
    };
    let traj = optimize::optimize_vne(&cfg)?;
    io::emit_json(&traj, a.out.as_deref())?;
    Ok(EXIT_OK)
}

fn train_config(a: &TrainArgs) -> std::result::Result<TrainConfig, CliError> {
    let task = a.task.map(|t| match t {
        TaskArg::Supervised => Task::Supervised,
        TaskArg::Ssl => Task::Ssl,
    });
    let mut cfg = match &a.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(Error::from)?;
            let mut cfg: TrainConfig = serde_json::from_str(&text).map_err(Error::from)?;
            if let Some(t) = task {
                cfg.task = t;
            }
            cfg
        }
        None => match task.unwrap_or(Task::Supervised) {
            Task::Supervised => TrainConfig::supervised(Regime::Vanilla, 0.0),
            Task::Ssl => TrainConfig::ssl(1.0, SSL_ALPHA2),
        },
    };
    match cfg.task {
        Task::Supervised => {
            if let Some(reg) = a.reg {
                cfg.regime = match reg {
                    RegArg::Vanilla => Regime::Vanilla,
                    RegArg::VnePlus => Regime::VnePlus,
                    RegArg::VneMinus => Regime::VneMinus,
                    RegArg::Frobenius => Regime::Frobenius,
                };
                cfg.alpha = if reg == RegArg::Vanilla { 0.0 } else { DEFAULT_ALPHA };
            }
            if let Some(alpha) = a.alpha {
                cfg.alpha = alpha;
            }
        }
        Task::Ssl => {
            match a.reg {
                Some(RegArg::Vanilla) => cfg.alpha2 = 0.0,
                Some(RegArg::VnePlus) => cfg.alpha2 = a.alpha.unwrap_or(SSL_ALPHA2),
                Some(other) => {
                    return Err(CliError::Usage(format!(
                        "--reg {} is not available for --task ssl (use vanilla or vne+)",
                        other.to_possible_value().unwrap().get_name()
                    )));
                }
                None => {
                    if let Some(alpha) = a.alpha {
                        cfg.alpha2 = alpha;
                    }
                }
            }
            if let Some(alpha1) = a.alpha1 {
                cfg.alpha1 = alpha1;
            }
        }
    }
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    if let Some(epochs) = a.epochs {
        cfg.epochs = epochs;
    }
    if let Some(lr) = a.lr {
        cfg.learning_rate = lr;
    }
    Ok(cfg)
}

fn train_cmd(a: TrainArgs) -> CliResult {
    let cfg = train_config(&a)?;
    cfg.validate()?;
    if let Some(path) = &a.export_dataset {
        let data = trainer::make_synthetic_dataset(&cfg.dataset, cfg.seed)?;
        io::write_matrix(path, &io::dataset_matrix(&data)?, MatrixFormat::Csv)?;
    }
    let report = match cfg.task {
        Task::Supervised => trainer::train_supervised(&cfg)?,
        Task::Ssl => trainer::train_ssl(&cfg)?,
    };
    io::emit_json(&report, a.out.as_deref())?;
    Ok(EXIT_OK)
}

fn verify_cmd(a: VerifyArgs) -> CliResult {
    let mut outcomes = verify::run(a.suite.into(), a.seed)?;
    if a.brief {
        for o in &mut outcomes {
            o.details.clear();
        }
    }
    io::emit_json(&outcomes, a.out.as_deref())?;
    Ok(if outcomes.iter().all(|o| o.pass) {
        EXIT_OK
    } else {
        EXIT_FAILURE
    })
}

/// Timing of one batch size.
#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub batch: usize,
    pub width: usize,
    /// Mean seconds per iteration spent on the entropy and its gradient.
    pub vne_seconds: f64,
    /// Mean seconds per regularized training step, entropy included.
    pub total_seconds: f64,
    pub overhead_percent: f64,
}

pub fn parse_sizes(spec: &str, width: usize) -> std::result::Result<Vec<(usize, usize)>, String> {
    spec.split(',')
        .map(|item| {
            let item = item.trim();
            let parse = |s: &str| {
                s.parse::<usize>()
                    .ok()
                    .filter(|&v| v >= 2)
                    .ok_or_else(|| format!("invalid size '{item}' (expected N or NxD with N, D >= 2)"))
            };
            match item.split_once('x') {
                Some((n, d)) => Ok((parse(n)?, parse(d)?)),
                None => Ok((parse(item)?, width)),
            }
        })
        .collect()
}

/// Times a VNE⁺ step of the default supervised network with the given batch
/// size and penultimate width.
pub fn bench_size(batch: usize, width: usize, repeats: usize, seed: u64) -> Result<BenchRow> {
    let mut cfg = TrainConfig::supervised(Regime::VnePlus, DEFAULT_ALPHA);
    cfg.hidden_dims = vec![128, width];
    cfg.seed = seed;
    cfg.dataset.samples_per_class = batch.div_ceil(cfg.dataset.classes);
    cfg.batch_size = batch;
    cfg.validate()?;
    let data = trainer::make_synthetic_dataset(&cfg.dataset, seed)?;
    let rows: Vec<usize> = (0..batch).collect();
    let (x, labels) = data.select(&rows);
    let mut mlp = trainer::Mlp::seeded(&cfg.layer_dims(), seed);

    let mut vne_time = 0.0;
    let mut total_time = 0.0;
    let pen = mlp.layers.len() - 2;
    for _ in 0..repeats.max(1) {
        let h = mlp.forward(&x).tap(trainer::Tap::PostActivation(pen)).clone();
        let h = RepresentationMatrix::new(h)?;
        let t = Instant::now();
        if h.row_norms().iter().all(|&v| v > vne_core::repr::ZERO_ROW_NORM) {
            std::hint::black_box(entropy::vne_gradient(&h)?);
        }
        vne_time += t.elapsed().as_secs_f64();

        let t = Instant::now();
        let obj = trainer::supervised_objective(&mlp, &x, &labels, &cfg)?;
        mlp.apply(&obj.grads, cfg.learning_rate);
        total_time += t.elapsed().as_secs_f64();
    }
    let k = repeats.max(1) as f64;
    let (vne_seconds, total_seconds) = (vne_time / k, total_time / k);
    Ok(BenchRow {
        batch,
        width,
        vne_seconds,
        total_seconds,
        overhead_percent: if total_seconds > 0.0 {
            100.0 * vne_seconds / total_seconds
        } else {
            0.0
        },
    })
}

/// Table in the layout of the usual overhead table: one column per size.
pub fn format_bench_table(rows: &[BenchRow]) -> String {
    let mut out = String::from("Computational overhead of VNE\n");
    let line = |label: &str, cells: Vec<String>| {
        let mut s = format!("{label:<40}");
        for c in cells {
            s.push_str(&format!("{c:>12}"));
        }
        s.push('\n');
        s
    };
    out.push_str(&line("Batch size", rows.iter().map(|r| r.batch.to_string()).collect()));
    out.push_str(&line("Penultimate width", rows.iter().map(|r| r.width.to_string()).collect()));
    out.push_str(&line(
        "Average time per iteration (s)  On VNE",
        rows.iter().map(|r| format!("{:.6}", r.vne_seconds)).collect(),
    ));
    out.push_str(&line(
        "                               Total",
        rows.iter().map(|r| format!("{:.6}", r.total_seconds)).collect(),
    ));
    out.push_str(&line(
        "Overhead",
        rows.iter().map(|r| format!("{:.2}%", r.overhead_percent)).collect(),
    ));
    out
}

fn bench_cmd(a: BenchArgs) -> CliResult {
    let sizes = parse_sizes(&a.sizes, a.width).map_err(CliError::Usage)?;
    let rows = sizes
        .iter()
        .map(|&(n, d)| bench_size(n, d, a.repeats, a.seed))
        .collect::<Result<Vec<_>>>()?;
    if a.json {
        io::emit_json(&rows, None)?;
    } else {
        print!("{}", format_bench_table(&rows));
    }
    Ok(EXIT_OK)
}
