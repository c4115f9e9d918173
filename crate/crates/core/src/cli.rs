//! `awls` command-line interface.
//!
//! Exit codes: 0 success, 2 usage or parameter error, 3 I/O or format error,
//! 4 numerical failure. Progress goes to stderr; results go to files and stdout.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bench::{grid, run_bench, BenchOptions};
use crate::error::{Error, Result};
use crate::io::{load_matrix, save_matrix, MatrixFormat};
use crate::media::{decompose_stack, read_frame_dir, write_stack_outputs, DEFAULT_FOREGROUND_THRESHOLD};
use crate::solver::{solve, Init, SolverConfig, Variant};
use crate::synth::{SnrScale, SynthInstance, SynthSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

/// Exit code for a library error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Parameter(_) => EXIT_USAGE,
        Error::Io(_) | Error::Format { .. } => EXIT_IO,
        Error::Shape { .. } | Error::NotPositiveDefinite { .. } | Error::Domain(_) | Error::NonFinite { .. } => {
            EXIT_NUMERIC
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "awls", version, about = "Low-rank plus sparse matrix decomposition with adaptive weights")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic instance Y = X + S.
    Synth(SynthArgs),
    /// Decompose a matrix file into low-rank, sparse and weight matrices.
    Decompose(DecomposeArgs),
    /// Run the synthetic benchmark grid.
    Bench(BenchArgs),
    /// Separate background and foreground in a directory of PGM frames.
    StackDecompose(StackArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormatArg {
    Csv,
    Mat1,
}

impl From<FormatArg> for MatrixFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => MatrixFormat::Csv,
            FormatArg::Mat1 => MatrixFormat::Mat1,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum VariantArg {
    L2,
    L0,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::L2 => Variant::L2,
            VariantArg::L0 => Variant::L0,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum InitArg {
    /// Block power iteration on Y.
    Power,
    /// I.i.d. standard normal factors.
    Gaussian,
}

impl From<InitArg> for Init {
    fn from(i: InitArg) -> Self {
        match i {
            InitArg::Power => Init::PowerIteration,
            InitArg::Gaussian => Init::GaussianRandom,
        }
    }
}

/// Solver flags shared by every command that runs the solver. Rank and variant
/// are handled per command.
#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    /// Sparse penalty weight.
    #[arg(long, default_value_t = SolverConfig::default().lambda)]
    pub lambda: f64,
    /// Proximal parameter of the U and V steps.
    #[arg(long = "t", default_value_t = SolverConfig::default().prox_t)]
    pub prox_t: f64,
    /// Weight update exponent.
    #[arg(long, default_value_t = SolverConfig::default().p)]
    pub p: f64,
    #[arg(long, default_value_t = SolverConfig::default().max_iter)]
    pub max_iter: usize,
    #[arg(long, default_value_t = SolverConfig::default().tol)]
    pub tol: f64,
    /// Seed of the factor initialization.
    #[arg(long, default_value_t = SolverConfig::default().seed)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = InitArg::Power)]
    pub init: InitArg,
}

impl SolverArgs {
    fn config(&self, rank: usize, variant: Variant) -> SolverConfig {
        SolverConfig {
            rank,
            lambda: self.lambda,
            prox_t: self.prox_t,
            p: self.p,
            variant,
            max_iter: self.max_iter,
            tol: self.tol,
            seed: self.seed,
            init: self.init.into(),
        }
    }
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub m: usize,
    #[arg(long)]
    pub n: usize,
    /// Rank of X [default: m / 50, at least 1].
    #[arg(long)]
    pub rank: Option<usize>,
    /// Expected fraction of nonzero entries in S, in (0, 1).
    #[arg(long)]
    pub sparsity: f64,
    /// log10(||X||² / ||M||²) of the dense noise M before masking.
    #[arg(long)]
    pub snr: f64,
    /// Interpret --snr in decibels (10 log10).
    #[arg(long)]
    pub snr_db: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Writes <prefix>_Y, <prefix>_X and <prefix>_S.
    #[arg(long)]
    pub out_prefix: PathBuf,
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    pub format: FormatArg,
}

#[derive(Debug, Args)]
pub struct DecomposeArgs {
    /// CSV or MAT1 matrix file.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub rank: usize,
    #[arg(long, value_enum, default_value_t = VariantArg::L2)]
    pub variant: VariantArg,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Writes <prefix>_X, <prefix>_S and <prefix>_W.
    #[arg(long)]
    pub out_prefix: PathBuf,
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    pub format: FormatArg,
    /// Also write the per-iteration trace to <prefix>_trace.csv.
    #[arg(long)]
    pub trace: bool,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Comma-separated square sizes.
    #[arg(long, default_value = "500,1000")]
    pub sizes: String,
    #[arg(long, default_value = "0.1,0.2")]
    pub sparsities: String,
    #[arg(long, default_value = "1,3,6,9,12,15")]
    pub snrs: String,
    #[arg(long, default_value_t = 1)]
    pub trials: usize,
    /// Base seed for instance generation.
    #[arg(long = "seed", default_value_t = 0)]
    pub base_seed: u64,
    /// Report path; .json writes JSON, .csv writes CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Comma-separated variants (l2, l0).
    #[arg(long, default_value = "l2")]
    pub variant: String,
    /// Worker threads; 0 uses all cores.
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    /// Record wall_seconds as 0 so that repeated runs give identical reports.
    #[arg(long)]
    pub no_timing: bool,
    #[arg(long)]
    pub snr_db: bool,
    #[arg(long, default_value_t = SolverConfig::default().lambda)]
    pub lambda: f64,
    #[arg(long = "t", default_value_t = SolverConfig::default().prox_t)]
    pub prox_t: f64,
    #[arg(long, default_value_t = SolverConfig::default().p)]
    pub p: f64,
    #[arg(long, default_value_t = SolverConfig::default().max_iter)]
    pub max_iter: usize,
    #[arg(long, default_value_t = SolverConfig::default().tol)]
    pub tol: f64,
    #[arg(long, value_enum, default_value_t = InitArg::Power)]
    pub init: InitArg,
}

#[derive(Debug, Args)]
pub struct StackArgs {
    /// Directory of binary PGM frames, read in file-name order.
    #[arg(long)]
    pub frames: PathBuf,
    /// Output directory for bg_<name>.pgm and fg_<name>.pgm.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub rank: usize,
    #[arg(long, value_enum, default_value_t = VariantArg::L2)]
    pub variant: VariantArg,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Also write the raw sparse component as sparse.mat1.
    #[arg(long)]
    pub dump_sparse: bool,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Synth(a) => cmd_synth(&a),
        Command::Decompose(a) => cmd_decompose(&a),
        Command::Bench(a) => cmd_bench(&a),
        Command::StackDecompose(a) => cmd_stack_decompose(&a),
    }
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn matrix_path(prefix: &Path, name: &str, format: MatrixFormat) -> PathBuf {
    with_suffix(prefix, &format!("_{name}.{}", format.extension()))
}

fn cmd_synth(a: &SynthArgs) -> Result<()> {
    let mut spec = SynthSpec::new(a.m, a.n, a.sparsity, a.snr, a.seed);
    if let Some(r) = a.rank {
        spec.rank = r;
    }
    if a.snr_db {
        spec.snr_scale = SnrScale::Decibel;
    }
    spec.validate()?;
    let inst = SynthInstance::generate(&spec)?;
    let format = MatrixFormat::from(a.format);
    for (name, m) in [("Y", &inst.y), ("X", &inst.x_true), ("S", &inst.s_true)] {
        let path = matrix_path(&a.out_prefix, name, format);
        save_matrix(m, &path, format)?;
        eprintln!("wrote {}", path.display());
    }
    eprintln!(
        "synth: {}x{} rank {} sparsity {} (realized {:.4}) snr {}",
        spec.m,
        spec.n,
        spec.rank,
        spec.sparsity,
        inst.support.fraction(),
        spec.snr
    );
    Ok(())
}

fn cmd_decompose(a: &DecomposeArgs) -> Result<()> {
    let config = a.solver.config(a.rank, a.variant.into());
    config.validate(None)?;
    let y = load_matrix(&a.input)?;
    eprintln!("decompose: {} input {}, rank {}", y.dims(), a.input.display(), config.rank);
    let result = solve(&y, &config)?;
    let format = MatrixFormat::from(a.format);
    let outputs = [
        ("X", result.low_rank()?),
        ("S", result.sparse.clone()),
        ("W", result.weights.weights().clone()),
    ];
    for (name, m) in &outputs {
        save_matrix(m, &matrix_path(&a.out_prefix, name, format), format)?;
    }
    if a.trace {
        let mut buf = Vec::new();
        result.write_trace_csv(&mut buf)?;
        fs::write(with_suffix(&a.out_prefix, "_trace.csv"), buf)?;
    }
    println!(
        "J={:e} iterations={} termination={}",
        result.final_objective(),
        result.iterations,
        result.termination
    );
    Ok(())
}

fn parse_list<T: std::str::FromStr>(flag: &str, raw: &str) -> Result<Vec<T>> {
    let items: Vec<&str> = raw.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    if items.is_empty() {
        return Err(Error::Parameter(format!("--{flag} must list at least one value")));
    }
    items
        .into_iter()
        .map(|s| {
            s.parse()
                .map_err(|_| Error::Parameter(format!("--{flag}: cannot parse {s:?}")))
        })
        .collect()
}

enum ReportFormat {
    Csv,
    Json,
}

fn report_format(path: &Path) -> Result<ReportFormat> {
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("csv") => Ok(ReportFormat::Csv),
        Some("json") => Ok(ReportFormat::Json),
        _ => Err(Error::Parameter(format!(
            "--out {} must end in .csv or .json",
            path.display()
        ))),
    }
}

fn cmd_bench(a: &BenchArgs) -> Result<()> {
    let sizes: Vec<usize> = parse_list("sizes", &a.sizes)?;
    let sparsities: Vec<f64> = parse_list("sparsities", &a.sparsities)?;
    let snrs: Vec<f64> = parse_list("snrs", &a.snrs)?;
    let variants: Vec<Variant> = parse_list("variant", &a.variant)?;
    if a.trials == 0 {
        return Err(Error::Parameter("--trials must be at least 1".into()));
    }
    let report_kind = report_format(&a.out)?;
    for &m in &sizes {
        for &s in &sparsities {
            SynthSpec::new(m, m, s, 0.0, 0).validate()?;
        }
    }
    if let Some(bad) = snrs.iter().find(|s| !s.is_finite()) {
        return Err(Error::Parameter(format!("--snrs: {bad} is not finite")));
    }
    let solver = SolverConfig {
        lambda: a.lambda,
        prox_t: a.prox_t,
        p: a.p,
        max_iter: a.max_iter,
        tol: a.tol,
        init: a.init.into(),
        ..SolverConfig::default()
    };
    solver.validate(None)?;
    let opts = BenchOptions {
        trials: a.trials,
        base_seed: a.base_seed,
        solver,
        snr_scale: if a.snr_db { SnrScale::Decibel } else { SnrScale::Log10 },
        threads: a.threads,
        timing: !a.no_timing,
    };
    let cells = grid(&sizes, &sparsities, &snrs, &variants);
    eprintln!("bench: {} cells x {} trials", cells.len(), a.trials);
    let report = run_bench(&cells, &opts)?;
    let bytes = match report_kind {
        ReportFormat::Csv => report.to_csv(),
        ReportFormat::Json => report.to_json(),
    };
    fs::write(&a.out, bytes)?;
    eprintln!("wrote {}", a.out.display());

    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    writeln!(
        out,
        "{:>6} {:>6} {:>8} {:>6} {:>7} {:>6} {:>12} {:>12} {:>9} {:>10}",
        "m", "n", "sparsity", "snr", "variant", "trials", "rmse_x", "rmse_s", "iter", "wall_s"
    )?;
    for c in report.summary() {
        writeln!(
            out,
            "{:>6} {:>6} {:>8} {:>6} {:>7} {:>6} {:>12.3e} {:>12.3e} {:>9.1} {:>10.3}",
            c.m,
            c.n,
            c.sparsity,
            c.snr,
            c.variant.as_str(),
            c.trials,
            c.mean_rmse_x,
            c.mean_rmse_s,
            c.mean_iterations,
            c.mean_wall_seconds
        )?;
    }
    for r in report.failures() {
        eprintln!(
            "failed: m={} sparsity={} snr={} trial={} variant={}: {}",
            r.m,
            r.sparsity,
            r.snr,
            r.trial,
            r.variant,
            r.error.as_deref().unwrap_or_default()
        );
    }
    Ok(())
}

fn cmd_stack_decompose(a: &StackArgs) -> Result<()> {
    let config = a.solver.config(a.rank, a.variant.into());
    config.validate(None)?;
    let (names, stack) = read_frame_dir(&a.frames)?;
    eprintln!(
        "stack-decompose: {} frames of {}x{}",
        stack.len(),
        stack.height(),
        stack.width()
    );
    let dec = decompose_stack(&stack, &config)?;
    write_stack_outputs(&a.out, &names, &dec, a.dump_sparse)?;
    println!(
        "frames={} J={:e} iterations={} termination={} foreground_fraction={:.4}",
        stack.len(),
        dec.result.final_objective(),
        dec.result.iterations,
        dec.result.termination,
        dec.foreground_mask(DEFAULT_FOREGROUND_THRESHOLD).fraction()
    );
    Ok(())
}
