//! `pcamg` command line: `solve`, `bench` and `gen`.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_pcg::Pcg32;
use rayon::prelude::*;
use serde::Serialize;

use crate::adaptive::{baseline_uaamg, solve_general, solve_homogeneous, AdaptiveConfig, SolveReport};
use crate::error::{Error, Result};
use crate::graph_io::{
    grid_laplacian, make_rhs, preprocess, read_edge_list, read_matrix_market, ring_graph, write_matrix_market, RhsKind,
};
use crate::sparse::{adjacency_from_laplacian, SparseMatrix};

pub const CSV_HEADER: [&str; 11] = [
    "problem",
    "n",
    "nnz",
    "solver",
    "rhs",
    "iter",
    "resetups",
    "convr_last10",
    "oc_avg",
    "wall_time_s",
    "converged",
];

pub const JSON_SCHEMA_VERSION: u32 = 1;

pub const EXIT_CONVERGED: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_CAPPED: i32 = 2;

#[derive(Debug, Clone, PartialEq)]
pub enum Problem {
    Grid(usize, usize),
    Ring(usize),
    MatrixMarket(PathBuf),
    EdgeList(PathBuf),
}

impl FromStr for Problem {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (kind, rest) = s
            .split_once(':')
            .ok_or_else(|| format!("expected KIND:ARGS, got `{s}`"))?;
        let count = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("bad size `{v}`: {e}"));
        match kind {
            "grid" => {
                let (nx, ny) = rest.split_once(',').ok_or("grid expects NX,NY")?;
                Ok(Problem::Grid(count(nx)?, count(ny)?))
            }
            "ring" => Ok(Problem::Ring(count(rest)?)),
            "mtx" => Ok(Problem::MatrixMarket(rest.into())),
            "edges" => Ok(Problem::EdgeList(rest.into())),
            _ => Err(format!("unknown problem kind `{kind}` (grid, ring, mtx, edges)")),
        }
    }
}

impl fmt::Display for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Problem::Grid(nx, ny) => write!(f, "grid:{nx},{ny}"),
            Problem::Ring(n) => write!(f, "ring:{n}"),
            Problem::MatrixMarket(p) => write!(f, "mtx:{}", p.display()),
            Problem::EdgeList(p) => write!(f, "edges:{}", p.display()),
        }
    }
}

impl Problem {
    /// Builds or reads the graph and returns its Laplacian.
    pub fn load(&self) -> Result<SparseMatrix> {
        match self {
            Problem::Grid(nx, ny) => grid_laplacian(*nx, *ny),
            Problem::Ring(n) => ring_graph(*n),
            Problem::MatrixMarket(p) => preprocess(&read_matrix_market(p)?),
            Problem::EdgeList(p) => preprocess(&read_edge_list(p)?),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rhs(pub RhsKind);

impl FromStr for Rhs {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "lowfreq" => Ok(Rhs(RhsKind::LowFrequency)),
            "zero" => Ok(Rhs(RhsKind::Zero)),
            _ => match s.strip_prefix("random:") {
                Some(seed) => seed
                    .parse()
                    .map(|v| Rhs(RhsKind::ZeroSumRandom(v)))
                    .map_err(|e| format!("bad seed `{seed}`: {e}")),
                None => Err(format!("unknown rhs `{s}` (lowfreq, random:SEED, zero)")),
            },
        }
    }
}

impl fmt::Display for Rhs {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            RhsKind::LowFrequency => write!(f, "lowfreq"),
            RhsKind::ZeroSumRandom(seed) => write!(f, "random:{seed}"),
            RhsKind::Zero => write!(f, "zero"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    Baseline,
    AdaptiveEveryStep,
    AdaptiveBalanced,
    AdaptiveHomogeneous,
}

impl FromStr for SolverKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "baseline" => Ok(SolverKind::Baseline),
            "adaptive:every" => Ok(SolverKind::AdaptiveEveryStep),
            "adaptive:balanced" => Ok(SolverKind::AdaptiveBalanced),
            "adaptive:homog" => Ok(SolverKind::AdaptiveHomogeneous),
            _ => Err(format!(
                "unknown solver `{s}` (baseline, adaptive:every, adaptive:balanced, adaptive:homog)"
            )),
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolverKind::Baseline => "baseline",
            SolverKind::AdaptiveEveryStep => "adaptive:every",
            SolverKind::AdaptiveBalanced => "adaptive:balanced",
            SolverKind::AdaptiveHomogeneous => "adaptive:homog",
        })
    }
}

impl SolverKind {
    pub fn config(self) -> AdaptiveConfig {
        match self {
            SolverKind::Baseline | SolverKind::AdaptiveBalanced => AdaptiveConfig::balanced(),
            SolverKind::AdaptiveEveryStep => AdaptiveConfig::every_step(),
            SolverKind::AdaptiveHomogeneous => AdaptiveConfig::homogeneous(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Csv,
    Json,
}

/// One solve, as given on the command line or as one manifest line.
#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    /// grid:NX,NY | ring:N | mtx:PATH | edges:PATH
    #[arg(long)]
    pub problem: Problem,
    /// lowfreq | random:SEED | zero (default: zero for adaptive:homog, lowfreq otherwise)
    #[arg(long)]
    pub rhs: Option<Rhs>,
    /// baseline | adaptive:every | adaptive:balanced | adaptive:homog
    #[arg(long, default_value = "adaptive:balanced")]
    pub solver: SolverKind,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, default_value_t = 2500)]
    pub max_iter: usize,
    /// Overrides the solver's re-setup threshold preset.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Keep at most N entries per row of the A² pattern during path-cover setup.
    #[arg(long)]
    pub a2_row_cap: Option<usize>,
    /// Seed for the random initial guess of the homogeneous solver.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchSpec {
    pub problem: Problem,
    pub rhs: Rhs,
    pub solver: SolverKind,
    pub config: AdaptiveConfig,
    pub seed: u64,
}

impl BenchSpec {
    pub fn from_args(args: &SolveArgs) -> Result<Self> {
        let rhs = args.rhs.unwrap_or(match args.solver {
            SolverKind::AdaptiveHomogeneous => Rhs(RhsKind::Zero),
            _ => Rhs(RhsKind::LowFrequency),
        });
        let mut config = args.solver.config();
        config.tol = args.tol;
        config.max_iter = args.max_iter;
        if let Some(t) = args.threshold {
            config.threshold = t;
        }
        config.cycle.a2_row_cap = args.a2_row_cap;
        let spec = BenchSpec {
            problem: args.problem.clone(),
            rhs,
            solver: args.solver,
            config,
            seed: args.seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let homog = self.solver == SolverKind::AdaptiveHomogeneous;
        let zero = self.rhs.0 == RhsKind::Zero;
        if homog && !zero {
            return Err(Error::InvalidSpec("adaptive:homog requires --rhs zero".into()));
        }
        if !homog && zero {
            return Err(Error::InvalidSpec(format!(
                "--rhs zero is only valid with adaptive:homog, not {}",
                self.solver
            )));
        }
        self.config.validate()
    }
}

/// One output row. Numeric fields are empty when the run failed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub problem: String,
    pub n: Option<usize>,
    pub nnz: Option<usize>,
    pub solver: String,
    pub rhs: String,
    pub iter: Option<usize>,
    pub resetups: Option<usize>,
    pub convr_last10: Option<f64>,
    pub oc_avg: Option<f64>,
    pub wall_time_s: Option<f64>,
    pub converged: Option<bool>,
}

impl BenchRow {
    fn failed(spec: &BenchSpec) -> Self {
        BenchRow {
            problem: spec.problem.to_string(),
            n: None,
            nnz: None,
            solver: spec.solver.to_string(),
            rhs: spec.rhs.to_string(),
            iter: None,
            resetups: None,
            convr_last10: None,
            oc_avg: None,
            wall_time_s: None,
            converged: None,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.converged {
            Some(true) => EXIT_CONVERGED,
            Some(false) => EXIT_CAPPED,
            None => EXIT_ERROR,
        }
    }
}

/// Uniform(−1, 1) entries scaled to unit 2-norm: the homogeneous solver's start.
/// The scaling keeps the initial residual independent of n under an absolute
/// tolerance.
pub fn random_start(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = Pcg32::seed_from_u64(seed);
    let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let norm = crate::sparse::norm2(&x);
    x.into_iter().map(|v| v / norm).collect()
}

/// Runs one solve. Timing covers setup and iteration, not graph loading.
pub fn run_bench(spec: &BenchSpec) -> Result<(SolveReport, BenchRow)> {
    spec.validate()?;
    let a = spec.problem.load()?;
    let n = a.n_rows();
    let (_, report) = match spec.solver {
        SolverKind::AdaptiveHomogeneous => solve_homogeneous(&a, &random_start(n, spec.seed), &spec.config)?,
        solver => {
            let b = make_rhs(spec.rhs.0, n)?;
            let x0 = vec![0.0; n];
            if solver == SolverKind::Baseline {
                baseline_uaamg(&a, &b, &x0, &spec.config)?
            } else {
                solve_general(&a, &b, &x0, &spec.config)?
            }
        }
    };
    let row = BenchRow {
        n: Some(n),
        nnz: Some(a.nnz()),
        iter: Some(report.iterations),
        resetups: Some(report.resetups),
        convr_last10: Some(report.convr_last10),
        oc_avg: Some(report.oc_avg),
        wall_time_s: Some(report.wall_time),
        converged: Some(report.converged),
        ..BenchRow::failed(spec)
    };
    Ok((report, row))
}

#[derive(Debug, Parser)]
#[command(name = "pcamg", version, about = "Path-cover adaptive AMG for graph Laplacians")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one problem and print a report row.
    Solve {
        #[command(flatten)]
        args: SolveArgs,
        #[arg(long, value_enum, default_value = "csv")]
        out: OutputFormat,
    },
    /// Run every entry of a manifest file.
    Bench {
        /// One set of solve flags per line; `#` starts a comment line.
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        out: OutputFormat,
        /// Entries run concurrently (each solve stays single-threaded).
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Write a generated or preprocessed graph as a Matrix Market adjacency.
    Gen {
        #[arg(long)]
        problem: Problem,
        #[arg(long)]
        output: PathBuf,
    },
}

#[derive(Debug, Parser)]
#[command(no_binary_name = true)]
struct ManifestLine {
    #[command(flatten)]
    args: SolveArgs,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub line: usize,
    pub text: String,
}

pub fn read_manifest(path: &std::path::Path) -> Result<Vec<ManifestEntry>> {
    let io = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let reader = BufReader::new(File::open(path).map_err(io)?);
    let mut entries = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(io)?;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        entries.push(ManifestEntry {
            line: i + 1,
            text: text.to_string(),
        });
    }
    Ok(entries)
}

pub fn parse_entry(entry: &ManifestEntry) -> Result<BenchSpec> {
    let parsed = ManifestLine::try_parse_from(entry.text.split_whitespace())
        .map_err(|e| Error::InvalidSpec(format!("line {}: {}", entry.line, e.to_string().trim())))?;
    BenchSpec::from_args(&parsed.args)
}

#[derive(Debug, Clone)]
pub struct SuiteResult {
    pub rows: Vec<BenchRow>,
    /// (manifest line, message) for every failed entry.
    pub errors: Vec<(usize, String)>,
}

impl SuiteResult {
    pub fn exit_code(&self) -> i32 {
        let codes: Vec<i32> = self.rows.iter().map(BenchRow::exit_code).collect();
        if codes.contains(&EXIT_ERROR) {
            EXIT_ERROR
        } else if codes.contains(&EXIT_CAPPED) {
            EXIT_CAPPED
        } else {
            EXIT_CONVERGED
        }
    }
}

/// Runs all entries, in manifest order in the output regardless of `jobs`.
pub fn run_suite(entries: &[ManifestEntry], jobs: usize) -> SuiteResult {
    let run_one = |entry: &ManifestEntry| -> (BenchRow, Option<String>) {
        let spec = match parse_entry(entry) {
            Ok(spec) => spec,
            Err(e) => {
                let row = BenchRow {
                    problem: String::new(),
                    n: None,
                    nnz: None,
                    solver: String::new(),
                    rhs: String::new(),
                    iter: None,
                    resetups: None,
                    convr_last10: None,
                    oc_avg: None,
                    wall_time_s: None,
                    converged: None,
                };
                return (row, Some(e.to_string()));
            }
        };
        match run_bench(&spec) {
            Ok((_, row)) => (row, None),
            Err(e) => (BenchRow::failed(&spec), Some(e.to_string())),
        }
    };
    let results: Vec<(BenchRow, Option<String>)> = if jobs > 1 {
        match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
            Ok(pool) => pool.install(|| entries.par_iter().map(run_one).collect()),
            Err(e) => {
                log::warn!("cannot start {jobs} workers ({e}); running sequentially");
                entries.iter().map(run_one).collect()
            }
        }
    } else {
        entries.iter().map(run_one).collect()
    };
    let mut rows = Vec::with_capacity(results.len());
    let mut errors = Vec::new();
    for (entry, (row, err)) in entries.iter().zip(results) {
        if let Some(msg) = err {
            log::error!("manifest line {}: {msg}", entry.line);
            errors.push((entry.line, msg));
        }
        rows.push(row);
    }
    SuiteResult { rows, errors }
}

/// Header, rows, then a `#`-prefixed summary unless there are no rows.
pub fn write_csv<W: Write>(out: W, suite: &SuiteResult) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_HEADER)?;
    for row in &suite.rows {
        w.serialize(row)?;
    }
    w.flush().map_err(csv::Error::from)?;
    let mut out = w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?;
    if !suite.rows.is_empty() {
        let converged = suite.rows.iter().filter(|r| r.converged == Some(true)).count();
        let capped = suite.rows.iter().filter(|r| r.converged == Some(false)).count();
        let summary = format!(
            "# entries: {}\n# converged: {converged}\n# iteration cap: {capped}\n# failed: {}\n",
            suite.rows.len(),
            suite.errors.len()
        );
        out.write_all(summary.as_bytes()).map_err(csv::Error::from)?;
        for (line, msg) in &suite.errors {
            writeln!(out, "# line {line}: {msg}").map_err(csv::Error::from)?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct JsonSuite<'a> {
    schema_version: u32,
    rows: &'a [BenchRow],
    errors: Vec<JsonError<'a>>,
}

#[derive(Serialize)]
struct JsonError<'a> {
    line: usize,
    message: &'a str,
}

#[derive(Serialize)]
struct JsonSolve<'a> {
    schema_version: u32,
    row: &'a BenchRow,
    report: &'a SolveReport,
}

pub fn write_json<W: Write>(out: W, suite: &SuiteResult) -> Result<()> {
    let doc = JsonSuite {
        schema_version: JSON_SCHEMA_VERSION,
        rows: &suite.rows,
        errors: suite
            .errors
            .iter()
            .map(|(line, message)| JsonError { line: *line, message })
            .collect(),
    };
    serde_json::to_writer_pretty(out, &doc)?;
    Ok(())
}

fn create(path: &std::path::Path) -> Result<File> {
    File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Executes a parsed command line and returns the process exit code.
pub fn execute(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Solve { args, out } => {
            let spec = BenchSpec::from_args(&args)?;
            let (report, row) = run_bench(&spec)?;
            let stdout = std::io::stdout().lock();
            match out {
                OutputFormat::Csv => write_csv(
                    stdout,
                    &SuiteResult {
                        rows: vec![row.clone()],
                        errors: Vec::new(),
                    },
                )?,
                OutputFormat::Json => {
                    let doc = JsonSolve {
                        schema_version: JSON_SCHEMA_VERSION,
                        row: &row,
                        report: &report,
                    };
                    serde_json::to_writer_pretty(stdout, &doc)?;
                    println!();
                }
            }
            Ok(row.exit_code())
        }
        Command::Bench {
            manifest,
            output,
            out,
            jobs,
        } => {
            let entries = read_manifest(&manifest)?;
            let suite = run_suite(&entries, jobs.max(1));
            let file = std::io::BufWriter::new(create(&output)?);
            match out {
                OutputFormat::Csv => write_csv(file, &suite)?,
                OutputFormat::Json => write_json(file, &suite)?,
            }
            Ok(suite.exit_code())
        }
        Command::Gen { problem, output } => {
            let l = problem.load()?;
            write_matrix_market(&output, &adjacency_from_laplacian(&l)?)?;
            Ok(EXIT_CONVERGED)
        }
    }
}

/// Entry point of the binary. Verbosity comes from `PCAMG_LOG`.
pub fn main() -> i32 {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("PCAMG_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_ERROR } else { EXIT_CONVERGED };
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}
