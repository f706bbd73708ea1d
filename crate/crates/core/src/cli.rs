//! Command-line front end.
//!
//! Exit codes: 0 success, 1 verification or runtime failure, 2 usage error.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::algo::{Algorithm, RunConfig};
use crate::bench::{self, BenchRecord, CaseConfig, CsvSink, Dimension};
use crate::element::{checksum, first_mismatch_within, length_scaled_tolerance, random_input, Element};
use crate::error::{Error, Result};
use crate::plan::{default_block_len, Dilation, FALLBACK_BLOCK_LEN};
use crate::scan::reference_scan;
use crate::simd::Simd;
use crate::topology::{CacheInfo, L2_OVERRIDE_ENV};
use crate::verify::{Matrix, Summary};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Benchmark input per thread when `--n` is not given.
const BENCH_ELEMENTS_PER_THREAD: usize = 1 << 24;
/// Threads beyond this do not grow the default benchmark input.
const BENCH_THREAD_CAP: usize = 8;

#[derive(Debug, Parser)]
#[command(name = "prefix-scan", version, about = "Scalar, SIMD and multithreaded prefix sums")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Scan random input once and print the total and checksum.
    Scan(ScanArgs),
    /// Check every algorithm against the sequential scan.
    Verify(VerifyArgs),
    /// Time one or more algorithms and emit CSV.
    Bench(BenchArgs),
    /// Time one algorithm over a grid of one parameter and emit CSV.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Elem {
    I32,
    F32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BlockLen {
    Auto,
    Fixed(usize),
}

impl FromStr for BlockLen {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "auto" {
            return Ok(BlockLen::Auto);
        }
        s.parse().map(BlockLen::Fixed).map_err(|_| format!("expected a number or `auto`, got {s:?}"))
    }
}

#[derive(Debug, Clone, Args)]
struct Tuning {
    /// Elements per thread per partitioned iteration, or `auto` for half the L2 cache.
    #[arg(long, default_value = "auto")]
    block_len: BlockLen,
    /// Relative size of thread 0's partition, in [0, 1].
    #[arg(long, default_value_t = 1.0)]
    d0: f64,
    /// Relative size of the extra last partition, in [0, 1].
    #[arg(long, default_value_t = 1.0)]
    d_last: f64,
    #[arg(long, value_enum, default_value_t = Elem::I32)]
    elem: Elem,
    /// Write the result to a separate buffer.
    #[arg(long)]
    out_of_place: bool,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Leave worker threads unpinned.
    #[arg(long)]
    no_pin: bool,
}

#[derive(Debug, Args)]
struct ScanArgs {
    #[arg(long, default_value = "SIMD")]
    algo: Algorithm,
    #[arg(long, default_value_t = 1 << 20)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    #[command(flatten)]
    tuning: Tuning,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// Largest input size; edge sizes and random sizes up to this are checked too.
    #[arg(long, default_value_t = 100_000)]
    n: usize,
    /// Thread counts for the threaded algorithms.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,8")]
    threads: Vec<usize>,
    /// Random sizes in [0, n] added to the edge sizes.
    #[arg(long, default_value_t = 10)]
    random_sizes: usize,
    /// Element type; both when omitted.
    #[arg(long, value_enum)]
    elem: Option<Elem>,
    #[arg(long, default_value_t = crate::verify::DEFAULT_VERIFY_BLOCK_LEN)]
    block_len: usize,
    #[arg(long, default_value_t = 1.0)]
    d0: f64,
    #[arg(long, default_value_t = 1.0)]
    d_last: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Print failures and the summary only.
    #[arg(long)]
    quiet: bool,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// One or more algorithm labels, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "SIMD")]
    algo: Vec<Algorithm>,
    /// Input size; defaults to 2^24 elements per thread, up to 8 threads.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    #[arg(long, default_value_t = bench::MIN_REPS)]
    reps: usize,
    /// Write CSV here instead of stdout.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[command(flatten)]
    tuning: Tuning,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long, default_value = "SIMD1-P")]
    algo: Algorithm,
    /// Parameter to vary: threads, block_len, dilation (d0) or d_last.
    #[arg(long)]
    dim: Dimension,
    /// Values: `a,b,c`, `start:end:step` or `start*factor..end`.
    #[arg(long)]
    grid: String,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    #[arg(long, default_value_t = bench::MIN_REPS)]
    reps: usize,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[command(flatten)]
    tuning: Tuning,
}

/// Parse `args` (including the program name) and run. Returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Scan(args) => scan(&args),
        Command::Verify(args) => verify(&args),
        Command::Bench(args) => run_bench(&args),
        Command::Sweep(args) => run_sweep(&args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::UnknownAlgorithm(_) => EXIT_USAGE,
        _ => EXIT_FAILURE,
    }
}

fn run_config(algo: Algorithm, threads: usize, tuning: &Tuning) -> Result<RunConfig> {
    let simd = Simd::detect();
    let config = RunConfig::new(algo)
        .simd(simd)
        .threads(threads)
        .dilation(Dilation::new(tuning.d0, tuning.d_last)?)
        .pin_threads(!tuning.no_pin)
        .block_len(resolve_block_len(tuning.block_len, threads, simd.lanes()));
    warn_oversubscribed(&config);
    Ok(config)
}

fn resolve_block_len(block_len: BlockLen, threads: usize, lanes: usize) -> usize {
    match block_len {
        BlockLen::Fixed(b) => b,
        BlockLen::Auto => {
            let cache = CacheInfo::detect();
            if cache.l2_bytes.is_none() {
                eprintln!(
                    "note: L2 cache size unknown, using {FALLBACK_BLOCK_LEN} elements per block (set {L2_OVERRIDE_ENV} to override)"
                );
            }
            default_block_len(&cache, cache.sharing_per_core(threads), lanes)
        }
    }
}

fn warn_oversubscribed(config: &RunConfig) {
    let cpus = std::thread::available_parallelism().map_or(1, |p| p.get());
    if config.effective_threads() > cpus {
        eprintln!(
            "warning: {} threads requested but only {cpus} CPUs are available; workers will share cores",
            config.effective_threads()
        );
    }
}

fn scan(args: &ScanArgs) -> Result<i32> {
    let config = run_config(args.algo, args.threads, &args.tuning)?;
    match args.tuning.elem {
        Elem::I32 => scan_typed::<u32>(&config, args),
        Elem::F32 => scan_typed::<f32>(&config, args),
    }
}

fn scan_typed<E: Element>(config: &RunConfig, args: &ScanArgs) -> Result<i32> {
    let runner = config.runner()?;
    let input = random_input::<E>(args.n, args.tuning.seed);
    let mut output = input.clone();
    let outcome =
        if args.tuning.out_of_place { runner.run_into(&input, &mut output)? } else { runner.run(&mut output)? };
    println!("algo: {}", config.algo);
    println!("n: {}", args.n);
    println!("total: {}", outcome.total);
    println!("checksum: {:#018x}", checksum(&output));
    if let Some(m) = first_mismatch_within(&reference_scan(&input), &output, length_scaled_tolerance(args.n)) {
        eprintln!("verification failed: {m}");
        return Ok(EXIT_FAILURE);
    }
    Ok(EXIT_OK)
}

fn verify(args: &VerifyArgs) -> Result<i32> {
    if args.threads.contains(&0) {
        return Err(Error::Config("thread counts must be at least 1".into()));
    }
    let simd = Simd::detect();
    let w = simd.lanes();
    let max_threads = args.threads.iter().copied().max().unwrap_or(1);
    let mut sizes = vec![0, 1, w - 1, w, w + 1, max_threads * w, args.n];
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    sizes.extend((0..args.random_sizes).map(|_| rng.random_range(0..=args.n)));
    sizes.retain(|&s| s <= args.n);
    sizes.sort_unstable();
    sizes.dedup();

    let matrix = Matrix {
        sizes,
        threads: args.threads.clone(),
        block_len: args.block_len,
        dilation: Dilation::new(args.d0, args.d_last)?,
        seed: args.seed,
        simd,
        ..Matrix::new(Vec::new(), Vec::new())
    };
    println!("backend: {simd}");
    let report = |case: &crate::verify::CaseResult| {
        if !args.quiet || !case.passed() {
            println!("{case}");
        }
    };
    let mut summary = Summary::default();
    if args.elem != Some(Elem::F32) {
        summary.merge(matrix.run::<u32>(report));
    }
    if args.elem != Some(Elem::I32) {
        summary.merge(matrix.run::<f32>(report));
    }
    println!("{}/{} cases passed", summary.passed, summary.total());
    Ok(if summary.all_passed() { EXIT_OK } else { EXIT_FAILURE })
}

fn default_n(threads: usize) -> usize {
    BENCH_ELEMENTS_PER_THREAD * threads.clamp(1, BENCH_THREAD_CAP)
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(path) => {
            Box::new(BufWriter::new(File::create(path).map_err(|source| Error::Io { path: path.to_owned(), source })?))
        }
        None => Box::new(io::stdout().lock()),
    })
}

fn note_empty(n: usize) {
    if n == 0 {
        eprintln!("note: empty input, throughput reported as 0");
    }
}

fn run_bench(args: &BenchArgs) -> Result<i32> {
    let n = args.n.unwrap_or_else(|| default_n(args.threads));
    note_empty(n);
    let mut sink = CsvSink::new(open_output(args.csv.as_deref())?);
    let mut code = EXIT_OK;
    for &algo in &args.algo {
        let mut case = CaseConfig::new(run_config(algo, args.threads, &args.tuning)?, n);
        case.out_of_place = args.tuning.out_of_place;
        case.reps = args.reps;
        case.seed = args.tuning.seed;
        let record = match args.tuning.elem {
            Elem::I32 => bench::run_case::<u32>(&case),
            Elem::F32 => bench::run_case::<f32>(&case),
        };
        match record {
            Ok(record) => sink.write(&record)?,
            Err(e) => {
                eprintln!("error: {algo}: {e}");
                code = code.max(exit_code(&e));
            }
        }
    }
    sink.finish()?;
    Ok(code)
}

fn run_sweep(args: &SweepArgs) -> Result<i32> {
    let grid = bench::parse_grid(&args.grid)?;
    let n = args.n.unwrap_or_else(|| default_n(args.threads));
    note_empty(n);
    let mut base = CaseConfig::new(run_config(args.algo, args.threads, &args.tuning)?, n);
    base.out_of_place = args.tuning.out_of_place;
    base.reps = args.reps;
    base.seed = args.tuning.seed;

    let mut sink = CsvSink::new(open_output(args.csv.as_deref())?);
    let mut write_error = None;
    let mut on_point = |value: f64, result: &Result<BenchRecord>| match result {
        Ok(record) => {
            if let Err(e) = sink.write(record) {
                write_error.get_or_insert(e);
            }
        }
        Err(e) => eprintln!("error: {}={value}: {e}", args.dim),
    };
    let outcome = match args.tuning.elem {
        Elem::I32 => bench::sweep::<u32>(args.dim, &grid, &base, &mut on_point)?,
        Elem::F32 => bench::sweep::<f32>(args.dim, &grid, &base, &mut on_point)?,
    };
    if let Some(e) = write_error {
        return Err(e);
    }
    sink.finish()?;
    Ok(outcome.failures.iter().map(|(_, e)| exit_code(e)).max().unwrap_or(EXIT_OK))
}
