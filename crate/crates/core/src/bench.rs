//! Timing harness: verified, repeated runs summarized as CSV rows.

use std::fmt;
use std::io;
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::algo::RunConfig;
use crate::element::{checksum, first_mismatch_within, length_scaled_tolerance, random_input, Element};
use crate::error::{Error, Result};
use crate::plan::Dilation;
use crate::scan::reference_scan;

pub const MIN_REPS: usize = 5;

/// CSV column order.
pub const CSV_HEADER: [&str; 12] = [
    "algo",
    "elem_type",
    "n",
    "threads",
    "block_len",
    "d0",
    "d_last",
    "out_of_place",
    "reps",
    "median_ns",
    "throughput_eps",
    "checksum",
];

/// One measured configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub algo: String,
    pub elem_type: String,
    pub n: usize,
    pub threads: usize,
    pub block_len: usize,
    pub d0: f64,
    pub d_last: f64,
    pub out_of_place: bool,
    pub reps: usize,
    pub median_ns: u64,
    /// Elements per second at the median time; 0 for empty input.
    pub throughput_eps: f64,
    /// FNV-1a of the output.
    pub checksum: u64,
    #[serde(skip)]
    pub rep_ns: Vec<u64>,
}

/// What to measure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaseConfig {
    pub run: RunConfig,
    pub n: usize,
    pub out_of_place: bool,
    pub reps: usize,
    pub seed: u64,
}

impl CaseConfig {
    pub fn new(run: RunConfig, n: usize) -> Self {
        Self { run, n, out_of_place: false, reps: MIN_REPS, seed: 0 }
    }
}

/// Median of the samples; the mean of the middle two for even counts.
pub fn median(samples: &[Duration]) -> Duration {
    assert!(!samples.is_empty(), "median of no samples");
    let mut sorted = samples.to_vec();
    sorted.sort_unstable();
    let mid = sorted.len() / 2;
    if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        (sorted[mid - 1] + sorted[mid]) / 2
    }
}

/// Time `reps` calls of `rep`, after one untimed warm-up call (index `None`).
/// `rep` returns the duration it measured itself.
pub fn collect_timings(reps: usize, mut rep: impl FnMut(Option<usize>) -> Result<Duration>) -> Result<Vec<Duration>> {
    rep(None)?;
    (0..reps).map(|i| rep(Some(i))).collect()
}

/// Verify once, then time `case.reps` runs.
///
/// Floats are verified with [`length_scaled_tolerance`], since long
/// sequential `f32` scans drift from the exact sums on their own.
///
/// Each rep's output checksum must equal the verified output's; for
/// integers that is also the oracle checksum.
pub fn run_case<E: Element>(case: &CaseConfig) -> Result<BenchRecord> {
    if case.reps < MIN_REPS {
        return Err(Error::Config(format!("at least {MIN_REPS} repetitions are needed, got {}", case.reps)));
    }
    let label = case.run.algo.label();
    let runner = case.run.runner()?;
    let input = random_input::<E>(case.n, case.seed);
    let expected = reference_scan(&input);
    let mut output = vec![E::ZERO; case.n];

    let mut verified = None;
    let times = collect_timings(case.reps, |rep| {
        if !case.out_of_place {
            output.copy_from_slice(&input);
        }
        let start = Instant::now();
        if case.out_of_place {
            runner.run_into(&input, &mut output)?;
        } else {
            runner.run(&mut output)?;
        }
        let elapsed = start.elapsed();
        let sum = checksum(&output);
        match (rep, verified) {
            (None, _) => {
                if let Some(m) = first_mismatch_within(&expected, &output, length_scaled_tolerance(case.n)) {
                    return Err(Error::Verification { algorithm: label.to_owned(), detail: m.to_string() });
                }
                verified = Some(sum);
            }
            (Some(i), Some(want)) if want != sum => {
                return Err(Error::Verification {
                    algorithm: label.to_owned(),
                    detail: format!("rep {i} checksum {sum:#018x} differs from verified {want:#018x}"),
                });
            }
            _ => {}
        }
        Ok(elapsed)
    })?;

    let med = median(&times);
    let dilation = case.run.effective_dilation();
    let throughput = if case.n == 0 || med.is_zero() { 0.0 } else { case.n as f64 / med.as_secs_f64() };
    Ok(BenchRecord {
        algo: label.to_owned(),
        elem_type: E::NAME.to_owned(),
        n: case.n,
        threads: case.run.effective_threads(),
        block_len: case.run.effective_block_len(),
        d0: dilation.d0(),
        d_last: dilation.d_last(),
        out_of_place: case.out_of_place,
        reps: case.reps,
        median_ns: duration_ns(med),
        throughput_eps: throughput,
        checksum: verified.expect("warm-up always runs"),
        rep_ns: times.into_iter().map(duration_ns).collect(),
    })
}

fn duration_ns(d: Duration) -> u64 {
    u64::try_from(d.as_nanos()).unwrap_or(u64::MAX)
}

/// Which parameter a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    Threads,
    BlockLen,
    /// Thread 0's dilation factor.
    Dilation,
    /// The extra last partition's dilation factor.
    DilationLast,
}

impl FromStr for Dimension {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "threads" => Ok(Dimension::Threads),
            "block_len" | "block-len" => Ok(Dimension::BlockLen),
            "dilation" | "d0" => Ok(Dimension::Dilation),
            "d_last" | "d-last" => Ok(Dimension::DilationLast),
            _ => Err(Error::Config(format!(
                "unknown sweep dimension {s:?} (expected threads, block_len, dilation or d_last)"
            ))),
        }
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Dimension::Threads => "threads",
            Dimension::BlockLen => "block_len",
            Dimension::Dilation => "dilation",
            Dimension::DilationLast => "d_last",
        })
    }
}

impl Dimension {
    /// `base` with this dimension set to `value`.
    pub fn apply(&self, base: &CaseConfig, value: f64) -> Result<CaseConfig> {
        let mut case = *base;
        let whole = || {
            if value >= 0.0 && value.fract() == 0.0 {
                Ok(value as usize)
            } else {
                Err(Error::Config(format!("{self} must be a non-negative integer, got {value}")))
            }
        };
        match self {
            Dimension::Threads => case.run.threads = whole()?,
            Dimension::BlockLen => case.run.block_len = whole()?,
            Dimension::Dilation => case.run.dilation = Dilation::new(value, base.run.dilation.d_last())?,
            Dimension::DilationLast => case.run.dilation = Dilation::new(base.run.dilation.d0(), value)?,
        }
        Ok(case)
    }
}

/// Records and failed points of a sweep, in grid order.
#[derive(Debug, Default)]
pub struct SweepOutcome {
    pub records: Vec<BenchRecord>,
    pub failures: Vec<(f64, Error)>,
}

/// One record per grid point, all on the same input. A failing point is
/// recorded and the sweep moves on.
pub fn sweep<E: Element>(
    dimension: Dimension,
    grid: &[f64],
    base: &CaseConfig,
    mut on_point: impl FnMut(f64, &Result<BenchRecord>),
) -> Result<SweepOutcome> {
    if grid.is_empty() {
        return Err(Error::Config("sweep grid is empty".into()));
    }
    let mut outcome = SweepOutcome::default();
    for &value in grid {
        let result = dimension.apply(base, value).and_then(|case| run_case::<E>(&case));
        on_point(value, &result);
        match result {
            Ok(record) => outcome.records.push(record),
            Err(e) => outcome.failures.push((value, e)),
        }
    }
    Ok(outcome)
}

/// Parse a grid like `0,0.1,0.5` or `0:1:0.1` (start:end:step, inclusive),
/// or `8192*2..8388608` (geometric, inclusive).
pub fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let bad = || Error::Config(format!("cannot parse grid {text:?}"));
    let number = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
    let values = if let Some((lo, rest)) = text.split_once('*') {
        let (factor, hi) = rest.split_once("..").ok_or_else(bad)?;
        let (mut x, factor, hi) = (number(lo)?, number(factor)?, number(hi)?);
        if x <= 0.0 || factor <= 1.0 {
            return Err(bad());
        }
        let mut values = Vec::new();
        while x <= hi * (1.0 + 1e-9) {
            values.push(x);
            x *= factor;
        }
        values
    } else if text.contains(':') {
        let parts: Vec<_> = text.split(':').map(number).collect::<Result<_>>()?;
        let [lo, hi, step] = parts[..] else { return Err(bad()) };
        if step <= 0.0 {
            return Err(bad());
        }
        let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
        // Round away accumulated binary noise so 0.1 steps print cleanly.
        (0..count).map(|i| ((lo + i as f64 * step) * 1e9).round() / 1e9).collect()
    } else {
        text.split(',').map(number).collect::<Result<_>>()?
    };
    if values.is_empty() {
        return Err(bad());
    }
    Ok(values)
}

/// Write a header row then one row per record.
pub fn write_csv<W: io::Write>(writer: W, records: &[BenchRecord]) -> Result<()> {
    let mut csv = csv_writer(writer);
    if records.is_empty() {
        csv.write_record(CSV_HEADER)?;
    }
    for record in records {
        csv.serialize(record)?;
    }
    csv.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Incremental CSV output, so long sweeps leave partial results behind.
pub struct CsvSink<W: io::Write> {
    csv: csv::Writer<W>,
    wrote_header: bool,
}

impl<W: io::Write> CsvSink<W> {
    pub fn new(writer: W) -> Self {
        Self { csv: csv_writer(writer), wrote_header: false }
    }

    pub fn write(&mut self, record: &BenchRecord) -> Result<()> {
        self.wrote_header = true;
        self.csv.serialize(record)?;
        self.csv.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    /// Ensure at least the header was written.
    pub fn finish(mut self) -> Result<()> {
        if !self.wrote_header {
            self.csv.write_record(CSV_HEADER)?;
        }
        self.csv.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

fn csv_writer<W: io::Write>(writer: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer)
}

/// Parse CSV produced by [`write_csv`], checking the header.
pub fn read_csv<R: io::Read>(reader: R) -> Result<Vec<BenchRecord>> {
    let mut csv = csv::Reader::from_reader(reader);
    let header = csv.headers()?.clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(Error::Config(format!("unexpected CSV header: {}", header.iter().collect::<Vec<_>>().join(","))));
    }
    csv.deserialize().map(|r| r.map_err(Error::from)).collect()
}
