//! The benchmarked algorithm vocabulary and a single entry point that runs
//! any of them.

use std::fmt;
use std::str::FromStr;

use crate::element::Element;
use crate::engine::{Engine, EngineConfig, Kernel, RunReport};
use crate::error::{Error, Result};
use crate::plan::{Dilation, Pipeline, SchemeId, Split};
use crate::scan::{self, InPlace, OutOfPlace, ScanIo};
use crate::simd::{PassOrder, Simd};

/// Where the local prefix sums are computed in the multithreaded schemes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScanPass {
    /// Scan in pass 1, increment in pass 2.
    First,
    /// Accumulate in pass 1, scan in pass 2.
    Second,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Scalar,
    Simd,
    SimdV1,
    SimdV2,
    SimdTree,
    Threaded { simd: bool, scan_pass: ScanPass, partitioned: bool },
}

impl Algorithm {
    pub const ALL: [Algorithm; 13] = [
        Algorithm::Scalar,
        Algorithm::Simd,
        Algorithm::SimdV1,
        Algorithm::SimdV2,
        Algorithm::SimdTree,
        Algorithm::threaded(false, ScanPass::First, false),
        Algorithm::threaded(false, ScanPass::Second, false),
        Algorithm::threaded(true, ScanPass::First, false),
        Algorithm::threaded(true, ScanPass::Second, false),
        Algorithm::threaded(false, ScanPass::First, true),
        Algorithm::threaded(false, ScanPass::Second, true),
        Algorithm::threaded(true, ScanPass::First, true),
        Algorithm::threaded(true, ScanPass::Second, true),
    ];

    pub const fn threaded(simd: bool, scan_pass: ScanPass, partitioned: bool) -> Self {
        Algorithm::Threaded { simd, scan_pass, partitioned }
    }

    pub fn label(&self) -> &'static str {
        match *self {
            Algorithm::Scalar => "Scalar",
            Algorithm::Simd => "SIMD",
            Algorithm::SimdV1 => "SIMD-V1",
            Algorithm::SimdV2 => "SIMD-V2",
            Algorithm::SimdTree => "SIMD-T",
            Algorithm::Threaded { simd, scan_pass, partitioned } => match (simd, scan_pass, partitioned) {
                (false, ScanPass::First, false) => "Scalar1",
                (false, ScanPass::Second, false) => "Scalar2",
                (true, ScanPass::First, false) => "SIMD1",
                (true, ScanPass::Second, false) => "SIMD2",
                (false, ScanPass::First, true) => "Scalar1-P",
                (false, ScanPass::Second, true) => "Scalar2-P",
                (true, ScanPass::First, true) => "SIMD1-P",
                (true, ScanPass::Second, true) => "SIMD2-P",
            },
        }
    }

    pub fn is_threaded(&self) -> bool {
        matches!(self, Algorithm::Threaded { .. })
    }

    /// Whether `block_len` changes what the algorithm does.
    pub fn uses_block_len(&self) -> bool {
        match self {
            Algorithm::SimdV1 | Algorithm::SimdV2 | Algorithm::SimdTree => true,
            Algorithm::Threaded { partitioned, .. } => *partitioned,
            Algorithm::Scalar | Algorithm::Simd => false,
        }
    }

    /// Whether the dilation factors change what the algorithm does.
    pub fn uses_dilation(&self) -> bool {
        self.is_threaded()
    }

    /// The multithreaded scheme behind a threaded label.
    pub fn scheme(&self) -> Option<SchemeId> {
        match self {
            Algorithm::Threaded { scan_pass, .. } => Some(SchemeId::new(
                match scan_pass {
                    ScanPass::First => Pipeline::ScanIncrement,
                    ScanPass::Second => Pipeline::AccumulateScan,
                },
                Split::PlusOne,
            )),
            _ => None,
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::UnknownAlgorithm(s.to_owned()))
    }
}

/// Everything needed to run one algorithm, apart from the data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig {
    pub algo: Algorithm,
    pub simd: Simd,
    pub threads: usize,
    /// Partition length; ignored by algorithms that do not partition.
    pub block_len: usize,
    pub dilation: Dilation,
    pub pin_threads: bool,
}

impl RunConfig {
    pub fn new(algo: Algorithm) -> Self {
        Self { algo, simd: Simd::detect(), threads: 1, block_len: 0, dilation: Dilation::EQUAL, pin_threads: true }
    }

    pub fn threads(mut self, threads: usize) -> Self {
        self.threads = threads;
        self
    }

    pub fn block_len(mut self, block_len: usize) -> Self {
        self.block_len = block_len;
        self
    }

    pub fn dilation(mut self, dilation: Dilation) -> Self {
        self.dilation = dilation;
        self
    }

    pub fn simd(mut self, simd: Simd) -> Self {
        self.simd = simd;
        self
    }

    pub fn pin_threads(mut self, pin: bool) -> Self {
        self.pin_threads = pin;
        self
    }

    /// Threads the algorithm actually uses.
    pub fn effective_threads(&self) -> usize {
        if self.algo.is_threaded() {
            self.threads
        } else {
            1
        }
    }

    /// Block length the algorithm actually uses.
    pub fn effective_block_len(&self) -> usize {
        if self.algo.uses_block_len() {
            self.block_len
        } else {
            0
        }
    }

    pub fn effective_dilation(&self) -> Dilation {
        if self.algo.uses_dilation() {
            self.dilation
        } else {
            Dilation::EQUAL
        }
    }

    fn engine(&self) -> Result<Option<Engine>> {
        let Algorithm::Threaded { simd, .. } = self.algo else {
            return Ok(None);
        };
        let kernel = if simd { Kernel::Simd(self.simd) } else { Kernel::Scalar };
        let scheme = self.algo.scheme().expect("threaded algorithms have a scheme");
        let config = EngineConfig::new(kernel, scheme, self.threads)
            .dilation(self.dilation)
            .block_len(self.effective_block_len())
            .pin_threads(self.pin_threads);
        Engine::new(config).map(Some)
    }

    /// Reusable runner; builds the engine once.
    pub fn runner(&self) -> Result<Runner> {
        if self.algo.is_threaded() {
            if self.threads == 0 {
                return Err(Error::Config("thread count must be at least 1".into()));
            }
            if self.algo.uses_block_len() && self.block_len == 0 {
                return Err(Error::Config(format!("{} needs a non-zero block length", self.algo)));
            }
        }
        Ok(Runner { config: *self, engine: self.engine()? })
    }
}

/// Result of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome<E> {
    pub total: E,
    /// Engine statistics, for threaded algorithms.
    pub report: Option<RunReport<E>>,
}

pub struct Runner {
    config: RunConfig,
    engine: Option<Engine>,
}

impl Runner {
    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    /// Inclusive scan of `data` in place.
    pub fn run<E: Element>(&self, data: &mut [E]) -> Result<Outcome<E>> {
        match &self.engine {
            Some(engine) => engine.run(data).map(Outcome::from),
            None => Ok(self.single(&mut InPlace(data))),
        }
    }

    /// Inclusive scan of `src` into `dst`.
    pub fn run_into<E: Element>(&self, src: &[E], dst: &mut [E]) -> Result<Outcome<E>> {
        if src.len() != dst.len() {
            return Err(Error::Config(format!("source has {} elements but destination has {}", src.len(), dst.len())));
        }
        match &self.engine {
            Some(engine) => engine.run_into(src, dst).map(Outcome::from),
            None => Ok(self.single(&mut OutOfPlace::new(src, dst))),
        }
    }

    fn single<E: Element, Io: ScanIo<E>>(&self, io: &mut Io) -> Outcome<E> {
        let simd = self.config.simd;
        let block_len = self.config.block_len;
        let total = match self.config.algo {
            Algorithm::Scalar => scan::inclusive_scan_io(io, E::ZERO),
            Algorithm::Simd => simd.horizontal_scan_io(io, E::ZERO),
            Algorithm::SimdV1 => simd.vertical_scan_io(io, PassOrder::ScanFirst, block_len, E::ZERO),
            Algorithm::SimdV2 => simd.vertical_scan_io(io, PassOrder::AccumulateFirst, block_len, E::ZERO),
            Algorithm::SimdTree => simd.tree_scan_io(io, block_len, E::ZERO),
            Algorithm::Threaded { .. } => unreachable!("threaded algorithms run on the engine"),
        };
        Outcome { total, report: None }
    }
}

impl<E: Copy> From<RunReport<E>> for Outcome<E> {
    fn from(report: RunReport<E>) -> Self {
        Outcome { total: report.total, report: Some(report) }
    }
}
