//! Multi-threaded two-pass and cache-partitioned scans.
//!
//! Workers are spawned once per run and walk the same [`IterationGrid`].
//! Each iteration is pass 1 (scan or accumulate a span, publish its total),
//! one barrier, then pass 2 (increment or scan a span with its offset).
//! Thread 0 carries the running total from one iteration into the next, so
//! pass 1 of iteration `k + 1` may overlap pass 2 of iteration `k` on other
//! threads; the sums ledger is double-buffered to allow that.

mod affinity;
mod barrier;
mod ledger;

use std::fmt;
use std::marker::PhantomData;
use std::panic::{self, AssertUnwindSafe};
use std::thread;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use barrier::SpinBarrier;

use crate::element::Element;
use crate::error::{Error, Result};
use crate::plan::{compute_grid, Dilation, IterationGrid, Pass, Role, SchemeId};
use crate::scan::{self, InPlace, OutOfPlace, ScanIo, Span};
use crate::simd::Simd;
use affinity::Pinning;
use ledger::SumsLedger;

/// Per-span arithmetic used by the workers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kernel {
    Scalar,
    /// Horizontal vector kernels.
    Simd(Simd),
}

impl Kernel {
    /// Alignment unit for span boundaries.
    pub fn lanes(&self) -> usize {
        match self {
            Kernel::Scalar => 1,
            Kernel::Simd(simd) => simd.lanes(),
        }
    }

    pub fn scan<E: Element, Io: ScanIo<E>>(&self, io: &mut Io, offset: E) -> E {
        match self {
            Kernel::Scalar => scan::inclusive_scan_io(io, offset),
            Kernel::Simd(simd) => simd.horizontal_scan_io(io, offset),
        }
    }

    pub fn accumulate<E: Element>(&self, data: &[E]) -> E {
        match self {
            Kernel::Scalar => scan::accumulate(data),
            Kernel::Simd(simd) => simd.accumulate(data),
        }
    }

    pub fn increment<E: Element>(&self, data: &mut [E], offset: E) {
        match self {
            Kernel::Scalar => scan::increment(data, offset),
            Kernel::Simd(simd) => simd.increment(data, offset),
        }
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Kernel::Scalar => f.write_str("scalar"),
            Kernel::Simd(simd) => write!(f, "simd ({simd})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EngineConfig {
    pub kernel: Kernel,
    pub scheme: SchemeId,
    pub dilation: Dilation,
    pub threads: usize,
    /// Elements per thread per iteration; 0 runs one unpartitioned iteration.
    pub block_len: usize,
    /// Pin worker `t` to the `t`-th allowed CPU.
    pub pin_threads: bool,
}

impl EngineConfig {
    pub fn new(kernel: Kernel, scheme: SchemeId, threads: usize) -> Self {
        Self { kernel, scheme, dilation: Dilation::EQUAL, threads, block_len: 0, pin_threads: true }
    }

    pub fn dilation(mut self, dilation: Dilation) -> Self {
        self.dilation = dilation;
        self
    }

    pub fn block_len(mut self, block_len: usize) -> Self {
        self.block_len = block_len;
        self
    }

    pub fn pin_threads(mut self, pin: bool) -> Self {
        self.pin_threads = pin;
        self
    }
}

/// Random delays injected around each pass, to shake out ordering bugs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Jitter {
    pub seed: u64,
    pub max_delay: Duration,
}

impl Jitter {
    fn source(&self, thread: usize) -> JitterSource {
        let seed = self.seed ^ (thread as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        JitterSource { rng: ChaCha8Rng::seed_from_u64(seed), max_delay: self.max_delay }
    }
}

struct JitterSource {
    rng: ChaCha8Rng,
    max_delay: Duration,
}

impl JitterSource {
    fn perturb(&mut self) {
        match self.rng.random_range(0..8) {
            0 => {
                let micros = self.rng.random_range(0..=self.max_delay.as_micros() as u64);
                thread::sleep(Duration::from_micros(micros));
            }
            1 | 2 => thread::yield_now(),
            _ => {}
        }
    }
}

/// Work one thread did in one pass.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PassWork {
    pub spans: usize,
    pub elements: usize,
}

/// Per-thread work, indexed by pass.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ThreadWork {
    pub passes: [PassWork; 2],
}

impl ThreadWork {
    pub fn pass(&self, pass: Pass) -> PassWork {
        self.passes[pass_index(pass)]
    }

    fn record(&mut self, pass: Pass, span: Span) {
        let w = &mut self.passes[pass_index(pass)];
        w.spans += 1;
        w.elements += span.len;
    }
}

fn pass_index(pass: Pass) -> usize {
    match pass {
        Pass::First => 0,
        Pass::Second => 1,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport<E> {
    /// Last element of the output (zero for empty input).
    pub total: E,
    pub iterations: usize,
    /// Completed barrier phases.
    pub barrier_phases: usize,
    pub work: Vec<ThreadWork>,
    /// More workers than CPUs available to the process.
    pub oversubscribed: bool,
}

pub struct Engine {
    config: EngineConfig,
    jitter: Option<Jitter>,
}

impl Engine {
    pub fn new(config: EngineConfig) -> Result<Self> {
        if config.threads == 0 {
            return Err(Error::Config("thread count must be at least 1".into()));
        }
        Ok(Self { config, jitter: None })
    }

    pub fn with_jitter(mut self, jitter: Jitter) -> Self {
        self.jitter = Some(jitter);
        self
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    /// The iteration grid a run over `n` elements would use.
    pub fn grid(&self, n: usize) -> Result<IterationGrid> {
        let c = &self.config;
        compute_grid(n, c.threads, c.scheme, c.dilation, c.block_len, c.kernel.lanes())
    }

    /// Inclusive scan of `data` in place.
    pub fn run<E: Element>(&self, data: &mut [E]) -> Result<RunReport<E>> {
        let buffers = SharedInPlace { ptr: data.as_mut_ptr(), len: data.len(), _borrow: PhantomData };
        self.execute(&buffers)
    }

    /// Inclusive scan of `src` into `dst`, leaving `src` untouched.
    pub fn run_into<E: Element>(&self, src: &[E], dst: &mut [E]) -> Result<RunReport<E>> {
        if src.len() != dst.len() {
            return Err(Error::Config(format!("source has {} elements but destination has {}", src.len(), dst.len())));
        }
        // Accumulate+scan reads the input twice; keep it out of the output.
        let buffers =
            SharedOutOfPlace { src: src.as_ptr(), dst: dst.as_mut_ptr(), len: src.len(), _borrow: PhantomData };
        self.execute(&buffers)
    }

    fn execute<E: Element, B: Buffers<E>>(&self, buffers: &B) -> Result<RunReport<E>> {
        let threads = self.config.threads;
        let grid = self.grid(buffers.len())?;
        let slots = grid.iterations().iter().map(|it| it.layout.assignments().len()).max().unwrap_or(0);
        let ledger = SumsLedger::<E>::new(slots);
        let barrier = SpinBarrier::new(threads);
        let pinning = Pinning::new(self.config.pin_threads && threads > 1);
        let shared = Shared { grid: &grid, ledger: &ledger, barrier: &barrier, buffers, kernel: self.config.kernel };
        let run = |t: usize| {
            pinning.pin(t);
            let jitter = self.jitter.map(|j| j.source(t));
            panic::catch_unwind(AssertUnwindSafe(|| shared.worker(t, jitter))).unwrap_or_else(|cause| {
                barrier.poison();
                panic::resume_unwind(cause)
            })
        };
        let work = if threads == 1 {
            vec![run(0)]
        } else {
            let run = &run;
            thread::scope(|s| {
                let handles: Vec<_> = (1..threads).map(|t| s.spawn(move || run(t))).collect();
                let mut work = vec![run(0)];
                work.extend(handles.into_iter().map(|h| h.join().unwrap_or_else(|cause| panic::resume_unwind(cause))));
                work
            })
        };
        drop(pinning);
        let n = buffers.len();
        let total = if n == 0 {
            E::ZERO
        } else {
            // SAFETY: all workers have joined.
            unsafe { buffers.output(Span::new(n - 1, 1))[0] }
        };
        Ok(RunReport {
            total,
            iterations: grid.len(),
            barrier_phases: barrier.generation(),
            work,
            oversubscribed: threads > thread::available_parallelism().map_or(1, |p| p.get()),
        })
    }
}

struct Shared<'a, E, B> {
    grid: &'a IterationGrid,
    ledger: &'a SumsLedger<E>,
    barrier: &'a SpinBarrier,
    buffers: &'a B,
    kernel: Kernel,
}

impl<E: Element, B: Buffers<E>> Shared<'_, E, B> {
    fn worker(&self, t: usize, mut jitter: Option<JitterSource>) -> ThreadWork {
        let mut perturb = || {
            if let Some(j) = jitter.as_mut() {
                j.perturb();
            }
        };
        let kernel = self.kernel;
        let mut work = ThreadWork::default();
        // Running total before the current region; maintained by thread 0.
        let mut base = E::ZERO;
        let mut offsets: Vec<E> = Vec::new();
        let iterations = self.grid.iterations();

        for (k, it) in iterations.iter().enumerate() {
            let view = self.ledger.for_iteration(k);
            let layout = &it.layout;
            let assignments = layout.assignments();
            let last = assignments.len() - 1;
            if t == 0 {
                view.set_base(base);
            }

            perturb();
            for (j, a) in layout.work(t, Pass::First) {
                // SAFETY: spans of one pass are disjoint and owned by one thread.
                let total = unsafe {
                    match a.pass1 {
                        Role::Scan => {
                            debug_assert!(j != 0 || t == 0, "span 0 is seeded by thread 0");
                            let seed = if j == 0 { base } else { E::ZERO };
                            kernel.scan(&mut self.buffers.io(a.span), seed)
                        }
                        Role::Accumulate => kernel.accumulate(self.buffers.input(a.span)),
                        role => unreachable!("{role:?} in pass 1"),
                    }
                };
                view.set_total(j, total);
                work.record(Pass::First, a.span);
            }

            perturb();
            self.barrier.wait();

            // offsets[j] = everything before span j; span 0's pass-1 scan, if
            // any, was already seeded with the base.
            let needed = layout
                .work(t, Pass::Second)
                .map(|(j, _)| j + 1)
                .max()
                .unwrap_or(0)
                .max(if t == 0 && k + 1 < iterations.len() { last + 2 } else { 0 });
            let seeded = assignments[0].pass1 == Role::Scan;
            offsets.clear();
            if needed > 0 {
                offsets.push(view.base());
                for j in 1..needed {
                    let before = if j == 1 && seeded { view.total(0) } else { offsets[j - 1].add(view.total(j - 1)) };
                    offsets.push(before);
                }
            }

            perturb();
            let mut last_scanned = None;
            for (j, a) in layout.work(t, Pass::Second) {
                // SAFETY: as in pass 1; this span's pass-1 owner finished before the barrier.
                unsafe {
                    match a.pass2 {
                        Role::Increment => kernel.increment(self.buffers.output(a.span), offsets[j]),
                        Role::Scan => {
                            let end = kernel.scan(&mut self.buffers.io(a.span), offsets[j]);
                            if j == last {
                                last_scanned = Some(end);
                            }
                        }
                        role => unreachable!("{role:?} in pass 2"),
                    }
                }
                work.record(Pass::Second, a.span);
            }

            if t == 0 && k + 1 < iterations.len() {
                base = last_scanned.unwrap_or_else(|| offsets[last + 1]);
            }
        }
        work
    }
}

/// Raw access to the scan's input and output, shared by all workers.
///
/// # Safety
///
/// Callers must not access overlapping spans from two threads at once.
/// The plan guarantees that: spans within a pass are disjoint, and a
/// barrier separates the two passes over the same region.
unsafe trait Buffers<E: Element>: Sync {
    type Io<'a>: ScanIo<E>
    where
        Self: 'a;

    fn len(&self) -> usize;

    unsafe fn io(&self, span: Span) -> Self::Io<'_>;

    unsafe fn input(&self, span: Span) -> &[E];

    #[allow(clippy::mut_from_ref)]
    unsafe fn output(&self, span: Span) -> &mut [E];
}

struct SharedInPlace<'a, E> {
    ptr: *mut E,
    len: usize,
    _borrow: PhantomData<&'a mut [E]>,
}

// SAFETY: access is partitioned into disjoint spans; see `Buffers`.
unsafe impl<E: Send> Sync for SharedInPlace<'_, E> {}

unsafe impl<E: Element> Buffers<E> for SharedInPlace<'_, E> {
    type Io<'b>
        = InPlace<'b, E>
    where
        Self: 'b;

    fn len(&self) -> usize {
        self.len
    }

    unsafe fn io(&self, span: Span) -> InPlace<'_, E> {
        InPlace(unsafe { self.output(span) })
    }

    unsafe fn input(&self, span: Span) -> &[E] {
        assert!(span.end() <= self.len);
        unsafe { std::slice::from_raw_parts(self.ptr.add(span.start), span.len) }
    }

    unsafe fn output(&self, span: Span) -> &mut [E] {
        assert!(span.end() <= self.len);
        unsafe { std::slice::from_raw_parts_mut(self.ptr.add(span.start), span.len) }
    }
}

struct SharedOutOfPlace<'a, E> {
    src: *const E,
    dst: *mut E,
    len: usize,
    _borrow: PhantomData<(&'a [E], &'a mut [E])>,
}

// SAFETY: the source is only read; the destination is partitioned as above.
unsafe impl<E: Send + Sync> Sync for SharedOutOfPlace<'_, E> {}

unsafe impl<E: Element> Buffers<E> for SharedOutOfPlace<'_, E> {
    type Io<'b>
        = OutOfPlace<'b, E>
    where
        Self: 'b;

    fn len(&self) -> usize {
        self.len
    }

    unsafe fn io(&self, span: Span) -> OutOfPlace<'_, E> {
        unsafe { OutOfPlace::new(self.input(span), self.output(span)) }
    }

    unsafe fn input(&self, span: Span) -> &[E] {
        assert!(span.end() <= self.len);
        unsafe { std::slice::from_raw_parts(self.src.add(span.start), span.len) }
    }

    unsafe fn output(&self, span: Span) -> &mut [E] {
        assert!(span.end() <= self.len);
        unsafe { std::slice::from_raw_parts_mut(self.dst.add(span.start), span.len) }
    }
}

#[cfg(test)]
mod tests;
