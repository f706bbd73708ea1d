//! Partition layouts for the multithreaded two-pass schemes.
//!
//! Everything here is pure arithmetic: given a length, thread count,
//! scheme, dilation and lane width, decide which thread does what to which
//! span in each pass. The engine executes these layouts; tests can check
//! them without starting a thread.

use std::fmt;

use crate::error::{Error, Result};
use crate::scan::Span;
use crate::topology::CacheInfo;

/// Which pass computes the prefix sums.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pipeline {
    /// Local prefix sums first, then increment by the preceding totals.
    ScanIncrement,
    /// Totals first, then prefix sums seeded with the preceding totals.
    AccumulateScan,
}

/// How the input is split between `m` threads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    /// `m` partitions; one thread sits out one of the passes.
    Equal,
    /// `m + 1` partitions; thread 0 takes the extra one so nobody idles.
    PlusOne,
}

/// One of the four two-pass schemes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SchemeId {
    pub pipeline: Pipeline,
    pub split: Split,
}

impl SchemeId {
    pub const SCAN_INCREMENT: Self = Self::new(Pipeline::ScanIncrement, Split::Equal);
    pub const ACCUMULATE_SCAN: Self = Self::new(Pipeline::AccumulateScan, Split::Equal);
    pub const SCAN_INCREMENT_PLUS_ONE: Self = Self::new(Pipeline::ScanIncrement, Split::PlusOne);
    pub const ACCUMULATE_SCAN_PLUS_ONE: Self = Self::new(Pipeline::AccumulateScan, Split::PlusOne);

    pub const ALL: [Self; 4] =
        [Self::SCAN_INCREMENT, Self::ACCUMULATE_SCAN, Self::SCAN_INCREMENT_PLUS_ONE, Self::ACCUMULATE_SCAN_PLUS_ONE];

    pub const fn new(pipeline: Pipeline, split: Split) -> Self {
        Self { pipeline, split }
    }
}

impl fmt::Display for SchemeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let pipeline = match self.pipeline {
            Pipeline::ScanIncrement => "scan+increment",
            Pipeline::AccumulateScan => "accumulate+scan",
        };
        match self.split {
            Split::Equal => f.write_str(pipeline),
            Split::PlusOne => write!(f, "{pipeline} (+1)"),
        }
    }
}

/// Size ratios of the specially-treated partitions relative to the others.
///
/// `d0` scales thread 0's extra-work partition: the last partition for
/// scan+increment (+1), the first for accumulate+scan (+1). `d_last`
/// scales the last partition of accumulate+scan (+1), which thread 0 scans
/// from memory in pass 2. Zero removes the partition; one makes it equal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dilation {
    d0: f64,
    d_last: f64,
}

impl Default for Dilation {
    fn default() -> Self {
        Self::EQUAL
    }
}

impl Dilation {
    pub const EQUAL: Self = Self { d0: 1.0, d_last: 1.0 };

    pub fn new(d0: f64, d_last: f64) -> Result<Self> {
        for (name, d) in [("d0", d0), ("d_last", d_last)] {
            if !(0.0..=1.0).contains(&d) {
                return Err(Error::Config(format!("{name} must lie in [0, 1], got {d}")));
            }
        }
        Ok(Self { d0, d_last })
    }

    pub fn d0(&self) -> f64 {
        self.d0
    }

    pub fn d_last(&self) -> f64 {
        self.d_last
    }
}

/// What a pass does to one span.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Scan,
    Accumulate,
    Increment,
    Idle,
}

/// Work assigned to one span: a role and owning thread per pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Assignment {
    pub span: Span,
    pub pass1: Role,
    pub pass2: Role,
    pub owner1: usize,
    pub owner2: usize,
}

impl Assignment {
    pub fn role(&self, pass: Pass) -> Role {
        match pass {
            Pass::First => self.pass1,
            Pass::Second => self.pass2,
        }
    }

    pub fn owner(&self, pass: Pass) -> usize {
        match pass {
            Pass::First => self.owner1,
            Pass::Second => self.owner2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pass {
    First,
    Second,
}

impl Pass {
    pub const BOTH: [Pass; 2] = [Pass::First, Pass::Second];
}

/// The spans of one region and who does what with them.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionLayout {
    threads: usize,
    assignments: Vec<Assignment>,
}

impl PartitionLayout {
    pub fn threads(&self) -> usize {
        self.threads
    }

    pub fn assignments(&self) -> &[Assignment] {
        &self.assignments
    }

    pub fn spans(&self) -> impl Iterator<Item = Span> + '_ {
        self.assignments.iter().map(|a| a.span)
    }

    /// Whether the whole region runs as one scan on thread 0.
    pub fn is_single(&self) -> bool {
        self.assignments.len() == 1
    }

    /// Spans `thread` works on in `pass`, with their indices.
    pub fn work(&self, thread: usize, pass: Pass) -> impl Iterator<Item = (usize, &Assignment)> + '_ {
        self.assignments.iter().enumerate().filter(move |(_, a)| a.role(pass) != Role::Idle && a.owner(pass) == thread)
    }

    /// `(thread, pass)` pairs with nothing to do.
    pub fn idle_thread_passes(&self) -> Vec<(usize, Pass)> {
        Pass::BOTH
            .into_iter()
            .flat_map(|pass| (0..self.threads).map(move |t| (t, pass)))
            .filter(|&(t, pass)| self.work(t, pass).next().is_none())
            .collect()
    }

    /// The region covered, assuming contiguity.
    pub fn region(&self) -> Span {
        let start = self.assignments.first().map_or(0, |a| a.span.start);
        let end = self.assignments.last().map_or(0, |a| a.span.end());
        Span::new(start, end - start)
    }

    fn shifted(mut self, by: usize) -> Self {
        for a in &mut self.assignments {
            a.span = a.span.shifted(by);
        }
        self
    }

    /// Make every span's total available after pass 1, so the carry into
    /// the next iteration can come from the sums alone.
    fn with_all_totals(mut self) -> Self {
        for a in &mut self.assignments {
            if a.pass1 == Role::Idle && a.pass2 == Role::Scan && a.owner2 != 0 {
                a.pass1 = Role::Accumulate;
                a.owner1 = a.owner2;
            }
        }
        self
    }
}

fn align_down(x: usize, lanes: usize) -> usize {
    x / lanes * lanes
}

fn single(n: usize, threads: usize) -> PartitionLayout {
    PartitionLayout {
        threads,
        assignments: vec![Assignment {
            span: Span::new(0, n),
            pass1: Role::Scan,
            pass2: Role::Idle,
            owner1: 0,
            owner2: 0,
        }],
    }
}

fn spans_from_lengths(lengths: &[usize]) -> Vec<Span> {
    let mut start = 0;
    lengths
        .iter()
        .map(|&len| {
            let span = Span::new(start, len);
            start += len;
            span
        })
        .collect()
}

/// Lay out `n` elements for `threads` workers under `scheme`.
///
/// Every span but the last is a multiple of `lanes`; the last absorbs the
/// rounding residue. Inputs too small to give each thread a vector's worth
/// of elements, or a single thread, collapse to one span scanned by thread 0.
///
/// Partition lengths under the +1 schemes: a base length `b` is chosen so
/// that the undilated partitions plus the dilated ones fill `n`, i.e.
/// `b = floor(n / (m + d0))` for scan+increment and
/// `b = floor(n / (m - 1 + d0 + d_last))` for accumulate+scan, aligned
/// down to the lane width.
pub fn compute_layout(n: usize, threads: usize, scheme: SchemeId, dilation: Dilation, lanes: usize) -> PartitionLayout {
    assert!(threads >= 1, "need at least one thread");
    assert!(lanes >= 1);
    let m = threads;
    if m == 1 || n < m * lanes {
        return single(n, m);
    }

    let mut lengths = Vec::with_capacity(m + 1);
    let assignments = match scheme.split {
        Split::Equal => {
            let base = align_down(n / m, lanes);
            lengths.extend(std::iter::repeat_n(base, m - 1));
            lengths.push(n - base * (m - 1));
            let spans = spans_from_lengths(&lengths);
            spans
                .into_iter()
                .enumerate()
                .map(|(j, span)| {
                    let (pass1, pass2) = match scheme.pipeline {
                        Pipeline::ScanIncrement if j == 0 => (Role::Scan, Role::Idle),
                        Pipeline::ScanIncrement => (Role::Scan, Role::Increment),
                        Pipeline::AccumulateScan if j == m - 1 => (Role::Idle, Role::Scan),
                        Pipeline::AccumulateScan => (Role::Accumulate, Role::Scan),
                    };
                    Assignment { span, pass1, pass2, owner1: j, owner2: j }
                })
                .collect()
        }
        Split::PlusOne => {
            let (d0, d_last) = (dilation.d0, dilation.d_last);
            let (first, base) = match scheme.pipeline {
                Pipeline::ScanIncrement => {
                    let base = align_down((n as f64 / (m as f64 + d0)).floor() as usize, lanes);
                    (base, base)
                }
                Pipeline::AccumulateScan => {
                    let base = align_down((n as f64 / ((m - 1) as f64 + d0 + d_last)).floor() as usize, lanes);
                    (align_down((d0 * base as f64).floor() as usize, lanes), base)
                }
            };
            if base == 0 {
                return single(n, m);
            }
            lengths.push(first);
            lengths.extend(std::iter::repeat_n(base, m - 1));
            let used: usize = lengths.iter().sum();
            lengths.push(n - used);
            let spans = spans_from_lengths(&lengths);
            let inner = match scheme.pipeline {
                Pipeline::ScanIncrement => (Role::Scan, Role::Increment),
                Pipeline::AccumulateScan => (Role::Accumulate, Role::Scan),
            };
            spans
                .into_iter()
                .enumerate()
                .map(|(j, span)| {
                    let (pass1, pass2, owner1, owner2) = if j == 0 {
                        (Role::Scan, Role::Idle, 0, 0)
                    } else if j == m {
                        (Role::Idle, Role::Scan, 0, 0)
                    } else {
                        (inner.0, inner.1, j, j)
                    };
                    Assignment { span, pass1, pass2, owner1, owner2 }
                })
                .collect()
        }
    };
    PartitionLayout { threads: m, assignments }
}

/// One cache-sized step of a partitioned run.
#[derive(Debug, Clone, PartialEq)]
pub struct Iteration {
    pub region: Span,
    pub layout: PartitionLayout,
}

/// The sequence of regions a partitioned run walks through, each split
/// between the threads by its own layout.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationGrid {
    block_len: usize,
    iterations: Vec<Iteration>,
}

impl IterationGrid {
    /// Elements per thread per iteration; 0 when partitioning is disabled.
    pub fn block_len(&self) -> usize {
        self.block_len
    }

    pub fn iterations(&self) -> &[Iteration] {
        &self.iterations
    }

    pub fn len(&self) -> usize {
        self.iterations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.iterations.is_empty()
    }
}

/// Cut `[0, n)` into iterations of `block_len * threads` elements (the last
/// may be short) and lay each out with [`compute_layout`].
///
/// `block_len == 0` disables partitioning: one iteration over everything,
/// with the plain two-pass layout. Otherwise every span's total is produced
/// in pass 1 so the carry into the next iteration is known after the
/// iteration's only barrier.
pub fn compute_grid(
    n: usize,
    threads: usize,
    scheme: SchemeId,
    dilation: Dilation,
    block_len: usize,
    lanes: usize,
) -> Result<IterationGrid> {
    if block_len == 0 {
        let iterations = if n == 0 {
            Vec::new()
        } else {
            vec![Iteration { region: Span::new(0, n), layout: compute_layout(n, threads, scheme, dilation, lanes) }]
        };
        return Ok(IterationGrid { block_len, iterations });
    }
    if block_len < lanes {
        return Err(Error::Config(format!("block length {block_len} is shorter than the {lanes}-lane vector")));
    }
    let step = block_len * threads;
    let iterations = (0..n)
        .step_by(step)
        .map(|start| {
            let len = step.min(n - start);
            Iteration {
                region: Span::new(start, len),
                layout: compute_layout(len, threads, scheme, dilation, lanes).with_all_totals().shifted(start),
            }
        })
        .collect();
    Ok(IterationGrid { block_len, iterations })
}

/// Used when the L2 size cannot be determined.
pub const FALLBACK_BLOCK_LEN: usize = 128 * 1024;

const ELEMENT_BYTES: usize = 4;

/// Per-thread block length: half of L2, split between the hardware threads
/// sharing it, in elements and rounded down to whole vectors.
pub fn default_block_len(cache: &CacheInfo, threads_per_core: usize, lanes: usize) -> usize {
    let Some(l2) = cache.l2_bytes else {
        return FALLBACK_BLOCK_LEN;
    };
    let per_thread = l2 / 2 / ELEMENT_BYTES / threads_per_core.max(1);
    align_down(per_thread, lanes).max(lanes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lengths(layout: &PartitionLayout) -> Vec<usize> {
        layout.spans().map(|s| s.len).collect()
    }

    /// Contiguous, gap-free cover of `[start, start + n)`.
    fn assert_exact_cover(spans: impl IntoIterator<Item = Span>, start: usize, n: usize) {
        let mut next = start;
        for span in spans {
            assert_eq!(span.start, next, "gap or overlap at {next}");
            next = span.end();
        }
        assert_eq!(next, start + n);
    }

    #[test]
    fn equal_split_example() {
        let layout = compute_layout(100, 4, SchemeId::SCAN_INCREMENT, Dilation::EQUAL, 1);
        assert_eq!(lengths(&layout), [25, 25, 25, 25]);
    }

    #[test]
    fn plus_one_equal_dilation_example() {
        let layout = compute_layout(100, 4, SchemeId::SCAN_INCREMENT_PLUS_ONE, Dilation::EQUAL, 1);
        assert_eq!(lengths(&layout), [20; 5]);
        let layout = compute_layout(100, 4, SchemeId::ACCUMULATE_SCAN_PLUS_ONE, Dilation::EQUAL, 1);
        assert_eq!(lengths(&layout), [20; 5]);
    }

    #[test]
    fn plus_one_half_dilation_example() {
        let d = Dilation::new(0.5, 1.0).unwrap();
        // 4b + 0.5b = 100 -> b = 22 after flooring; the dilated span takes the rest.
        let layout = compute_layout(100, 4, SchemeId::SCAN_INCREMENT_PLUS_ONE, d, 1);
        let lens = lengths(&layout);
        assert_eq!(lens.iter().sum::<usize>(), 100);
        assert_eq!(&lens[..4], &[22; 4]);
        let ratio = lens[4] as f64 / 22.0;
        assert!((ratio - 0.5).abs() <= 4.5 / 22.0, "ratio {ratio}");

        let layout = compute_layout(100, 4, SchemeId::ACCUMULATE_SCAN_PLUS_ONE, d, 1);
        let lens = lengths(&layout);
        assert_eq!(lens.iter().sum::<usize>(), 100);
        assert_eq!(lens[0], 11);
        assert_eq!(&lens[1..4], &[22; 3]);
    }

    #[test]
    fn degenerate_inputs_collapse() {
        for scheme in SchemeId::ALL {
            let layout = compute_layout(10, 4, scheme, Dilation::EQUAL, 4);
            assert!(layout.is_single());
            assert_eq!(layout.assignments()[0].span, Span::new(0, 10));
            let layout = compute_layout(1000, 1, scheme, Dilation::EQUAL, 16);
            assert!(layout.is_single());
        }
    }

    #[test]
    fn idle_roles_per_scheme() {
        let n = 1 << 12;
        let idle = |scheme| compute_layout(n, 4, scheme, Dilation::EQUAL, 16).idle_thread_passes();
        assert_eq!(idle(SchemeId::SCAN_INCREMENT), [(0, Pass::Second)]);
        assert_eq!(idle(SchemeId::ACCUMULATE_SCAN), [(3, Pass::First)]);
        assert!(idle(SchemeId::SCAN_INCREMENT_PLUS_ONE).is_empty());
        assert!(idle(SchemeId::ACCUMULATE_SCAN_PLUS_ONE).is_empty());
    }

    #[test]
    fn thread_zero_takes_the_last_partition_in_pass_two() {
        for scheme in [SchemeId::SCAN_INCREMENT_PLUS_ONE, SchemeId::ACCUMULATE_SCAN_PLUS_ONE] {
            let layout = compute_layout(4096, 4, scheme, Dilation::EQUAL, 16);
            let last = layout.assignments().last().unwrap();
            assert_eq!((last.pass2, last.owner2), (Role::Scan, 0));
            assert_eq!(last.pass1, Role::Idle);
            let work: Vec<_> = layout.work(0, Pass::Second).map(|(i, _)| i).collect();
            assert_eq!(work, [4]);
        }
    }

    /// Non-empty spans and their role pairs, ignoring which thread runs them.
    fn role_profile(layout: &PartitionLayout) -> Vec<(usize, Role, Role)> {
        let mut profile: Vec<_> = layout
            .assignments()
            .iter()
            .filter(|a| !a.span.is_empty())
            .map(|a| (a.span.len, a.pass1, a.pass2))
            .collect();
        profile.sort_by_key(|&(len, r1, r2)| (len, r1 as u8, r2 as u8));
        profile
    }

    #[test]
    fn zero_dilation_collapses_to_equal() {
        let zero = Dilation::new(0.0, 1.0).unwrap();
        for (plus_one, equal) in [
            (SchemeId::SCAN_INCREMENT_PLUS_ONE, SchemeId::SCAN_INCREMENT),
            (SchemeId::ACCUMULATE_SCAN_PLUS_ONE, SchemeId::ACCUMULATE_SCAN),
        ] {
            let a = compute_layout(64 * 4 * 16, 4, plus_one, zero, 16);
            let b = compute_layout(64 * 4 * 16, 4, equal, Dilation::EQUAL, 16);
            assert_eq!(role_profile(&a), role_profile(&b), "{plus_one}");
        }
    }

    #[test]
    fn grid_examples() {
        let grid = compute_grid(4 * 1024 * 3, 3, SchemeId::SCAN_INCREMENT, Dilation::EQUAL, 1024, 16).unwrap();
        assert_eq!(grid.len(), 4);
        let grid = compute_grid(1, 4, SchemeId::ACCUMULATE_SCAN, Dilation::EQUAL, 1024, 16).unwrap();
        assert_eq!(grid.len(), 1);
        assert_eq!(grid.iterations()[0].layout.assignments()[0].span, Span::new(0, 1));
        let grid = compute_grid(5000, 4, SchemeId::ACCUMULATE_SCAN, Dilation::EQUAL, 0, 16).unwrap();
        assert_eq!(grid.len(), 1);
        assert!(compute_grid(5000, 4, SchemeId::ACCUMULATE_SCAN, Dilation::EQUAL, 8, 16).is_err());
        assert!(compute_grid(0, 4, SchemeId::ACCUMULATE_SCAN, Dilation::EQUAL, 64, 16).unwrap().is_empty());
    }

    #[test]
    fn partitioned_accumulate_scan_totals_every_span() {
        let grid = compute_grid(1 << 14, 4, SchemeId::ACCUMULATE_SCAN, Dilation::EQUAL, 1024, 16).unwrap();
        for it in grid.iterations() {
            assert!(it.layout.assignments().iter().all(|a| a.pass1 != Role::Idle));
            assert!(it.layout.idle_thread_passes().is_empty());
        }
    }

    #[test]
    fn dilation_bounds() {
        assert!(Dilation::new(-0.1, 1.0).is_err());
        assert!(Dilation::new(0.5, 1.5).is_err());
        assert!(Dilation::new(0.0, 0.0).is_ok());
    }

    #[test]
    fn default_block_len_examples() {
        let mb = |l2| CacheInfo { l2_bytes: l2, ..CacheInfo::unknown() };
        assert_eq!(default_block_len(&mb(Some(1 << 20)), 1, 16), 131_072);
        assert_eq!(default_block_len(&mb(Some(1 << 20)), 2, 16), 65_536);
        assert_eq!(default_block_len(&mb(None), 1, 16), 131_072);
    }

    fn any_scheme() -> impl Strategy<Value = SchemeId> {
        prop::sample::select(SchemeId::ALL.to_vec())
    }

    proptest! {
        #[test]
        fn layouts_cover_exactly_and_align(
            n in 0usize..200_000,
            m in 1usize..12,
            scheme in any_scheme(),
            d0 in 0.0f64..=1.0,
            d_last in 0.0f64..=1.0,
            lanes in prop::sample::select(vec![1usize, 4, 8, 16]),
        ) {
            let d = Dilation::new(d0, d_last).unwrap();
            let layout = compute_layout(n, m, scheme, d, lanes);
            assert_exact_cover(layout.spans(), 0, n);
            let count = layout.assignments().len();
            for a in &layout.assignments()[..count - 1] {
                prop_assert_eq!(a.span.len % lanes, 0);
            }
            prop_assert_eq!(&layout, &compute_layout(n, m, scheme, d, lanes));
            // Every span ends up scanned exactly once across the two passes.
            for a in layout.assignments() {
                let scans = [a.pass1, a.pass2].iter().filter(|&&r| r == Role::Scan).count();
                prop_assert_eq!(scans, 1);
            }
        }

        #[test]
        fn grids_cover_exactly(
            n in 0usize..100_000,
            m in 1usize..9,
            scheme in any_scheme(),
            block in prop::sample::select(vec![0usize, 16, 64, 1000, 4096]),
        ) {
            let grid = compute_grid(n, m, scheme, Dilation::EQUAL, block, 16).unwrap();
            assert_exact_cover(grid.iterations().iter().flat_map(|it| it.layout.spans()), 0, n);
            assert_exact_cover(grid.iterations().iter().map(|it| it.region), 0, n);
            for it in grid.iterations() {
                prop_assert_eq!(it.layout.region(), it.region);
            }
        }
    }
}
