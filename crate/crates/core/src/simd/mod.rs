//! Data-parallel scan kernels over `w`-lane vectors of 32-bit elements.
//!
//! Three families:
//!
//! * **horizontal**: in-register prefix sum of each block in `log2(w)`
//!   shift-add rounds, with the block's last lane broadcast as the carry
//!   into the next block. One pass over memory.
//! * **vertical**: the region is split into `w` chunks and lane `i` scans
//!   chunk `i` using strided gather/scatter. Needs a second pass to add
//!   the preceding chunks' totals, in either pass order.
//! * **tree**: up-sweep / down-sweep over an implicit balanced tree with
//!   strided gather/scatter at every level.
//!
//! [`Simd`] picks a lane width and backend. The reference width is 16;
//! widths 4 and 8 run on the portable [`Block`] vector so the algorithms
//! are exercised at every width on any hardware. With AVX-512 present the
//! 16-lane kernels use native registers, gathers and scatters.

#[cfg(target_arch = "x86_64")]
pub(crate) mod avx512;
mod horizontal;
mod tree;
mod vector;
mod vertical;

use std::fmt;
use std::sync::OnceLock;

pub use tree::is_tree_len;
pub use vector::{Block, Vector};
pub use vertical::{chunk_offsets, chunk_seeds, MAX_REGION};

use crate::element::Element;
use crate::error::{Error, Result};
use crate::scan::{InPlace, OutOfPlace, ScanIo};

/// Lane count of the vectors used by the kernels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Width {
    W4,
    W8,
    W16,
}

impl Width {
    pub const ALL: [Width; 3] = [Width::W4, Width::W8, Width::W16];

    pub const fn lanes(self) -> usize {
        match self {
            Width::W4 => 4,
            Width::W8 => 8,
            Width::W16 => 16,
        }
    }

    pub fn from_lanes(lanes: usize) -> Option<Self> {
        match lanes {
            4 => Some(Width::W4),
            8 => Some(Width::W8),
            16 => Some(Width::W16),
            _ => None,
        }
    }
}

/// Which pass computes the prefix sums in the vertical kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PassOrder {
    /// Pass 1 scans each chunk, pass 2 increments by preceding totals.
    ScanFirst,
    /// Pass 1 only totals each chunk, pass 2 scans with per-chunk seeds.
    AccumulateFirst,
}

/// In-register inclusive scan of one vector.
pub fn vector_inclusive_scan<E: Element, const W: usize>(v: Block<E, W>) -> Block<E, W> {
    horizontal::vector_scan(v)
}

/// [`vector_inclusive_scan`] plus the number of shift-add rounds it took.
pub fn vector_inclusive_scan_counted<E: Element, const W: usize>(v: Block<E, W>) -> (Block<E, W>, u32) {
    horizontal::vector_scan_counted(v)
}

/// Lane `i` of the result is lane `i - k` of `v`; the low `k` lanes are zero.
pub fn lane_shift_with_zero_fill<E: Element, const W: usize>(v: Block<E, W>, k: usize) -> Block<E, W> {
    v.shift_in_zeros(k)
}

/// Kernel selector: lane width plus native or portable backend.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Simd {
    width: Width,
    native: bool,
}

impl Default for Simd {
    fn default() -> Self {
        Self::detect()
    }
}

impl fmt::Display for Simd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let backend = if self.native { "native" } else { "portable" };
        write!(f, "{}-lane {backend}", self.width.lanes())
    }
}

fn native_available() -> bool {
    static AVAILABLE: OnceLock<bool> = OnceLock::new();
    *AVAILABLE.get_or_init(|| {
        #[cfg(target_arch = "x86_64")]
        {
            avx512::available()
        }
        #[cfg(not(target_arch = "x86_64"))]
        {
            false
        }
    })
}

macro_rules! dispatch {
    ($simd:expr, native: $native:expr, portable: $($f:ident)::+ [$E:ty $(, $rest:ty)*] ($($arg:expr),*)) => {{
        #[cfg(target_arch = "x86_64")]
        {
            if $simd.native {
                // SAFETY: `native` is only set after runtime feature detection.
                return unsafe { $native };
            }
        }
        match $simd.width {
            Width::W4 => $($f)::+::<$E, Block<$E, 4> $(, $rest)*>($($arg),*),
            Width::W8 => $($f)::+::<$E, Block<$E, 8> $(, $rest)*>($($arg),*),
            Width::W16 => $($f)::+::<$E, Block<$E, 16> $(, $rest)*>($($arg),*),
        }
    }};
}

impl Simd {
    /// 16 lanes, native when the CPU supports 512-bit vectors.
    pub fn detect() -> Self {
        Self { width: Width::W16, native: native_available() }
    }

    /// Portable vectors of the given width, regardless of hardware.
    pub fn portable(width: Width) -> Self {
        Self { width, native: false }
    }

    /// Native 16-lane backend, if this CPU has it.
    pub fn native() -> Option<Self> {
        native_available().then_some(Self { width: Width::W16, native: true })
    }

    pub fn width(&self) -> Width {
        self.width
    }

    pub fn lanes(&self) -> usize {
        self.width.lanes()
    }

    pub fn is_native(&self) -> bool {
        self.native
    }

    /// Scan `lanes` (exactly one vector) in register; returns the round count.
    pub fn vector_scan<E: Element>(&self, lanes: &mut [E]) -> u32 {
        assert_eq!(lanes.len(), self.lanes());
        dispatch!(self, native: avx512::vector_scan(lanes), portable: vector_scan_slice [E] (lanes))
    }

    pub fn horizontal_scan<E: Element>(&self, data: &mut [E], offset: E) -> E {
        self.horizontal_scan_io(&mut InPlace(data), offset)
    }

    pub fn horizontal_scan_into<E: Element>(&self, src: &[E], dst: &mut [E], offset: E) -> E {
        self.horizontal_scan_io(&mut OutOfPlace::new(src, dst), offset)
    }

    /// Horizontal scan of `io` seeded with `offset`; returns the final total.
    pub fn horizontal_scan_io<E: Element, Io: ScanIo<E>>(&self, io: &mut Io, offset: E) -> E {
        dispatch!(self,
            native: avx512::horizontal_scan(io, offset),
            portable: horizontal::scan [E, Io] (io, offset))
    }

    /// Lane-parallel total of `data`.
    pub fn accumulate<E: Element>(&self, data: &[E]) -> E {
        dispatch!(self, native: avx512::accumulate(data), portable: horizontal::accumulate [E] (data))
    }

    /// Lane-parallel add of `offset` to every element.
    pub fn increment<E: Element>(&self, data: &mut [E], offset: E) {
        dispatch!(self,
            native: avx512::increment(data, offset),
            portable: horizontal::increment [E] (data, offset))
    }

    /// Vertical pass 1, scan flavor. `io.len()` must be a multiple of the
    /// lane count; `totals` receives one value per lane, where lane 0
    /// includes `carry_in`.
    pub fn vertical_pass1_scan<E: Element, Io: ScanIo<E>>(&self, io: &mut Io, carry_in: E, totals: &mut [E]) {
        dispatch!(self,
            native: avx512::vertical_pass1_scan(io, carry_in, totals),
            portable: vertical::pass1_scan [E, Io] (io, carry_in, totals))
    }

    /// Vertical pass 1, accumulate flavor: per-chunk totals, `data` untouched.
    pub fn vertical_pass1_accumulate<E: Element>(&self, data: &[E], totals: &mut [E]) {
        dispatch!(self,
            native: avx512::vertical_pass1_accumulate(data, totals),
            portable: vertical::pass1_accumulate [E] (data, totals))
    }

    /// Vertical pass 2 after [`Simd::vertical_pass1_scan`]: chunk `i` is
    /// incremented by `offsets[i]` (see [`chunk_offsets`]).
    pub fn vertical_pass2_increment<E: Element>(&self, data: &mut [E], offsets: &[E]) {
        dispatch!(self,
            native: avx512::vertical_pass2_increment(data, offsets),
            portable: vertical::pass2_increment [E] (data, offsets))
    }

    /// Vertical pass 2 after [`Simd::vertical_pass1_accumulate`]: chunk `i`
    /// is scanned starting from `seeds[i]` (see [`chunk_seeds`]). Returns
    /// the region's final total.
    pub fn vertical_pass2_scan<E: Element, Io: ScanIo<E>>(&self, io: &mut Io, seeds: &[E]) -> E {
        dispatch!(self,
            native: avx512::vertical_pass2_scan(io, seeds),
            portable: vertical::pass2_scan [E, Io] (io, seeds))
    }

    /// Tree up-sweep only; returns the root (the total) and leaves `data`
    /// in its reduced state.
    pub fn tree_up_sweep<E: Element>(&self, data: &mut [E]) -> Result<E> {
        self.check_tree_len(data.len())?;
        dispatch!(self, native: Ok(avx512::tree_up_sweep(data)), portable: tree_up_sweep_ok [E] (data))
    }

    /// Tree scan of a region whose length is `lanes * 2^j`; returns the
    /// total plus `offset`.
    pub fn tree_scan<E: Element>(&self, data: &mut [E], offset: E) -> Result<E> {
        self.check_tree_len(data.len())?;
        dispatch!(self, native: Ok(avx512::tree_scan(data, offset)), portable: tree_scan_ok [E] (data, offset))
    }

    fn check_tree_len(&self, n: usize) -> Result<()> {
        if is_tree_len(n, self.lanes()) {
            Ok(())
        } else {
            Err(Error::TreeLength { len: n, lanes: self.lanes() })
        }
    }

    /// Complete single-thread vertical scan of any length.
    ///
    /// The input is processed in consecutive blocks of `block_len`
    /// elements (0 means one block) so the second pass can hit cache. Each
    /// block runs both vertical passes over its lane-aligned body and a
    /// horizontal scan over the remaining tail.
    pub fn vertical_scan_io<E: Element, Io: ScanIo<E>>(
        &self,
        io: &mut Io,
        order: PassOrder,
        block_len: usize,
        offset: E,
    ) -> E {
        let w = self.lanes();
        let cap = match block_len {
            0 => MAX_REGION,
            b => b.clamp(w, MAX_REGION) / w * w,
        };
        let n = io.len();
        let mut carry = offset;
        let mut start = 0;
        while start < n {
            let len = (n - start).min(cap);
            carry = self.vertical_block(&mut io.part(start..start + len), order, carry);
            start += len;
        }
        carry
    }

    fn vertical_block<E: Element, Io: ScanIo<E>>(&self, io: &mut Io, order: PassOrder, carry: E) -> E {
        let w = self.lanes();
        let n = io.len();
        let body = n - n % w;
        let mut carry = carry;
        if body > 0 {
            let mut totals = [E::ZERO; 16];
            let totals = &mut totals[..w];
            let mut head = io.part(0..body);
            match order {
                PassOrder::ScanFirst => {
                    self.vertical_pass1_scan(&mut head, carry, totals);
                    let offsets = chunk_offsets(totals);
                    self.vertical_pass2_increment(head.output(), &offsets);
                    carry = offsets[w - 1].add(totals[w - 1]);
                }
                PassOrder::AccumulateFirst => {
                    self.vertical_pass1_accumulate(head.input(), totals);
                    let seeds = chunk_seeds(totals, carry);
                    carry = self.vertical_pass2_scan(&mut head, &seeds);
                }
            }
        }
        self.horizontal_scan_io(&mut io.part(body..n), carry)
    }

    /// Complete single-thread tree scan of any length.
    ///
    /// The input is peeled into the largest `lanes * 2^j` pieces that fit
    /// (no larger than `block_len` when it is non-zero), each tree-scanned
    /// with the running carry; the final tail shorter than one vector is
    /// scanned horizontally. Out-of-place scans copy each piece to the
    /// output first since the tree works in place.
    pub fn tree_scan_io<E: Element, Io: ScanIo<E>>(&self, io: &mut Io, block_len: usize, offset: E) -> E {
        let w = self.lanes();
        let limit = match block_len {
            0 => MAX_REGION,
            b => b.clamp(w, MAX_REGION),
        };
        let n = io.len();
        let mut carry = offset;
        let mut start = 0;
        while n - start >= w {
            let piece = largest_tree_len(w, (n - start).min(limit));
            let mut part = io.part(start..start + piece);
            let region = part.materialize();
            carry = self.tree_scan(region, carry).expect("piece length is lanes * 2^j by construction");
            start += piece;
        }
        self.horizontal_scan_io(&mut io.part(start..n), carry)
    }
}

/// Largest `lanes * 2^j` not above `limit` (which must be at least `lanes`).
fn largest_tree_len(lanes: usize, limit: usize) -> usize {
    debug_assert!(limit >= lanes);
    let blocks = limit / lanes;
    lanes << (usize::BITS - 1 - blocks.leading_zeros())
}

fn vector_scan_slice<E: Element, V: Vector<E>>(lanes: &mut [E]) -> u32 {
    let (v, rounds) = horizontal::vector_scan_counted::<E, V>(V::load(lanes));
    v.store(lanes);
    rounds
}

fn tree_up_sweep_ok<E: Element, V: Vector<E>>(data: &mut [E]) -> Result<E> {
    Ok(tree::up_sweep::<E, V>(data))
}

fn tree_scan_ok<E: Element, V: Vector<E>>(data: &mut [E], offset: E) -> Result<E> {
    Ok(tree::scan::<E, V>(data, offset))
}
