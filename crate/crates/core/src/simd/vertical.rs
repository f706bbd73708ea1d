//! Vertical SIMD: the region is cut into `w` equal chunks and lane `i` walks
//! chunk `i`, reading and writing through strided gather/scatter.
//!
//! Regions handed to these kernels have a length divisible by `w` and
//! below [`MAX_REGION`] elements so every index fits a signed 32-bit lane.

use super::vector::Vector;
use crate::element::Element;
use crate::scan::ScanIo;

/// Largest region the gather/scatter kernels accept.
pub const MAX_REGION: usize = 1 << 30;

#[inline(always)]
fn chunk_len(n: usize, lanes: usize, totals: usize) -> u32 {
    assert!(n.is_multiple_of(lanes), "vertical region of {n} is not a multiple of {lanes} lanes");
    assert!(n <= MAX_REGION, "vertical region of {n} elements is too large for 32-bit indices");
    assert_eq!(totals, lanes, "one total per lane");
    (n / lanes) as u32
}

#[inline(always)]
fn seeded<E: Element, V: Vector<E>>(first: E) -> V {
    let mut seed = [E::ZERO; 16];
    seed[0] = first;
    V::load(&seed[..V::LANES])
}

/// Scan every chunk in place (lane 0 seeded with `carry_in`) and leave each
/// lane's final running value in `totals`.
#[inline(always)]
pub(crate) fn pass1_scan<E: Element, V: Vector<E>, Io: ScanIo<E>>(io: &mut Io, carry_in: E, totals: &mut [E]) {
    let k = chunk_len(io.len(), V::LANES, totals.len());
    let mut running: V = seeded(carry_in);
    let mut idx = V::index_strided(0, k);
    for _ in 0..k {
        // SAFETY: lane i touches i * k + j < w * k = len, all distinct.
        unsafe {
            running = running.add(V::gather(io.input(), idx));
            running.scatter(io.output(), idx);
        }
        idx = V::index_add(idx, 1);
    }
    running.store(totals);
}

/// Chunk totals only; reads through gathers and never writes `data`.
#[inline(always)]
pub(crate) fn pass1_accumulate<E: Element, V: Vector<E>>(data: &[E], totals: &mut [E]) {
    let k = chunk_len(data.len(), V::LANES, totals.len());
    let mut running = V::zero();
    let mut idx = V::index_strided(0, k);
    for _ in 0..k {
        // SAFETY: as in `pass1_scan`.
        running = running.add(unsafe { V::gather(data, idx) });
        idx = V::index_add(idx, 1);
    }
    running.store(totals);
}

/// Add `offsets[i]` to every element of chunk `i`.
#[inline(always)]
pub(crate) fn pass2_increment<E: Element, V: Vector<E>>(data: &mut [E], offsets: &[E]) {
    let k = chunk_len(data.len(), V::LANES, offsets.len()) as usize;
    if k == 0 {
        return;
    }
    for (chunk, &offset) in data.chunks_exact_mut(k).zip(offsets) {
        super::horizontal::increment::<E, V>(chunk, offset);
    }
}

/// Scan every chunk with lane `i` seeded by `seeds[i]`; returns the region's
/// final running total.
#[inline(always)]
pub(crate) fn pass2_scan<E: Element, V: Vector<E>, Io: ScanIo<E>>(io: &mut Io, seeds: &[E]) -> E {
    let k = chunk_len(io.len(), V::LANES, seeds.len());
    let mut running = V::load(seeds);
    let mut idx = V::index_strided(0, k);
    for _ in 0..k {
        // SAFETY: as in `pass1_scan`.
        unsafe {
            running = running.add(V::gather(io.input(), idx));
            running.scatter(io.output(), idx);
        }
        idx = V::index_add(idx, 1);
    }
    running.last()
}

/// Exclusive scan of per-lane totals: what each chunk must be incremented by.
pub fn chunk_offsets<E: Element>(totals: &[E]) -> Vec<E> {
    let mut running = E::ZERO;
    totals
        .iter()
        .map(|&t| {
            let before = running;
            running = running.add(t);
            before
        })
        .collect()
}

/// Per-chunk starting values for a scan pass: `carry_in` plus the totals of
/// all earlier chunks.
pub fn chunk_seeds<E: Element>(totals: &[E], carry_in: E) -> Vec<E> {
    let mut running = carry_in;
    totals
        .iter()
        .map(|&t| {
            let before = running;
            running = running.add(t);
            before
        })
        .collect()
}
