//! Horizontal SIMD: in-register prefix sums with a broadcast carry.

use super::vector::Vector;
use crate::element::Element;
use crate::scan::ScanIo;

/// In-register inclusive scan, also reporting how many shift-add rounds ran.
///
/// Rounds shift by 1, 2, 4, ... lanes, so a `w`-lane vector takes
/// `log2(w)` rounds.
#[inline(always)]
pub(crate) fn vector_scan_counted<E: Element, V: Vector<E>>(mut v: V) -> (V, u32) {
    let mut rounds = 0;
    let mut shift = 1;
    while shift < V::LANES {
        v = v.add(v.shift_in_zeros(shift));
        shift <<= 1;
        rounds += 1;
    }
    (v, rounds)
}

#[inline(always)]
pub(crate) fn vector_scan<E: Element, V: Vector<E>>(v: V) -> V {
    vector_scan_counted(v).0
}

/// Load a block, scan it in register, add the carry, store, and carry the
/// last lane forward. The remainder shorter than one vector is scalar.
#[inline(always)]
pub(crate) fn scan<E: Element, V: Vector<E>, Io: ScanIo<E>>(io: &mut Io, offset: E) -> E {
    let n = io.len();
    let body = n - n % V::LANES;
    let mut carry = V::splat(offset);
    let mut i = 0;
    // Two blocks per step, both scanned locally; the pair's total is added
    // to the carry separately, so the loop-carried chain is a single add.
    while i + 2 * V::LANES <= body {
        let lo = vector_scan(io.load::<V>(i));
        let hi = vector_scan(io.load::<V>(i + V::LANES)).add(lo.broadcast_last());
        io.store(i, lo.add(carry));
        io.store(i + V::LANES, hi.add(carry));
        carry = carry.add(hi.broadcast_last());
        i += 2 * V::LANES;
    }
    while i < body {
        let block = vector_scan(io.load::<V>(i)).add(carry);
        io.store(i, block);
        carry = block.broadcast_last();
        i += V::LANES;
    }
    let mut running = carry.last();
    for j in body..n {
        running = running.add(io.read(j));
        io.write(j, running);
    }
    running
}

/// Lane-parallel total. Four independent accumulators hide the add latency.
#[inline(always)]
pub(crate) fn accumulate<E: Element, V: Vector<E>>(data: &[E]) -> E {
    let w = V::LANES;
    let mut acc = [V::zero(); 4];
    let mut quads = data.chunks_exact(4 * w);
    for quad in &mut quads {
        for (k, a) in acc.iter_mut().enumerate() {
            *a = a.add(V::load(&quad[k * w..]));
        }
    }
    let rest = quads.remainder();
    let mut singles = rest.chunks_exact(w);
    for single in &mut singles {
        acc[0] = acc[0].add(V::load(single));
    }
    let lanes = acc[0].add(acc[1]).add(acc[2].add(acc[3]));
    singles.remainder().iter().fold(lanes.reduce(), |total, &v| total.add(v))
}

#[inline(always)]
pub(crate) fn increment<E: Element, V: Vector<E>>(data: &mut [E], offset: E) {
    let by = V::splat(offset);
    let mut chunks = data.chunks_exact_mut(V::LANES);
    for chunk in &mut chunks {
        V::load(chunk).add(by).store(chunk);
    }
    for value in chunks.into_remainder() {
        *value = value.add(offset);
    }
}
