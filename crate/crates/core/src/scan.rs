//! Sequential building blocks: prefix sum, accumulate and increment.
//!
//! Every multithreaded scheme is a composition of these three
//! sub-procedures over disjoint spans of one buffer, and
//! [`inclusive_scan`] with a zero offset is the reference every other
//! variant is checked against.
//!
//! Offsets are explicit so the same procedures serve every scheme. None of
//! them touch elements outside the slice they are handed, so disjoint spans
//! may be processed concurrently without synchronization.

use std::ops::Range;

use crate::element::Element;
use crate::simd::Vector;

/// A half-open run of elements `[start, start + len)` within a buffer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Span {
    pub start: usize,
    pub len: usize,
}

impl Span {
    pub const fn new(start: usize, len: usize) -> Self {
        Self { start, len }
    }

    pub const fn end(&self) -> usize {
        self.start + self.len
    }

    pub const fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn range(&self) -> Range<usize> {
        self.start..self.end()
    }

    /// The same span moved `by` elements to the right.
    pub const fn shifted(self, by: usize) -> Self {
        Self::new(self.start + by, self.len)
    }
}

/// Source and destination of a scan.
///
/// In-place scans read and write the same slice; out-of-place scans read
/// `src` and write `dst`. Kernels are written once against this trait and
/// monomorphized for both modes.
pub trait ScanIo<E: Element> {
    type Part<'a>: ScanIo<E>
    where
        Self: 'a;

    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Elements to read from.
    fn input(&self) -> &[E];

    /// Elements to write to.
    fn output(&mut self) -> &mut [E];

    /// Narrow both sides to `range`.
    fn part(&mut self, range: Range<usize>) -> Self::Part<'_>;

    /// The output slice holding a copy of the input, for kernels that can
    /// only work in place.
    fn materialize(&mut self) -> &mut [E];

    #[inline(always)]
    fn read(&self, i: usize) -> E {
        self.input()[i]
    }

    #[inline(always)]
    fn write(&mut self, i: usize, value: E) {
        self.output()[i] = value;
    }

    #[inline(always)]
    fn load<V: Vector<E>>(&self, i: usize) -> V {
        V::load(&self.input()[i..i + V::LANES])
    }

    #[inline(always)]
    fn store<V: Vector<E>>(&mut self, i: usize, v: V) {
        v.store(&mut self.output()[i..i + V::LANES]);
    }
}

/// Scan a buffer onto itself.
#[derive(Debug)]
pub struct InPlace<'a, E>(pub &'a mut [E]);

/// Scan `src` into a separate, equal-length `dst`.
#[derive(Debug)]
pub struct OutOfPlace<'a, E> {
    src: &'a [E],
    dst: &'a mut [E],
}

impl<'a, E> OutOfPlace<'a, E> {
    /// Panics if the lengths differ.
    pub fn new(src: &'a [E], dst: &'a mut [E]) -> Self {
        assert_eq!(src.len(), dst.len(), "out-of-place buffers must be equal-length");
        Self { src, dst }
    }

    pub fn output_slice(&self) -> &[E] {
        self.dst
    }
}

impl<E: Element> ScanIo<E> for InPlace<'_, E> {
    type Part<'b>
        = InPlace<'b, E>
    where
        Self: 'b;

    #[inline(always)]
    fn len(&self) -> usize {
        self.0.len()
    }

    #[inline(always)]
    fn input(&self) -> &[E] {
        self.0
    }

    #[inline(always)]
    fn output(&mut self) -> &mut [E] {
        self.0
    }

    fn part(&mut self, range: Range<usize>) -> InPlace<'_, E> {
        InPlace(&mut self.0[range])
    }

    fn materialize(&mut self) -> &mut [E] {
        self.0
    }
}

impl<E: Element> ScanIo<E> for OutOfPlace<'_, E> {
    type Part<'b>
        = OutOfPlace<'b, E>
    where
        Self: 'b;

    #[inline(always)]
    fn len(&self) -> usize {
        self.src.len()
    }

    #[inline(always)]
    fn input(&self) -> &[E] {
        self.src
    }

    #[inline(always)]
    fn output(&mut self) -> &mut [E] {
        self.dst
    }

    fn part(&mut self, range: Range<usize>) -> OutOfPlace<'_, E> {
        OutOfPlace { src: &self.src[range.clone()], dst: &mut self.dst[range] }
    }

    fn materialize(&mut self) -> &mut [E] {
        self.dst.copy_from_slice(self.src);
        self.dst
    }
}

/// Replace `data` with its running totals seeded by `offset` and return the
/// final running total.
///
/// With a zero offset this is the reference oracle.
pub fn inclusive_scan<E: Element>(data: &mut [E], offset: E) -> E {
    let mut running = offset;
    for value in data.iter_mut() {
        running = running.add(*value);
        *value = running;
    }
    running
}

/// [`inclusive_scan`] over either in-place or out-of-place buffers.
pub fn inclusive_scan_io<E: Element, Io: ScanIo<E>>(io: &mut Io, offset: E) -> E {
    let mut running = offset;
    for i in 0..io.len() {
        running = running.add(io.read(i));
        io.write(i, running);
    }
    running
}

/// Total of `data`. Takes a shared slice: the accumulate pass never writes.
pub fn accumulate<E: Element>(data: &[E]) -> E {
    data.iter().fold(E::ZERO, |acc, &v| acc.add(v))
}

/// Add `offset` to every element.
pub fn increment<E: Element>(data: &mut [E], offset: E) {
    for value in data.iter_mut() {
        *value = value.add(offset);
    }
}

/// Turn an inclusive scan into an exclusive one in place.
///
/// Elements shift right by one with `identity` at index 0; the inclusive
/// grand total that falls off the end is returned. An empty buffer returns
/// `identity`.
pub fn exclusive_from_inclusive<E: Element>(data: &mut [E], identity: E) -> E {
    let Some(&total) = data.last() else {
        return identity;
    };
    data.copy_within(..data.len() - 1, 1);
    data[0] = identity;
    total
}

/// Out-of-place reference scan, allocating the result.
pub fn reference_scan<E: Element>(input: &[E]) -> Vec<E> {
    let mut out = input.to_vec();
    inclusive_scan(&mut out, E::ZERO);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn naive(input: &[u32]) -> Vec<u32> {
        // Independent formulation: each output re-sums its whole prefix.
        (0..input.len()).map(|i| input[..=i].iter().fold(0u32, |a, &b| a.wrapping_add(b))).collect()
    }

    fn random(n: usize, seed: u64) -> Vec<u32> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random()).collect()
    }

    #[test]
    fn scan_small_examples() {
        let mut a = [1u32, 2, 3, 4];
        assert_eq!(inclusive_scan(&mut a, 0), 10);
        assert_eq!(a, [1, 3, 6, 10]);

        let mut b = [5u32, 7];
        assert_eq!(inclusive_scan(&mut b, 100), 112);
        assert_eq!(b, [105, 112]);
    }

    #[test]
    fn scan_matches_naive_loop() {
        let input = random(1000, 1);
        let mut data = input.clone();
        inclusive_scan(&mut data, 0);
        assert_eq!(data, naive(&input));
    }

    #[test]
    fn scan_empty_returns_offset() {
        assert_eq!(inclusive_scan::<u32>(&mut [], 9), 9);
    }

    #[test]
    fn accumulate_examples() {
        assert_eq!(accumulate(&[1u32, 2, 3, 4]), 10);
        assert_eq!(accumulate::<u32>(&[]), 0);
        let input = random(1000, 2);
        let mut copy = input.clone();
        assert_eq!(accumulate(&input), inclusive_scan(&mut copy, 0));
    }

    #[test]
    fn increment_examples() {
        let mut a = [1u32, 3, 6];
        increment(&mut a, 10);
        assert_eq!(a, [11, 13, 16]);
        let before = a;
        increment(&mut a, 0);
        assert_eq!(a, before);
    }

    #[test]
    fn scan_then_increment_halves_equals_whole() {
        let input = random(1001, 3);
        let mut whole = input.clone();
        inclusive_scan(&mut whole, 0);

        let mut split = input.clone();
        let (lo, hi) = split.split_at_mut(500);
        let lo_total = inclusive_scan(lo, 0);
        inclusive_scan(hi, 0);
        increment(hi, lo_total);
        assert_eq!(split, whole);
    }

    #[test]
    fn exclusive_examples() {
        let mut a = [1u32, 3, 6, 10];
        assert_eq!(exclusive_from_inclusive(&mut a, 0), 10);
        assert_eq!(a, [0, 1, 3, 6]);

        let mut b = [42u32];
        assert_eq!(exclusive_from_inclusive(&mut b, 0), 42);
        assert_eq!(b, [0]);

        assert_eq!(exclusive_from_inclusive::<u32>(&mut [], 7), 7);
    }

    #[test]
    fn exclusive_plus_input_is_inclusive() {
        let input = random(777, 4);
        let inclusive = reference_scan(&input);
        let mut exclusive = inclusive.clone();
        exclusive_from_inclusive(&mut exclusive, 0);
        for i in 0..input.len() {
            assert_eq!(exclusive[i].wrapping_add(input[i]), inclusive[i]);
        }
    }

    #[test]
    fn out_of_place_leaves_source_alone() {
        let src = random(100, 5);
        let mut dst = vec![0u32; 100];
        let total = inclusive_scan_io(&mut OutOfPlace::new(&src, &mut dst), 0);
        assert_eq!(dst, reference_scan(&src));
        assert_eq!(total, *dst.last().unwrap());
        assert_eq!(src, random(100, 5));
    }

    #[test]
    fn float_scan_runs() {
        let mut a = [0.5f32, 0.25, 0.25];
        assert_eq!(inclusive_scan(&mut a, 1.0), 2.0);
        assert_eq!(a, [1.5, 1.75, 2.0]);
    }

    proptest! {
        #[test]
        fn oracle_closure(input in proptest::collection::vec(any::<u32>(), 0..300)) {
            let mut data = input.clone();
            let last = inclusive_scan(&mut data, 0);
            prop_assert_eq!(last, accumulate(&input));
        }

        #[test]
        fn composition(input in proptest::collection::vec(any::<u32>(), 0..300), cut in 0usize..300) {
            let cut = cut.min(input.len());
            let mut whole = input.clone();
            inclusive_scan(&mut whole, 0);

            let mut parts = input.clone();
            let (a, b) = parts.split_at_mut(cut);
            let carry = inclusive_scan(a, 0);
            inclusive_scan(b, carry);
            prop_assert_eq!(parts, whole);
        }

        #[test]
        fn increment_linearity(input in proptest::collection::vec(any::<u32>(), 0..100), a: u32, b: u32) {
            let mut twice = input.clone();
            increment(&mut twice, a);
            increment(&mut twice, b);
            let mut once = input;
            increment(&mut once, a.wrapping_add(b));
            prop_assert_eq!(twice, once);
        }
    }

    #[test]
    fn random_float_scan_is_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut data: Vec<f32> = (0..500).map(|_| rng.random::<f32>()).collect();
        inclusive_scan(&mut data, 0.0);
        assert!(data.windows(2).all(|w| w[0] <= w[1]));
    }
}
