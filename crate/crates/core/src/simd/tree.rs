//! Tree SIMD: the work-efficient up-sweep / down-sweep scan over a balanced
//! binary tree laid out implicitly in the buffer.
//!
//! Each tree level is one strided pass. Levels with at least `w` node pairs
//! run `w` pairs per gather/add/scatter step; the top `log2(w)` levels have
//! fewer pairs than lanes and run scalar instead of idling lanes.

use super::vector::Vector;
use crate::element::Element;

/// Whether `n` is a valid tree length for `lanes`: `lanes * 2^j`, or zero.
pub fn is_tree_len(n: usize, lanes: usize) -> bool {
    n == 0 || (n.is_multiple_of(lanes) && (n / lanes).is_power_of_two() && n <= super::vertical::MAX_REGION)
}

/// Visit the node pairs of one level, `w` at a time where possible.
///
/// `half` is the distance between a pair's left and right child roots.
#[inline(always)]
fn for_level<E: Element, V: Vector<E>>(
    data: &mut [E],
    half: usize,
    mut vector: impl FnMut(&mut [E], V::Index, V::Index),
    mut scalar: impl FnMut(&mut [E], usize, usize),
) {
    let stride = 2 * half;
    let pairs = data.len() / stride;
    if pairs >= V::LANES {
        let step = (V::LANES * stride) as u32;
        let mut left = V::index_strided((half - 1) as u32, stride as u32);
        let mut right = V::index_strided((stride - 1) as u32, stride as u32);
        for _ in 0..pairs / V::LANES {
            vector(data, left, right);
            left = V::index_add(left, step);
            right = V::index_add(right, step);
        }
    } else {
        for p in 0..pairs {
            scalar(data, p * stride + half - 1, p * stride + stride - 1);
        }
    }
}

/// Reduce in place; afterwards the last element holds the total.
#[inline(always)]
pub(crate) fn up_sweep<E: Element, V: Vector<E>>(data: &mut [E]) -> E {
    let n = data.len();
    assert!(is_tree_len(n, V::LANES), "tree length {n} is not lanes * 2^j");
    if n == 0 {
        return E::ZERO;
    }
    let mut half = 1;
    while half < n {
        for_level::<E, V>(
            data,
            half,
            |d, l, r| unsafe {
                // SAFETY: indices stay below n and the right indices are distinct.
                let sum = V::gather(d, l).add(V::gather(d, r));
                sum.scatter(d, r);
            },
            |d, l, r| d[r] = d[l].add(d[r]),
        );
        half *= 2;
    }
    data[n - 1]
}

/// Distribute prefixes down the tree built by [`up_sweep`], whose root must
/// already be cleared to zero. Leaves the exclusive scan.
#[inline(always)]
fn down_sweep<E: Element, V: Vector<E>>(data: &mut [E]) {
    let n = data.len();
    let mut half = n / 2;
    while half >= 1 {
        for_level::<E, V>(
            data,
            half,
            |d, l, r| unsafe {
                // SAFETY: as in `up_sweep`; left and right indices are disjoint.
                let left = V::gather(d, l);
                let right = V::gather(d, r);
                right.scatter(d, l);
                left.add(right).scatter(d, r);
            },
            |d, l, r| {
                let left = d[l];
                d[l] = d[r];
                d[r] = left.add(d[r]);
            },
        );
        half /= 2;
    }
}

/// Full tree scan: returns `offset` plus the total and leaves the inclusive
/// scan seeded with `offset`.
///
/// The down-sweep yields the exclusive scan, whose element `i + 1` is the
/// inclusive value at `i`; a final vector pass shifts left by one, adds the
/// offset and puts the captured root in the last slot.
#[inline(always)]
pub(crate) fn scan<E: Element, V: Vector<E>>(data: &mut [E], offset: E) -> E {
    let n = data.len();
    let root = up_sweep::<E, V>(data);
    if n == 0 {
        return offset;
    }
    data[n - 1] = E::ZERO;
    down_sweep::<E, V>(data);

    let by = V::splat(offset);
    let mut i = 0;
    while i + 1 + V::LANES <= n {
        V::load(&data[i + 1..]).add(by).store(&mut data[i..]);
        i += V::LANES;
    }
    while i + 1 < n {
        data[i] = data[i + 1].add(offset);
        i += 1;
    }
    let total = root.add(offset);
    data[n - 1] = total;
    total
}
