//! 512-bit backend for 16 lanes of `u32` / `f32`.
//!
//! The vector methods are `#[inline(always)]` and only reach machine code
//! through the `#[target_feature(enable = "avx512f")]` entry points at the
//! bottom of this file, which [`super::Simd`] calls only after runtime
//! detection. Nothing else in the crate instantiates these types.

use std::arch::x86_64::*;

use super::vector::Vector;
use super::{horizontal, tree, vertical};
use crate::element::Element;
use crate::scan::ScanIo;

#[derive(Clone, Copy)]
#[repr(transparent)]
pub struct U32x16(__m512i);

#[derive(Clone, Copy)]
#[repr(transparent)]
pub struct F32x16(__m512);

#[inline(always)]
fn lane_indices(start: u32, stride: u32) -> __m512i {
    let idx: [u32; 16] = std::array::from_fn(|i| start + i as u32 * stride);
    unsafe { _mm512_loadu_si512(idx.as_ptr().cast()) }
}

/// Whole-register lane shift with zero fill. There is no direct
/// instruction for it, so align against a zero register instead.
#[inline(always)]
fn shift_lanes(x: __m512i, k: usize) -> __m512i {
    unsafe {
        let zero = _mm512_setzero_si512();
        match k {
            0 => x,
            1 => _mm512_alignr_epi32::<15>(x, zero),
            2 => _mm512_alignr_epi32::<14>(x, zero),
            3 => _mm512_alignr_epi32::<13>(x, zero),
            4 => _mm512_alignr_epi32::<12>(x, zero),
            5 => _mm512_alignr_epi32::<11>(x, zero),
            6 => _mm512_alignr_epi32::<10>(x, zero),
            7 => _mm512_alignr_epi32::<9>(x, zero),
            8 => _mm512_alignr_epi32::<8>(x, zero),
            9 => _mm512_alignr_epi32::<7>(x, zero),
            10 => _mm512_alignr_epi32::<6>(x, zero),
            11 => _mm512_alignr_epi32::<5>(x, zero),
            12 => _mm512_alignr_epi32::<4>(x, zero),
            13 => _mm512_alignr_epi32::<3>(x, zero),
            14 => _mm512_alignr_epi32::<2>(x, zero),
            15 => _mm512_alignr_epi32::<1>(x, zero),
            16 => zero,
            _ => panic!("shift of {k} lanes exceeds the register"),
        }
    }
}

#[inline(always)]
fn lane_bits(x: __m512i, i: usize) -> u32 {
    let mut out = [0u32; 16];
    unsafe { _mm512_storeu_si512(out.as_mut_ptr().cast(), x) };
    out[i]
}

impl Vector<u32> for U32x16 {
    const LANES: usize = 16;
    type Index = __m512i;

    #[inline(always)]
    fn splat(value: u32) -> Self {
        Self(unsafe { _mm512_set1_epi32(value as i32) })
    }

    #[inline(always)]
    fn load(src: &[u32]) -> Self {
        assert!(src.len() >= 16);
        Self(unsafe { _mm512_loadu_si512(src.as_ptr().cast()) })
    }

    #[inline(always)]
    fn store(self, dst: &mut [u32]) {
        assert!(dst.len() >= 16);
        unsafe { _mm512_storeu_si512(dst.as_mut_ptr().cast(), self.0) }
    }

    #[inline(always)]
    fn add(self, rhs: Self) -> Self {
        Self(unsafe { _mm512_add_epi32(self.0, rhs.0) })
    }

    #[inline(always)]
    fn shift_in_zeros(self, k: usize) -> Self {
        Self(shift_lanes(self.0, k))
    }

    #[inline(always)]
    fn broadcast_last(self) -> Self {
        Self(unsafe { _mm512_permutexvar_epi32(_mm512_set1_epi32(15), self.0) })
    }

    #[inline(always)]
    fn lane(self, i: usize) -> u32 {
        lane_bits(self.0, i)
    }

    #[inline(always)]
    fn reduce(self) -> u32 {
        unsafe { _mm512_reduce_add_epi32(self.0) as u32 }
    }

    #[inline(always)]
    fn index_strided(start: u32, stride: u32) -> __m512i {
        lane_indices(start, stride)
    }

    #[inline(always)]
    fn index_add(index: __m512i, delta: u32) -> __m512i {
        unsafe { _mm512_add_epi32(index, _mm512_set1_epi32(delta as i32)) }
    }

    #[inline(always)]
    unsafe fn gather(data: &[u32], index: __m512i) -> Self {
        debug_assert!((0..16).all(|i| (lane_bits(index, i) as usize) < data.len()));
        Self(unsafe { _mm512_i32gather_epi32::<4>(index, data.as_ptr().cast()) })
    }

    #[inline(always)]
    unsafe fn scatter(self, data: &mut [u32], index: __m512i) {
        debug_assert!((0..16).all(|i| (lane_bits(index, i) as usize) < data.len()));
        unsafe { _mm512_i32scatter_epi32::<4>(data.as_mut_ptr().cast(), index, self.0) }
    }
}

impl Vector<f32> for F32x16 {
    const LANES: usize = 16;
    type Index = __m512i;

    #[inline(always)]
    fn splat(value: f32) -> Self {
        Self(unsafe { _mm512_set1_ps(value) })
    }

    #[inline(always)]
    fn load(src: &[f32]) -> Self {
        assert!(src.len() >= 16);
        Self(unsafe { _mm512_loadu_ps(src.as_ptr()) })
    }

    #[inline(always)]
    fn store(self, dst: &mut [f32]) {
        assert!(dst.len() >= 16);
        unsafe { _mm512_storeu_ps(dst.as_mut_ptr(), self.0) }
    }

    #[inline(always)]
    fn add(self, rhs: Self) -> Self {
        Self(unsafe { _mm512_add_ps(self.0, rhs.0) })
    }

    #[inline(always)]
    fn shift_in_zeros(self, k: usize) -> Self {
        unsafe { Self(_mm512_castsi512_ps(shift_lanes(_mm512_castps_si512(self.0), k))) }
    }

    #[inline(always)]
    fn broadcast_last(self) -> Self {
        Self(unsafe { _mm512_permutexvar_ps(_mm512_set1_epi32(15), self.0) })
    }

    #[inline(always)]
    fn lane(self, i: usize) -> f32 {
        f32::from_bits(lane_bits(unsafe { _mm512_castps_si512(self.0) }, i))
    }

    #[inline(always)]
    fn reduce(self) -> f32 {
        unsafe { _mm512_reduce_add_ps(self.0) }
    }

    #[inline(always)]
    fn index_strided(start: u32, stride: u32) -> __m512i {
        lane_indices(start, stride)
    }

    #[inline(always)]
    fn index_add(index: __m512i, delta: u32) -> __m512i {
        unsafe { _mm512_add_epi32(index, _mm512_set1_epi32(delta as i32)) }
    }

    #[inline(always)]
    unsafe fn gather(data: &[f32], index: __m512i) -> Self {
        debug_assert!((0..16).all(|i| (lane_bits(index, i) as usize) < data.len()));
        Self(unsafe { _mm512_i32gather_ps::<4>(index, data.as_ptr()) })
    }

    #[inline(always)]
    unsafe fn scatter(self, data: &mut [f32], index: __m512i) {
        debug_assert!((0..16).all(|i| (lane_bits(index, i) as usize) < data.len()));
        unsafe { _mm512_i32scatter_ps::<4>(data.as_mut_ptr(), index, self.0) }
    }
}

pub(crate) fn available() -> bool {
    is_x86_feature_detected!("avx512f")
}

// Entry points. Callers must have checked `available()`.

#[target_feature(enable = "avx512f")]
pub(crate) unsafe fn vector_scan<E: Element>(lanes: &mut [E]) -> u32 {
    let (v, rounds) = horizontal::vector_scan_counted::<E, E::Native16>(E::Native16::load(lanes));
    v.store(lanes);
    rounds
}

#[target_feature(enable = "avx512f")]
pub(crate) unsafe fn horizontal_scan<E: Element, Io: ScanIo<E>>(io: &mut Io, offset: E) -> E {
    horizontal::scan::<E, E::Native16, Io>(io, offset)
}

#[target_feature(enable = "avx512f")]
pub(crate) unsafe fn accumulate<E: Element>(data: &[E]) -> E {
    horizontal::accumulate::<E, E::Native16>(data)
}

#[target_feature(enable = "avx512f")]
pub(crate) unsafe fn increment<E: Element>(data: &mut [E], offset: E) {
    horizontal::increment::<E, E::Native16>(data, offset)
}

#[target_feature(enable = "avx512f")]
pub(crate) unsafe fn vertical_pass1_scan<E: Element, Io: ScanIo<E>>(io: &mut Io, carry_in: E, totals: &mut [E]) {
    vertical::pass1_scan::<E, E::Native16, Io>(io, carry_in, totals)
}

#[target_feature(enable = "avx512f")]
pub(crate) unsafe fn vertical_pass1_accumulate<E: Element>(data: &[E], totals: &mut [E]) {
    vertical::pass1_accumulate::<E, E::Native16>(data, totals)
}

#[target_feature(enable = "avx512f")]
pub(crate) unsafe fn vertical_pass2_increment<E: Element>(data: &mut [E], offsets: &[E]) {
    vertical::pass2_increment::<E, E::Native16>(data, offsets)
}

#[target_feature(enable = "avx512f")]
pub(crate) unsafe fn vertical_pass2_scan<E: Element, Io: ScanIo<E>>(io: &mut Io, seeds: &[E]) -> E {
    vertical::pass2_scan::<E, E::Native16, Io>(io, seeds)
}

#[target_feature(enable = "avx512f")]
pub(crate) unsafe fn tree_up_sweep<E: Element>(data: &mut [E]) -> E {
    tree::up_sweep::<E, E::Native16>(data)
}

#[target_feature(enable = "avx512f")]
pub(crate) unsafe fn tree_scan<E: Element>(data: &mut [E], offset: E) -> E {
    tree::scan::<E, E::Native16>(data, offset)
}
