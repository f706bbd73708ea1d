//! The 32-bit element types the scans operate on.
//!
//! Two interpretations are supported: `u32` with wrapping addition, which is
//! associative and therefore lets every parallel variant be checked
//! bit-exactly, and `f32`, whose additions get reassociated by the parallel
//! and vector kernels and must be compared with a tolerance.

use std::fmt::{Debug, Display};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::simd::Vector;

mod sealed {
    pub trait Sealed {}
    impl Sealed for u32 {}
    impl Sealed for f32 {}
}

/// A 32-bit value that can be scanned with addition.
pub trait Element: sealed::Sealed + Copy + Default + PartialEq + Debug + Display + Send + Sync + 'static {
    /// Additive identity.
    const ZERO: Self;
    /// Label used on the command line and in CSV output.
    const NAME: &'static str;
    /// Whether addition is exactly associative for this type.
    const EXACT: bool;

    /// Native 16-lane vector when the target has one, otherwise the portable block.
    #[doc(hidden)]
    type Native16: Vector<Self>;

    fn add(self, rhs: Self) -> Self;

    fn to_bits(self) -> u32;

    fn from_bits(bits: u32) -> Self;

    /// Lossy widening used for error reporting and float comparisons.
    fn to_f64(self) -> f64;

    /// Uniform sample: any bit pattern for integers, `[0, 1)` for floats.
    fn sample<R: rand::Rng + ?Sized>(rng: &mut R) -> Self;
}

impl Element for u32 {
    const ZERO: Self = 0;
    const NAME: &'static str = "i32";
    const EXACT: bool = true;

    #[cfg(target_arch = "x86_64")]
    type Native16 = crate::simd::avx512::U32x16;
    #[cfg(not(target_arch = "x86_64"))]
    type Native16 = crate::simd::Block<u32, 16>;

    #[inline(always)]
    fn add(self, rhs: Self) -> Self {
        self.wrapping_add(rhs)
    }

    #[inline(always)]
    fn to_bits(self) -> u32 {
        self
    }

    #[inline(always)]
    fn from_bits(bits: u32) -> Self {
        bits
    }

    fn to_f64(self) -> f64 {
        f64::from(self)
    }

    fn sample<R: rand::Rng + ?Sized>(rng: &mut R) -> Self {
        rng.random()
    }
}

impl Element for f32 {
    const ZERO: Self = 0.0;
    const NAME: &'static str = "f32";
    const EXACT: bool = false;

    #[cfg(target_arch = "x86_64")]
    type Native16 = crate::simd::avx512::F32x16;
    #[cfg(not(target_arch = "x86_64"))]
    type Native16 = crate::simd::Block<f32, 16>;

    #[inline(always)]
    fn add(self, rhs: Self) -> Self {
        self + rhs
    }

    #[inline(always)]
    fn to_bits(self) -> u32 {
        f32::to_bits(self)
    }

    #[inline(always)]
    fn from_bits(bits: u32) -> Self {
        f32::from_bits(bits)
    }

    fn to_f64(self) -> f64 {
        f64::from(self)
    }

    fn sample<R: rand::Rng + ?Sized>(rng: &mut R) -> Self {
        rng.random()
    }
}

/// Deterministic benchmark and test input of length `n`.
pub fn random_input<E: Element>(n: usize, seed: u64) -> Vec<E> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| E::sample(&mut rng)).collect()
}

/// Relative tolerance for comparing reassociated `f32` scans against the
/// sequential result.
pub const FLOAT_REL_TOLERANCE: f64 = 1e-5;

/// FNV-1a over the little-endian bits of every element.
pub fn checksum<E: Element>(data: &[E]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    data.iter().fold(OFFSET, |mut hash, value| {
        for byte in value.to_bits().to_le_bytes() {
            hash ^= u64::from(byte);
            hash = hash.wrapping_mul(PRIME);
        }
        hash
    })
}

/// Relative tolerance that grows with the scan length.
///
/// The sequential `f32` scan is itself only an approximation: its rounding
/// error grows roughly with `sqrt(n)` units of roundoff, so long scans are
/// compared with a looser bound than [`FLOAT_REL_TOLERANCE`].
pub fn length_scaled_tolerance(n: usize) -> f64 {
    const UNIT_ROUNDOFF: f64 = 1.0 / (1u64 << 24) as f64;
    (4.0 * (n as f64).sqrt() * UNIT_ROUNDOFF).max(FLOAT_REL_TOLERANCE)
}

/// First position where `actual` disagrees with `expected`.
///
/// Exact types must match bit for bit; floats must agree within
/// [`FLOAT_REL_TOLERANCE`] relative to the expected magnitude.
pub fn first_mismatch<E: Element>(expected: &[E], actual: &[E]) -> Option<Mismatch> {
    first_mismatch_within(expected, actual, FLOAT_REL_TOLERANCE)
}

/// [`first_mismatch`] with a caller-chosen relative tolerance for floats.
pub fn first_mismatch_within<E: Element>(expected: &[E], actual: &[E], rel_tol: f64) -> Option<Mismatch> {
    if expected.len() != actual.len() {
        return Some(Mismatch { index: expected.len().min(actual.len()), expected: f64::NAN, actual: f64::NAN });
    }
    expected.iter().zip(actual).position(|(&e, &a)| !agrees_within(e, a, rel_tol)).map(|index| Mismatch {
        index,
        expected: expected[index].to_f64(),
        actual: actual[index].to_f64(),
    })
}

/// Whether two values are equal under the type's comparison rule.
pub fn agrees<E: Element>(expected: E, actual: E) -> bool {
    agrees_within(expected, actual, FLOAT_REL_TOLERANCE)
}

fn agrees_within<E: Element>(expected: E, actual: E, rel_tol: f64) -> bool {
    if E::EXACT {
        return expected.to_bits() == actual.to_bits();
    }
    let (e, a) = (expected.to_f64(), actual.to_f64());
    let scale = e.abs().max(f64::MIN_POSITIVE);
    (e - a).abs() <= rel_tol * scale
}

/// A disagreement found by [`first_mismatch`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mismatch {
    pub index: usize,
    pub expected: f64,
    pub actual: f64,
}

impl Display for Mismatch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "index {}: expected {}, got {}", self.index, self.expected, self.actual)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integer_addition_wraps() {
        assert_eq!(u32::MAX.add(2), 1);
    }

    #[test]
    fn checksum_depends_on_order() {
        assert_ne!(checksum(&[1u32, 2]), checksum(&[2u32, 1]));
        assert_eq!(checksum::<u32>(&[]), 0xcbf2_9ce4_8422_2325);
    }

    #[test]
    fn float_agreement_is_relative() {
        assert!(agrees(1000.0f32, 1000.005));
        assert!(!agrees(1000.0f32, 1000.1));
        assert!(agrees(0.0f32, 0.0));
        assert!(!agrees(1u32, 2));
    }

    #[test]
    fn scaled_tolerance_grows_with_length() {
        assert_eq!(length_scaled_tolerance(0), FLOAT_REL_TOLERANCE);
        assert_eq!(length_scaled_tolerance(1000), FLOAT_REL_TOLERANCE);
        assert!(length_scaled_tolerance(1 << 22) > 1e-4);
        assert!(first_mismatch_within(&[1000.0f32], &[1000.05], 1e-4).is_none());
        assert!(first_mismatch(&[1000.0f32], &[1000.05]).is_some());
        assert!(first_mismatch_within(&[1u32], &[2], 1.0).is_some());
    }

    #[test]
    fn mismatch_reports_first_index() {
        let m = first_mismatch(&[1u32, 2, 3], &[1, 5, 7]).unwrap();
        assert_eq!(m.index, 1);
        assert!(first_mismatch(&[1u32], &[1]).is_none());
        assert!(first_mismatch(&[1u32], &[]).is_some());
    }
}
