use crate::element::Element;

/// A register of `LANES` elements, lane 0 holding the lowest address.
///
/// Kernels are generic over this trait. [`Block`] is the portable
/// implementation for any supported width; the AVX-512 types back the
/// 16-lane case on hardware that has it.
pub trait Vector<E: Element>: Copy {
    const LANES: usize;

    /// Per-lane 32-bit element indices for gather/scatter.
    type Index: Copy;

    fn splat(value: E) -> Self;

    #[inline(always)]
    fn zero() -> Self {
        Self::splat(E::ZERO)
    }

    /// Load the first `LANES` elements of `src`.
    fn load(src: &[E]) -> Self;

    /// Store into the first `LANES` elements of `dst`.
    fn store(self, dst: &mut [E]);

    fn add(self, rhs: Self) -> Self;

    /// Lane `i` of the result is lane `i - k` of `self`, or zero for `i < k`.
    fn shift_in_zeros(self, k: usize) -> Self;

    /// Copy of the highest lane in every lane.
    fn broadcast_last(self) -> Self;

    fn lane(self, i: usize) -> E;

    #[inline(always)]
    fn last(self) -> E {
        self.lane(Self::LANES - 1)
    }

    /// Sum of all lanes.
    fn reduce(self) -> E;

    /// Indices `start, start + stride, start + 2 * stride, ...`.
    fn index_strided(start: u32, stride: u32) -> Self::Index;

    /// Every index advanced by `delta`.
    fn index_add(index: Self::Index, delta: u32) -> Self::Index;

    /// Read `data[index[i]]` into lane `i`.
    ///
    /// # Safety
    /// Every index must be in bounds for `data`.
    unsafe fn gather(data: &[E], index: Self::Index) -> Self;

    /// Write lane `i` to `data[index[i]]`.
    ///
    /// # Safety
    /// Every index must be in bounds for `data` and all indices distinct.
    unsafe fn scatter(self, data: &mut [E], index: Self::Index);
}

/// Portable `W`-lane vector; the fallback and the reference for kernel tests.
///
/// Gather and scatter are scalar loops with checked indexing.
#[derive(Debug, Clone, Copy, PartialEq)]
#[repr(transparent)]
pub struct Block<E, const W: usize>(pub [E; W]);

impl<E: Element, const W: usize> Block<E, W> {
    const WIDTH: usize = {
        assert!(W.is_power_of_two() && W >= 4 && W <= 16, "lane width must be 4, 8 or 16");
        W
    };

    pub fn new(lanes: [E; W]) -> Self {
        Self(lanes)
    }

    pub fn lanes(&self) -> &[E; W] {
        &self.0
    }
}

impl<E: Element, const W: usize> Vector<E> for Block<E, W> {
    const LANES: usize = Self::WIDTH;
    type Index = [u32; W];

    #[inline(always)]
    fn splat(value: E) -> Self {
        Self([value; W])
    }

    #[inline(always)]
    fn load(src: &[E]) -> Self {
        let mut lanes = [E::ZERO; W];
        lanes.copy_from_slice(&src[..W]);
        Self(lanes)
    }

    #[inline(always)]
    fn store(self, dst: &mut [E]) {
        dst[..W].copy_from_slice(&self.0);
    }

    #[inline(always)]
    fn add(self, rhs: Self) -> Self {
        let mut out = self.0;
        for (o, r) in out.iter_mut().zip(rhs.0) {
            *o = o.add(r);
        }
        Self(out)
    }

    /// Concatenate a zero vector below `self` and extract `W` lanes
    /// starting `k` lanes below the top of the zeros.
    #[inline(always)]
    fn shift_in_zeros(self, k: usize) -> Self {
        assert!(k <= W);
        let mut joined = [[E::ZERO; W]; 2];
        joined[1] = self.0;
        let flat = joined.as_flattened();
        let mut out = [E::ZERO; W];
        out.copy_from_slice(&flat[W - k..2 * W - k]);
        Self(out)
    }

    #[inline(always)]
    fn broadcast_last(self) -> Self {
        Self([self.0[W - 1]; W])
    }

    #[inline(always)]
    fn lane(self, i: usize) -> E {
        self.0[i]
    }

    #[inline(always)]
    fn reduce(self) -> E {
        self.0.iter().fold(E::ZERO, |acc, &v| acc.add(v))
    }

    #[inline(always)]
    fn index_strided(start: u32, stride: u32) -> [u32; W] {
        std::array::from_fn(|i| start + i as u32 * stride)
    }

    #[inline(always)]
    fn index_add(index: [u32; W], delta: u32) -> [u32; W] {
        index.map(|i| i + delta)
    }

    #[inline(always)]
    unsafe fn gather(data: &[E], index: [u32; W]) -> Self {
        Self(index.map(|i| data[i as usize]))
    }

    #[inline(always)]
    unsafe fn scatter(self, data: &mut [E], index: [u32; W]) {
        for (value, i) in self.0.into_iter().zip(index) {
            data[i as usize] = value;
        }
    }
}
