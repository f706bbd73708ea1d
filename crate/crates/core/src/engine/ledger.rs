use std::marker::PhantomData;
use std::sync::atomic::{AtomicU32, Ordering};

use crate::element::Element;

/// Per-iteration partition totals, double-buffered.
///
/// Iteration `k` writes `buffers[k % 2]` during pass 1 and everyone reads it
/// after the barrier. Pass 1 of iteration `k + 1` writes the other buffer,
/// so it can overlap pass 2 of iteration `k`; the buffer it will overwrite
/// next was last read in pass 2 of iteration `k - 1`, which finished before
/// the barrier of iteration `k`.
///
/// Slots are relaxed atomics: the barrier supplies the ordering.
pub(crate) struct SumsLedger<E> {
    buffers: [Sums; 2],
    _element: PhantomData<E>,
}

struct Sums {
    /// Running total of everything before this iteration's region.
    base: AtomicU32,
    totals: Box<[AtomicU32]>,
}

impl Sums {
    fn new(slots: usize) -> Self {
        Self { base: AtomicU32::new(0), totals: (0..slots).map(|_| AtomicU32::new(0)).collect() }
    }
}

impl<E: Element> SumsLedger<E> {
    pub fn new(slots: usize) -> Self {
        Self { buffers: [Sums::new(slots), Sums::new(slots)], _element: PhantomData }
    }

    pub fn for_iteration(&self, iteration: usize) -> LedgerView<'_, E> {
        LedgerView { sums: &self.buffers[iteration % 2], _element: PhantomData }
    }
}

#[derive(Clone, Copy)]
pub(crate) struct LedgerView<'a, E> {
    sums: &'a Sums,
    _element: PhantomData<E>,
}

impl<E: Element> LedgerView<'_, E> {
    pub fn set_base(&self, value: E) {
        self.sums.base.store(value.to_bits(), Ordering::Relaxed);
    }

    pub fn base(&self) -> E {
        E::from_bits(self.sums.base.load(Ordering::Relaxed))
    }

    pub fn set_total(&self, slot: usize, value: E) {
        self.sums.totals[slot].store(value.to_bits(), Ordering::Relaxed);
    }

    pub fn total(&self, slot: usize) -> E {
        E::from_bits(self.sums.totals[slot].load(Ordering::Relaxed))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn buffers_alternate() {
        let ledger = SumsLedger::<f32>::new(3);
        ledger.for_iteration(0).set_total(1, 2.5);
        ledger.for_iteration(1).set_total(1, 7.0);
        assert_eq!(ledger.for_iteration(2).total(1), 2.5);
        assert_eq!(ledger.for_iteration(3).total(1), 7.0);
        ledger.for_iteration(4).set_base(1.5);
        assert_eq!(ledger.for_iteration(0).base(), 1.5);
    }
}
