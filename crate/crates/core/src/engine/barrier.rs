use std::hint::spin_loop;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::thread;

/// Busy-wait iterations before a waiter starts yielding its time slice.
const SPIN_LIMIT: u32 = 128;

#[repr(align(64))]
struct Padded<T>(T);

/// Reusable counting barrier built on two atomics.
///
/// Arrivals increment a counter; the last one resets it and bumps the
/// generation, releasing everyone spinning on the old generation. Waiters
/// spin briefly and then yield, so oversubscribed runs still make progress.
///
/// Everything written before [`SpinBarrier::wait`] by any participant is
/// visible to every participant after it returns.
pub struct SpinBarrier {
    participants: usize,
    arrived: Padded<AtomicUsize>,
    generation: Padded<AtomicUsize>,
    poisoned: AtomicBool,
}

impl SpinBarrier {
    pub fn new(participants: usize) -> Self {
        assert!(participants >= 1, "a barrier needs at least one participant");
        Self {
            participants,
            arrived: Padded(AtomicUsize::new(0)),
            generation: Padded(AtomicUsize::new(0)),
            poisoned: AtomicBool::new(false),
        }
    }

    pub fn participants(&self) -> usize {
        self.participants
    }

    /// Completed phases so far.
    pub fn generation(&self) -> usize {
        self.generation.0.load(Ordering::Acquire)
    }

    /// Release current and future waiters with a panic. Used when a
    /// participant dies and will never arrive.
    pub fn poison(&self) {
        self.poisoned.store(true, Ordering::Release);
    }

    /// Block until all participants of the current phase have arrived.
    /// Returns `true` in exactly one participant per phase (the last to arrive).
    pub fn wait(&self) -> bool {
        let generation = self.generation.0.load(Ordering::Acquire);
        let position = self.arrived.0.fetch_add(1, Ordering::AcqRel) + 1;
        debug_assert!(position <= self.participants, "more arrivals than participants");
        if position == self.participants {
            self.arrived.0.store(0, Ordering::Relaxed);
            self.generation.0.fetch_add(1, Ordering::Release);
            return true;
        }
        let mut spins = 0;
        while self.generation.0.load(Ordering::Acquire) == generation {
            if self.poisoned.load(Ordering::Acquire) {
                panic!("a barrier participant panicked");
            }
            if spins < SPIN_LIMIT {
                spin_loop();
                spins += 1;
            } else {
                thread::yield_now();
            }
        }
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::AtomicBool;
    use std::sync::Arc;

    #[test]
    fn single_participant_never_blocks() {
        let b = SpinBarrier::new(1);
        for _ in 0..10 {
            assert!(b.wait());
        }
        assert_eq!(b.generation(), 10);
    }

    #[test]
    fn every_thread_sees_every_generation() {
        const THREADS: usize = 4;
        const ROUNDS: usize = 100_000;
        let barrier = Arc::new(SpinBarrier::new(THREADS));
        let leaders = Arc::new(AtomicUsize::new(0));
        let handles: Vec<_> = (0..THREADS)
            .map(|_| {
                let barrier = Arc::clone(&barrier);
                let leaders = Arc::clone(&leaders);
                thread::spawn(move || {
                    let mut seen = Vec::with_capacity(ROUNDS);
                    for _ in 0..ROUNDS {
                        seen.push(barrier.generation());
                        if barrier.wait() {
                            leaders.fetch_add(1, Ordering::Relaxed);
                        }
                    }
                    seen
                })
            })
            .collect();
        for h in handles {
            let seen = h.join().unwrap();
            assert!(seen.iter().enumerate().all(|(i, &g)| g == i));
        }
        assert_eq!(barrier.generation(), ROUNDS);
        assert_eq!(leaders.load(Ordering::Relaxed), ROUNDS);
    }

    #[test]
    fn writes_before_wait_are_visible_after() {
        for _ in 0..200 {
            let barrier = Arc::new(SpinBarrier::new(2));
            let flag = Arc::new(AtomicBool::new(false));
            let writer = {
                let barrier = Arc::clone(&barrier);
                let flag = Arc::clone(&flag);
                thread::spawn(move || {
                    flag.store(true, Ordering::Relaxed);
                    barrier.wait();
                })
            };
            barrier.wait();
            assert!(flag.load(Ordering::Relaxed));
            writer.join().unwrap();
        }
    }
}
