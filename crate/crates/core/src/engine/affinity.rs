//! Best-effort thread pinning. No-op outside Linux or when the call fails.

#[cfg(target_os = "linux")]
mod imp {
    use std::mem;

    #[derive(Clone)]
    pub struct CpuMask(libc::cpu_set_t);

    pub fn current() -> Option<CpuMask> {
        // SAFETY: cpu_set_t is plain data; the kernel fills it.
        unsafe {
            let mut set: libc::cpu_set_t = mem::zeroed();
            (libc::sched_getaffinity(0, mem::size_of::<libc::cpu_set_t>(), &mut set) == 0).then_some(CpuMask(set))
        }
    }

    pub fn allowed_cpus(mask: &CpuMask) -> Vec<usize> {
        (0..libc::CPU_SETSIZE as usize)
            // SAFETY: index is below CPU_SETSIZE.
            .filter(|&cpu| unsafe { libc::CPU_ISSET(cpu, &mask.0) })
            .collect()
    }

    pub fn set(mask: &CpuMask) -> bool {
        // SAFETY: pins the calling thread to a valid mask.
        unsafe { libc::sched_setaffinity(0, mem::size_of::<libc::cpu_set_t>(), &mask.0) == 0 }
    }

    pub fn single(cpu: usize) -> CpuMask {
        // SAFETY: as above.
        unsafe {
            let mut set: libc::cpu_set_t = mem::zeroed();
            libc::CPU_SET(cpu, &mut set);
            CpuMask(set)
        }
    }
}

#[cfg(not(target_os = "linux"))]
mod imp {
    #[derive(Clone)]
    pub struct CpuMask;

    pub fn current() -> Option<CpuMask> {
        None
    }

    pub fn allowed_cpus(_: &CpuMask) -> Vec<usize> {
        Vec::new()
    }

    pub fn set(_: &CpuMask) -> bool {
        false
    }

    pub fn single(_: usize) -> CpuMask {
        CpuMask
    }
}

/// Pins worker `t` to the `t`-th allowed CPU (wrapping), and restores the
/// calling thread's original mask when dropped.
pub(crate) struct Pinning {
    original: Option<imp::CpuMask>,
    cpus: Vec<usize>,
}

impl Pinning {
    pub fn new(enabled: bool) -> Self {
        let original = if enabled { imp::current() } else { None };
        let cpus = original.as_ref().map(imp::allowed_cpus).unwrap_or_default();
        Self { original, cpus }
    }

    /// Pin the calling thread as worker `worker`.
    pub fn pin(&self, worker: usize) {
        if !self.cpus.is_empty() {
            imp::set(&imp::single(self.cpus[worker % self.cpus.len()]));
        }
    }
}

impl Drop for Pinning {
    fn drop(&mut self) {
        if let Some(mask) = &self.original {
            imp::set(mask);
        }
    }
}
