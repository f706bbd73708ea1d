//! CPU cache sizes and core counts, read from sysfs on Linux.
//!
//! Containers sometimes hide or misreport the topology, so the L2 size can
//! be overridden with `PREFIX_SCAN_L2_ELEMENTS` (in 4-byte elements).

use std::fs;
use std::path::Path;

/// Environment variable overriding the detected L2 size, in elements.
pub const L2_OVERRIDE_ENV: &str = "PREFIX_SCAN_L2_ELEMENTS";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CacheInfo {
    pub l1d_bytes: Option<usize>,
    pub l2_bytes: Option<usize>,
    pub l3_bytes: Option<usize>,
    /// Hardware threads sharing one core.
    pub threads_per_core: usize,
    pub logical_cpus: usize,
}

impl CacheInfo {
    pub fn unknown() -> Self {
        Self {
            l1d_bytes: None,
            l2_bytes: None,
            l3_bytes: None,
            threads_per_core: 1,
            logical_cpus: std::thread::available_parallelism().map_or(1, |n| n.get()),
        }
    }

    /// Query the platform, then apply the environment override.
    pub fn detect() -> Self {
        let mut info = Self::from_sysfs(Path::new("/sys/devices/system/cpu")).unwrap_or_else(Self::unknown);
        if let Some(elements) = std::env::var(L2_OVERRIDE_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()) {
            info.l2_bytes = Some(elements * 4);
        }
        info
    }

    /// Read `cpu0`'s cache descriptors under a sysfs cpu directory.
    pub fn from_sysfs(root: &Path) -> Option<Self> {
        let cache_dir = root.join("cpu0/cache");
        let mut info = Self::unknown();
        let mut found = false;
        for entry in fs::read_dir(&cache_dir).ok()?.flatten() {
            let dir = entry.path();
            if !dir.file_name()?.to_str()?.starts_with("index") {
                continue;
            }
            let read = |name: &str| fs::read_to_string(dir.join(name)).ok().map(|s| s.trim().to_owned());
            let (Some(level), Some(kind), Some(size)) = (read("level"), read("type"), read("size")) else {
                continue;
            };
            let Some(bytes) = parse_size(&size) else { continue };
            match (level.as_str(), kind.as_str()) {
                ("1", "Data" | "Unified") => info.l1d_bytes = Some(bytes),
                ("2", _) => info.l2_bytes = Some(bytes),
                ("3", _) => info.l3_bytes = Some(bytes),
                _ => continue,
            }
            found = true;
        }
        if let Ok(siblings) = fs::read_to_string(root.join("cpu0/topology/thread_siblings_list")) {
            info.threads_per_core = count_cpu_list(siblings.trim()).max(1);
        }
        found.then_some(info)
    }

    /// Physical cores available to this process.
    pub fn physical_cores(&self) -> usize {
        (self.logical_cpus / self.threads_per_core.max(1)).max(1)
    }

    /// Hardware threads that will share each core's L2 when running
    /// `threads` workers spread over the physical cores.
    pub fn sharing_per_core(&self, threads: usize) -> usize {
        threads.div_ceil(self.physical_cores()).clamp(1, self.threads_per_core.max(1))
    }
}

/// Parse sysfs sizes like `48K`, `2048K`, `105M`.
pub fn parse_size(text: &str) -> Option<usize> {
    let text = text.trim();
    let (digits, unit) = match text.char_indices().find(|(_, c)| !c.is_ascii_digit()) {
        Some((i, _)) => text.split_at(i),
        None => (text, ""),
    };
    let value: usize = digits.parse().ok()?;
    let scale = match unit.trim() {
        "" => 1,
        "K" | "KB" | "KiB" => 1 << 10,
        "M" | "MB" | "MiB" => 1 << 20,
        "G" | "GB" | "GiB" => 1 << 30,
        _ => return None,
    };
    Some(value * scale)
}

/// Count the CPUs in a list such as `0,48` or `0-1`.
fn count_cpu_list(list: &str) -> usize {
    list.split(',')
        .filter(|s| !s.is_empty())
        .map(|part| match part.split_once('-') {
            Some((a, b)) => match (a.trim().parse::<usize>(), b.trim().parse::<usize>()) {
                (Ok(a), Ok(b)) if b >= a => b - a + 1,
                _ => 1,
            },
            None => 1,
        })
        .sum()
}
