//! Cross-checks every algorithm against the sequential scan.

use std::fmt;

use crate::algo::{Algorithm, RunConfig};
use crate::element::{first_mismatch, random_input, Element};
use crate::plan::Dilation;
use crate::scan::reference_scan;
use crate::simd::Simd;

/// Partition length used by the matrix for algorithms that partition.
/// Small enough that mid-sized inputs run many iterations.
pub const DEFAULT_VERIFY_BLOCK_LEN: usize = 4096;

/// Which combinations to run.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub algos: Vec<Algorithm>,
    pub sizes: Vec<usize>,
    /// Only applied to threaded algorithms; the others run once per size.
    pub threads: Vec<usize>,
    pub out_of_place: Vec<bool>,
    pub block_len: usize,
    pub dilation: Dilation,
    pub seed: u64,
    pub simd: Simd,
}

impl Matrix {
    pub fn new(sizes: Vec<usize>, threads: Vec<usize>) -> Self {
        Self {
            algos: Algorithm::ALL.to_vec(),
            sizes,
            threads,
            out_of_place: vec![false, true],
            block_len: DEFAULT_VERIFY_BLOCK_LEN,
            dilation: Dilation::EQUAL,
            seed: 0,
            simd: Simd::detect(),
        }
    }

    /// Every case as a run configuration, in execution order for one size.
    pub fn configs(&self) -> Vec<(RunConfig, bool)> {
        let mut configs = Vec::new();
        for &algo in &self.algos {
            let threads: &[usize] = if algo.is_threaded() { &self.threads } else { &[1] };
            for &t in threads {
                for &oop in &self.out_of_place {
                    let config = RunConfig::new(algo)
                        .simd(self.simd)
                        .threads(t)
                        .block_len(self.block_len)
                        .dilation(self.dilation);
                    configs.push((config, oop));
                }
            }
        }
        configs
    }

    /// Run every case, reporting each one to `on_case` as it finishes.
    pub fn run<E: Element>(&self, mut on_case: impl FnMut(&CaseResult)) -> Summary {
        let mut summary = Summary::default();
        let configs = self.configs();
        for &n in &self.sizes {
            let input = random_input::<E>(n, self.seed);
            let expected = reference_scan(&input);
            for &(config, out_of_place) in &configs {
                let result = CaseResult {
                    algo: config.algo,
                    elem: E::NAME,
                    n,
                    threads: config.effective_threads(),
                    out_of_place,
                    failure: check_case(&config, out_of_place, &input, &expected).err(),
                };
                on_case(&result);
                summary.record(result);
            }
        }
        summary
    }
}

fn check_case<E: Element>(config: &RunConfig, out_of_place: bool, input: &[E], expected: &[E]) -> Result<(), String> {
    let runner = config.runner().map_err(|e| e.to_string())?;
    let mut output = if out_of_place { vec![E::ZERO; input.len()] } else { input.to_vec() };
    let outcome = if out_of_place { runner.run_into(input, &mut output) } else { runner.run(&mut output) }
        .map_err(|e| e.to_string())?;
    if let Some(m) = first_mismatch(expected, &output) {
        return Err(m.to_string());
    }
    let last = output.last().copied().unwrap_or(E::ZERO);
    if outcome.total.to_bits() != last.to_bits() {
        return Err(format!("returned total {} but last element is {last}", outcome.total));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseResult {
    pub algo: Algorithm,
    pub elem: &'static str,
    pub n: usize,
    pub threads: usize,
    pub out_of_place: bool,
    /// `None` when the output matched.
    pub failure: Option<String>,
}

impl CaseResult {
    pub fn passed(&self) -> bool {
        self.failure.is_none()
    }
}

impl fmt::Display for CaseResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mode = if self.out_of_place { "out-of-place" } else { "in-place" };
        write!(
            f,
            "{:<10} {:<4} n={:<9} threads={:<2} {:<12} ",
            self.algo.label(),
            self.elem,
            self.n,
            self.threads,
            mode
        )?;
        match &self.failure {
            None => f.write_str("PASS"),
            Some(why) => write!(f, "FAIL ({why})"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Summary {
    pub passed: usize,
    pub failures: Vec<CaseResult>,
}

impl Summary {
    fn record(&mut self, result: CaseResult) {
        if result.passed() {
            self.passed += 1;
        } else {
            self.failures.push(result);
        }
    }

    pub fn total(&self) -> usize {
        self.passed + self.failures.len()
    }

    pub fn all_passed(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn merge(&mut self, other: Summary) {
        self.passed += other.passed;
        self.failures.extend(other.failures);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_matrix_passes() {
        let mut matrix = Matrix::new(vec![0, 1, 33, 1000], vec![1, 3]);
        matrix.block_len = 64;
        let mut seen = 0;
        let summary = matrix.run::<u32>(|_| seen += 1);
        assert!(summary.all_passed(), "{:?}", summary.failures);
        // 5 single-thread algorithms + 8 threaded at 2 thread counts, both modes.
        assert_eq!(seen, 4 * (5 + 8 * 2) * 2);
        assert_eq!(summary.total(), seen);
    }

    #[test]
    fn float_matrix_passes_small() {
        let summary = Matrix::new(vec![5000], vec![4]).run::<f32>(|_| {});
        assert!(summary.all_passed(), "{:?}", summary.failures);
    }

    #[test]
    fn bad_config_is_a_failure_not_a_panic() {
        let mut matrix = Matrix::new(vec![100], vec![2]);
        matrix.algos = vec!["SIMD1-P".parse().unwrap()];
        matrix.block_len = 0;
        let summary = matrix.run::<u32>(|_| {});
        assert_eq!(summary.failures.len(), 2);
    }
}
