use super::*;
use crate::element::first_mismatch;
use crate::scan::reference_scan;
use crate::simd::Width;
use rand::Rng;

fn random(n: usize, seed: u64) -> Vec<u32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random()).collect()
}

fn kernels() -> Vec<Kernel> {
    let mut k = vec![Kernel::Scalar, Kernel::Simd(Simd::portable(Width::W4)), Kernel::Simd(Simd::portable(Width::W16))];
    if let Some(native) = Simd::native() {
        k.push(Kernel::Simd(native));
    }
    k
}

fn check(config: EngineConfig, input: &[u32]) {
    let expected = reference_scan(input);
    let engine = Engine::new(config).unwrap();

    let mut data = input.to_vec();
    let report = engine.run(&mut data).unwrap();
    if let Some(m) = first_mismatch(&expected, &data) {
        panic!("in place, {config:?}, n={}: {m:?}", input.len());
    }
    assert_eq!(report.total, expected.last().copied().unwrap_or(0));
    assert_eq!(report.barrier_phases, report.iterations);

    let mut dst = vec![0xDEAD_BEEF; input.len()];
    engine.run_into(input, &mut dst).unwrap();
    if let Some(m) = first_mismatch(&expected, &dst) {
        panic!("out of place, {config:?}, n={}: {m:?}", input.len());
    }
}

#[test]
fn every_scheme_kernel_and_shape_matches_the_oracle() {
    let dilations = [Dilation::EQUAL, Dilation::new(0.5, 0.5).unwrap(), Dilation::new(0.0, 0.25).unwrap()];
    for (case, n) in [0, 1, 15, 16, 17, 100, 1000, 4099, 20_000].into_iter().enumerate() {
        let input = random(n, case as u64);
        for kernel in kernels() {
            for scheme in SchemeId::ALL {
                for threads in [1, 2, 3, 5] {
                    for block_len in [0, 16, 48, 1024] {
                        for dilation in dilations {
                            let config = EngineConfig::new(kernel, scheme, threads)
                                .block_len(block_len)
                                .dilation(dilation)
                                .pin_threads(false);
                            check(config, &input);
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn barrier_phases_equal_iterations() {
    let input = random(10_000, 7);
    for block_len in [0, 16, 100, 2500, 5000] {
        let config = EngineConfig::new(Kernel::Scalar, SchemeId::SCAN_INCREMENT, 2).block_len(block_len);
        let engine = Engine::new(config).unwrap();
        let expected_iterations = if block_len == 0 { 1 } else { 10_000usize.div_ceil(block_len * 2) };
        let report = engine.run(&mut input.clone()).unwrap();
        assert_eq!(report.iterations, expected_iterations);
        assert_eq!(report.barrier_phases, expected_iterations);
    }
}

#[test]
fn work_follows_the_plan_roles() {
    let n = 1 << 14;
    let threads = 4;
    let simd = Kernel::Simd(Simd::portable(Width::W16));
    let run = |scheme, dilation| {
        let config = EngineConfig::new(simd, scheme, threads).dilation(dilation);
        Engine::new(config).unwrap().run(&mut random(n, 1)).unwrap().work
    };

    // Thread 0's span needs no increment.
    let work = run(SchemeId::SCAN_INCREMENT, Dilation::EQUAL);
    assert_eq!(work[0].pass(Pass::Second).spans, 0);
    assert!(work[1..].iter().all(|w| w.pass(Pass::Second).spans == 1));

    // The last span is not accumulated.
    let work = run(SchemeId::ACCUMULATE_SCAN, Dilation::EQUAL);
    assert_eq!(work[threads - 1].pass(Pass::First).spans, 0);

    // The +1 schemes keep every thread busy in both passes.
    for scheme in [SchemeId::SCAN_INCREMENT_PLUS_ONE, SchemeId::ACCUMULATE_SCAN_PLUS_ONE] {
        let work = run(scheme, Dilation::new(0.5, 0.5).unwrap());
        for w in &work {
            assert!(w.passes.iter().all(|p| p.spans >= 1), "{scheme}: {work:?}");
        }
        let total: usize = work.iter().map(|w| w.pass(Pass::Second).elements).sum();
        assert!(total > 0 && total <= n);
    }
}

#[test]
fn elements_are_touched_the_expected_number_of_times() {
    let n = 50_000;
    let config = EngineConfig::new(Kernel::Scalar, SchemeId::SCAN_INCREMENT, 3).block_len(1000);
    let report = Engine::new(config).unwrap().run(&mut random(n, 3)).unwrap();
    let first: usize = report.work.iter().map(|w| w.pass(Pass::First).elements).sum();
    assert_eq!(first, n);
}

#[test]
fn overlapping_iterations_survive_jitter() {
    let block_len = 16;
    let threads = 4;
    let iterations = 10_000;
    let input = random(block_len * threads * iterations, 11);
    let expected = reference_scan(&input);
    for scheme in [SchemeId::SCAN_INCREMENT, SchemeId::ACCUMULATE_SCAN_PLUS_ONE] {
        let config = EngineConfig::new(Kernel::Simd(Simd::portable(Width::W16)), scheme, threads)
            .block_len(block_len)
            .dilation(Dilation::new(0.5, 0.5).unwrap())
            .pin_threads(false);
        let engine =
            Engine::new(config).unwrap().with_jitter(Jitter { seed: 99, max_delay: Duration::from_micros(20) });
        let mut data = input.clone();
        let report = engine.run(&mut data).unwrap();
        assert_eq!(report.iterations, iterations);
        assert_eq!(first_mismatch(&expected, &data), None, "{scheme}");
    }
}

#[test]
fn floats_stay_close() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let input: Vec<f32> = (0..20_000).map(|_| rng.random_range(0.0..1.0)).collect();
    let expected = reference_scan(&input);
    for scheme in SchemeId::ALL {
        let config = EngineConfig::new(Kernel::Simd(Simd::detect()), scheme, 4).block_len(4096);
        let mut data = input.clone();
        Engine::new(config).unwrap().run(&mut data).unwrap();
        assert_eq!(first_mismatch(&expected, &data), None, "{scheme}");
    }
}

#[test]
fn zero_threads_rejected() {
    assert!(Engine::new(EngineConfig::new(Kernel::Scalar, SchemeId::SCAN_INCREMENT, 0)).is_err());
}

#[test]
fn mismatched_lengths_rejected() {
    let engine = Engine::new(EngineConfig::new(Kernel::Scalar, SchemeId::SCAN_INCREMENT, 2)).unwrap();
    assert!(engine.run_into(&[1u32, 2, 3], &mut [0; 2]).is_err());
}

#[test]
fn block_shorter_than_vector_rejected() {
    let config = EngineConfig::new(Kernel::Simd(Simd::portable(Width::W16)), SchemeId::SCAN_INCREMENT, 2).block_len(8);
    assert!(Engine::new(config).unwrap().run(&mut [0u32; 100]).is_err());
}

#[test]
fn worker_panic_does_not_hang() {
    let barrier = SpinBarrier::new(2);
    barrier.poison();
    let result = panic::catch_unwind(AssertUnwindSafe(|| barrier.wait()));
    assert!(result.is_err());
}
