use std::process::{Command, Output};

use prefix_scan::bench;
use prefix_scan::element::{checksum, random_input};
use prefix_scan::scan::reference_scan;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_prefix-scan")).args(args).output().expect("binary runs")
}

fn run_line(line: &str) -> Output {
    run(&line.split_whitespace().collect::<Vec<_>>())
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn field<'a>(text: &'a str, key: &str) -> &'a str {
    text.lines()
        .find_map(|line| line.strip_prefix(key)?.strip_prefix(": "))
        .unwrap_or_else(|| panic!("no {key} in {text}"))
}

#[test]
fn verify_small_matrix_exits_zero() {
    let out = run(&["verify", "--n", "20000", "--threads", "1,4", "--random-sizes", "3", "--quiet"]);
    assert!(out.status.success(), "{}{}", stdout(&out), String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("cases passed"));
}

#[test]
fn partitioned_scan_matches_the_oracle() {
    let n = 50_001;
    let out = run_line("scan --algo SIMD1-P --n 50001 --threads 3 --block-len 256 --seed 9 --no-pin");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    let expected = reference_scan(&random_input::<u32>(n, 9));
    assert_eq!(field(&text, "total"), expected[n - 1].to_string());
    assert_eq!(field(&text, "checksum"), format!("{:#018x}", checksum(&expected)));
}

#[test]
fn float_scan_out_of_place_succeeds() {
    let out = run(&["scan", "--algo", "SIMD-T", "--n", "300000", "--elem", "f32", "--out-of-place"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn empty_bench_is_graceful() {
    let out = run(&["bench", "--algo", "Scalar,SIMD2-P", "--n", "0", "--threads", "2", "--block-len", "64"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let records = bench::read_csv(out.stdout.as_slice()).unwrap();
    assert_eq!(records.len(), 2);
    assert!(records.iter().all(|r| r.n == 0 && r.throughput_eps == 0.0));
}

#[test]
fn bench_checksums_are_deterministic() {
    let args =
        ["bench", "--algo", "SIMD2,Scalar2-P", "--n", "40000", "--threads", "2", "--block-len", "512", "--elem", "f32"];
    let sums = |out: Output| {
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        bench::read_csv(out.stdout.as_slice()).unwrap().into_iter().map(|r| r.checksum).collect::<Vec<_>>()
    };
    assert_eq!(sums(run(&args)), sums(run(&args)));
}

#[test]
fn sweep_writes_one_record_per_point() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sweep.csv");
    let out = run_line(&format!(
        "sweep --algo Scalar1-P --dim dilation --grid 0.5,1 --n 30000 --threads 2 --block-len 1024 --csv {}",
        path.display()
    ));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let records = bench::read_csv(std::fs::File::open(&path).unwrap()).unwrap();
    assert_eq!(records.iter().map(|r| r.d0).collect::<Vec<_>>(), [0.5, 1.0]);
}

#[test]
fn usage_errors_exit_two() {
    for args in [
        &["scan", "--algo", "SIMD9"][..],
        &["scan", "--algo", "SIMD1-P", "--block-len", "0", "--threads", "2"],
        &["bench", "--reps", "2", "--n", "10"],
        &["verify", "--threads", "0"],
        &["frobnicate"],
    ] {
        let out = run(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
}
