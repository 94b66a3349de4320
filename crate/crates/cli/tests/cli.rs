//! End-to-end behaviour of the `extmil` binary.

use std::path::Path;
use std::process::{Command, Output};

fn extmil(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_extmil"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn check_reports_commutativity() {
    let dir = tempfile::tempdir().unwrap();
    let o = extmil(dir.path(), &["check", "--model", "bs-asian"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("commutative: true, max defect: 0 at (100, 0), phi3 max: 0"), "{}", stdout(&o));

    let o = extmil(dir.path(), &["check", "--model", "heston-asian"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(
        stdout(&o).contains("commutative: false, max defect: 3.5707142143 at (100, 0.09, 0), phi3 max: 1.59375"),
        "{}",
        stdout(&o)
    );

    let o = extmil(dir.path(), &["check", "--model", "gbm", "--samples", "10"]);
    assert!(stdout(&o).contains("commutative: true"));
}

#[test]
fn usage_errors_exit_two_and_write_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("never");
    let out_s = out.to_str().unwrap();
    let cases: &[&[&str]] = &[
        &["price", "--model", "bs-asian", "--scheme", "foo", "--strike", "100"],
        &["price", "--model", "bs-asian", "--strike", "-5", "--out", out_s],
        &["price", "--model", "bs-asian", "--strike", "0", "--out", out_s],
        &["price", "--model", "cir", "--strike", "100"],
        &["price", "--model", "gbm", "--strike", "100"],
        &["sweep", "--model", "bs-asian", "--strikes", "10:5:1", "--out", out_s],
        &["sweep", "--model", "heston-asian", "--param", "nu=0.7", "--param", "alpha=1", "--out", out_s],
        &["sweep", "--model", "bs-asian", "--qmc", "--replications", "16", "--paths", "100", "--out", out_s],
        &["sweep", "--out", out_s],
        &["check", "--model", "nope"],
        &["frobnicate"],
    ];
    for args in cases {
        let o = extmil(dir.path(), args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", stderr(&o));
        assert!(!out.exists(), "{args:?} created output");
    }
    let o = extmil(dir.path(), &["price", "--model", "bs-asian", "--scheme", "foo", "--strike", "100"]);
    assert!(stderr(&o).contains("em, tmilstein, extended"));
    let o = extmil(dir.path(), &["price", "--model", "bs-asian", "--strike", "-5"]);
    assert!(stderr(&o).contains("--strike"));
    let o = extmil(dir.path(), &["sweep", "--model", "heston-asian", "--param", "nu=0.7", "--param", "alpha=1"]);
    assert!(stderr(&o).contains("2*alpha*theta > nu^2"));
}

#[test]
fn missing_benchmark_is_a_runtime_error_with_a_hint() {
    let dir = tempfile::tempdir().unwrap();
    let o = extmil(dir.path(), &["sweep", "--model", "bs-asian", "--strikes", "100:100:10", "--paths", "100"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--make-benchmark"), "{}", stderr(&o));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn price_is_deterministic_and_matches_the_recorded_value() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "price", "--model", "bs-asian", "--scheme", "extended", "--payoff", "asian-call", "--strike", "100", "--n", "16",
        "--paths", "100000", "--seed", "7",
    ];
    let a = extmil(dir.path(), &args);
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    let mut threaded = args.to_vec();
    threaded.extend(["--threads", "3"]);
    let b = extmil(dir.path(), &threaded);
    assert_eq!(stdout(&a), stdout(&b));
    let golden = include_str!("golden/price_bs_extended.txt");
    assert_eq!(stdout(&a).lines().next(), golden.lines().next());
}

#[test]
fn single_strike_sweep_writes_schema_csvs_and_replays_identically() {
    let dir = tempfile::tempdir().unwrap();
    let o = extmil(
        dir.path(),
        &[
            "sweep", "--model", "heston-asian", "--schemes", "em,tmilstein,extended", "--n", "2,4", "--strikes",
            "100:100:10", "--qmc", "--replications", "4", "--paths", "2048", "--bench-paths", "4000", "--bench-steps",
            "16", "--make-benchmark", "--seed", "1", "--out", "run1", "--threads", "1",
        ],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let sweep = std::fs::read_to_string(dir.path().join("run1/sweep.csv")).unwrap();
    let mut lines = sweep.lines();
    assert_eq!(lines.next(), Some("scheme,n,K,M,estimate,stderr,benchmark,error"));
    assert_eq!(lines.count(), 3 * 2);
    let summary = std::fs::read_to_string(dir.path().join("run1/summary.csv")).unwrap();
    assert!(summary.starts_with("scheme,n,sup_error,K,estimate_stderr,benchmark_stderr\n"));
    let cache: Vec<_> = std::fs::read_dir(dir.path().join(".extmil-cache")).unwrap().collect();
    assert_eq!(cache.len(), 1);

    let o = extmil(dir.path(), &["replay", "run1/sweep.manifest", "--threads", "2", "--out", "run2"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for f in ["sweep.csv", "summary.csv"] {
        assert_eq!(
            std::fs::read(dir.path().join("run1").join(f)).unwrap(),
            std::fs::read(dir.path().join("run2").join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn convergence_recovers_synthetic_orders() {
    let dir = tempfile::tempdir().unwrap();
    let mut csv = String::from("scheme,n,K,M,estimate,stderr,benchmark,error\n");
    for n in [2usize, 4, 8, 16] {
        let e1 = 1.0 / n as f64;
        let e2 = 1.0 / (n * n) as f64;
        csv.push_str(&format!("em,{n},100,1000,{},0,1,{e1}\n", 1.0 - e1));
        csv.push_str(&format!("extended,{n},100,1000,{},0,1,{e2}\n", 1.0 - e2));
    }
    std::fs::write(dir.path().join("synthetic.csv"), csv).unwrap();
    let o = extmil(dir.path(), &["convergence", "--input", "synthetic.csv", "--out", "conv"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("em: weak order 1 "), "{out}");
    assert!(out.contains("extended: weak order 2 "), "{out}");
    let orders = std::fs::read_to_string(dir.path().join("conv/orders.csv")).unwrap();
    assert!(orders.starts_with("scheme,order,"));
    let ratios = std::fs::read_to_string(dir.path().join("conv/ratios.csv")).unwrap();
    assert_eq!(ratios.lines().count(), 5);
}

#[test]
fn benchmark_command_fills_the_cache_and_compares_closed_forms() {
    let dir = tempfile::tempdir().unwrap();
    let o = extmil(
        dir.path(),
        &["benchmark", "--model", "small-diffusion", "--strikes", "0.5,0.6", "--bench-paths", "20000", "--bench-steps", "64"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.starts_with("K,value,stderr\n0.5,"), "{out}");
    assert!(out.contains("closed form available"));
}
