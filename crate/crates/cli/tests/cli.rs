use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use dcprox::problems::{read_instance, Kind};
use dcprox_cli::report::{SolveReport, Status, CSV_COLUMNS};

fn dcprox(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dcprox")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn read_report(path: &Path) -> SolveReport {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn gen_writes_a_valid_reproducible_instance() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    for path in [&a, &b] {
        let out = dcprox(&["gen", "--kind", "bc-private", "--n", "4", "--seed", "7", "--out", p(path)]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let (inst, prov) = read_instance::<f64>(&a).unwrap();
    inst.validate().unwrap();
    assert_eq!(inst.kind(), Kind::BcPrivate);
    assert_eq!(inst.dim(), 4);
    let prov = prov.unwrap();
    assert_eq!((prov.n, prov.seed, prov.cond), (4, 7, 10.0));
}

#[test]
fn usage_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("x.json");
    let cases: Vec<Vec<&str>> = vec![
        vec!["gen", "--kind", "bc-secret", "--n", "4", "--seed", "1", "--out", p(&out_path)],
        vec!["gen", "--kind", "bc-private", "--n", "0", "--seed", "1", "--out", p(&out_path)],
        vec!["gen", "--kind", "bc-private", "--n", "3", "--seed", "1", "--cond", "0.5", "--out", p(&out_path)],
        vec!["solve", "--kind", "bc-private", "--out", p(&out_path)],
        vec!["solve", "--instance", "/nonexistent/instance.json", "--out", p(&out_path)],
        vec!["solve", "--kind", "bc-private", "--n", "3", "--seed", "1", "--solver", "newton", "--out", p(&out_path)],
        vec!["solve", "--kind", "bc-private", "--n", "3", "--seed", "1", "--outer-tol", "0", "--out", p(&out_path)],
        vec!["bench", "--kind", "bc-private", "--n", "3", "--seeds", "", "--out", p(&out_path)],
        vec!["bench", "--kind", "bc-private", "--n", "3", "--seeds", "5..1", "--out", p(&out_path)],
        vec!["frobnicate"],
        vec![],
    ];
    for args in cases {
        let out = dcprox(&args);
        assert_eq!(code(&out), 1, "{args:?}");
        assert!(!out.stderr.is_empty(), "{args:?}");
    }
    assert!(!out_path.exists());
    assert_eq!(code(&dcprox(&["--help"])), 0);
    assert_eq!(code(&dcprox(&["--version"])), 0);
}

#[test]
fn thread_variable_is_validated() {
    let out =
        Command::new(env!("CARGO_BIN_EXE_dcprox")).args(["check"]).env("DCPROX_THREADS", "zero").output().unwrap();
    assert_eq!(code(&out), 1);
}

#[test]
fn solve_private_n20_converges_and_variants_agree() {
    let dir = tempfile::tempdir().unwrap();
    let mut finals = Vec::new();
    for solver in ["bregman", "euclidean"] {
        let out_path = dir.path().join(format!("{solver}.json"));
        let out = dcprox(&[
            "solve",
            "--kind",
            "bc-private",
            "--n",
            "20",
            "--seed",
            "1",
            "--solver",
            solver,
            "--out",
            p(&out_path),
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        let r = read_report(&out_path);
        assert_eq!(r.status, Status::Converged);
        assert!(r.totals.outer_iters <= 30, "{solver}: {} outer iterations", r.totals.outer_iters);
        assert_eq!(r.totals.inner_iters, r.iterations.iter().map(|i| i.inner_iters).sum::<usize>());
        assert_eq!(r.totals.wall_ms, r.iterations.iter().map(|i| i.wall_ms).sum::<u64>());
        let last = r.iterations.last().unwrap();
        let prev =
            if r.iterations.len() > 1 { r.iterations[r.iterations.len() - 2].objective } else { r.initial_objective };
        assert!((last.objective - prev).abs() / prev.abs().max(1.0) <= r.config.outer_tol);
        let d = r.diagnostics.as_ref().unwrap();
        assert!(d.rho_hat.unwrap() < 1.0);
        assert!(d.kkt_residual.unwrap() <= 1e-6);
        finals.push(r.final_objective);
    }
    assert!((finals[0] - finals[1]).abs() <= 1e-5 * (1.0 + finals[0].abs()), "{finals:?}");
}

#[test]
fn solve_from_instance_file_matches_synthetic_flags() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("inst.json");
    assert_eq!(code(&dcprox(&["gen", "--kind", "brascamp-lieb", "--n", "3", "--seed", "2", "--out", p(&inst)])), 0);
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    let out = dcprox(&["solve", "--instance", p(&inst), "--no-reference", "--out", p(&a)]);
    assert_eq!(code(&out), 0);
    let out =
        dcprox(&["solve", "--kind", "brascamp-lieb", "--n", "3", "--seed", "2", "--no-reference", "--out", p(&b)]);
    assert_eq!(code(&out), 0);
    let (ra, rb) = (read_report(&a), read_report(&b));
    assert_eq!(ra.instance, rb.instance);
    assert_eq!(ra.final_objective, rb.final_objective);
    assert_eq!(ra.diagnostics.unwrap().reference, dcprox_cli::report::ReferenceSource::Trace);
}

#[test]
fn iteration_cap_withholds_success() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("r.json");
    let out = dcprox(&[
        "solve",
        "--kind",
        "bc-private",
        "--n",
        "5",
        "--seed",
        "3",
        "--outer-tol",
        "1e-16",
        "--max-outer",
        "2",
        "--no-reference",
        "--out",
        p(&out_path),
    ]);
    assert_eq!(code(&out), 2);
    let r = read_report(&out_path);
    assert_eq!(r.status, Status::MaxIters);
    assert_eq!(r.totals.outer_iters, 2);
}

fn csv_rows(path: &Path) -> Vec<csv::StringRecord> {
    let mut rd = csv::Reader::from_path(path).unwrap();
    assert_eq!(rd.headers().unwrap().iter().collect::<Vec<_>>(), CSV_COLUMNS);
    rd.records().map(Result::unwrap).collect()
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * (1.0 + b.abs())
}

#[test]
fn bench_rows_are_means_of_the_reports() {
    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("bench.csv");
    let runs = dir.path().join("runs");
    let out = dcprox(&[
        "bench",
        "--kind",
        "bc-private",
        "--n",
        "20",
        "--seeds",
        "1..5",
        "--reports-dir",
        p(&runs),
        "--out",
        p(&csv_path),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let rows = csv_rows(&csv_path);
    assert_eq!(rows.len(), 2);
    for (row, variant) in rows.iter().zip(["bregman", "euclidean"]) {
        assert_eq!(&row[0], "bc-private");
        assert_eq!(&row[1], "20");
        assert_eq!(&row[2], variant);
        let reports: Vec<SolveReport> =
            (1..=5).map(|seed| read_report(&runs.join(format!("bc-private_n20_seed{seed}_{variant}.json")))).collect();
        let mean = |f: &dyn Fn(&SolveReport) -> f64| reports.iter().map(f).sum::<f64>() / 5.0;
        let num = |i: usize| row[i].parse::<f64>().unwrap();
        assert!(close(num(3), mean(&|r| r.totals.outer_iters as f64)));
        assert!(close(num(4), mean(&|r| r.totals.inner_iters as f64 / r.totals.outer_iters as f64)));
        assert!((num(5) - mean(&|r| r.totals.wall_ms as f64 / 1e3)).abs() <= 5e-4);
        assert!(close(num(7), mean(&|r| r.final_objective)));
        assert_eq!(&row[8], "5");
        let failed = reports.iter().filter(|r| r.status != Status::Converged).count();
        assert_eq!(row[9].parse::<usize>().unwrap(), failed);
    }

    // Same flags again: identical apart from the timing columns.
    let again = dir.path().join("again.csv");
    let out = dcprox(&["bench", "--kind", "bc-private", "--n", "20", "--seeds", "1..5", "--out", p(&again)]);
    assert_eq!(code(&out), 0);
    assert!(dir.path().join("again_runs").is_dir());
    for (a, b) in rows.iter().zip(csv_rows(&again)) {
        for i in (0..10).filter(|i| ![5, 6].contains(i)) {
            assert_eq!(&a[i], &b[i], "column {}", CSV_COLUMNS[i]);
        }
    }
}

#[test]
fn check_fast_passes_and_catches_a_corrupted_prox() {
    let out = dcprox(&["check", "--level", "fast"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().all(|l| !l.starts_with("FAIL")));

    let out = dcprox(&["check", "--level", "fast", "--corrupt-psi"]);
    assert_eq!(code(&out), 3);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().any(|l| l.starts_with("FAIL") && l.contains("prox_logdet_psd oracle")), "{text}");
}

#[test]
fn check_writes_named_results() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("check.json");
    assert_eq!(code(&dcprox(&["check", "--out", p(&path)])), 0);
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    let names: Vec<&str> = v.as_array().unwrap().iter().map(|r| r["name"].as_str().unwrap()).collect();
    for expected in ["prox_logdet_psd oracle", "prox_logdet_cap oracle", "prox_logdet_barrier oracle"] {
        assert!(names.contains(&expected), "{names:?}");
    }
}
