use std::path::Path;
use std::process::{Command, Output};

use nzs_bench::instance_file::{InstanceFile, InstanceMeta};
use nzs_bench::run::SolveRecord;
use nzs_bench::sweep::{RunManifest, CSV_HEADER};
use nzs_core::vecmat::SparseMatrix;
use serde_json::Value;

fn nzs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nzs"))
        .args(args)
        .env("NZS_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn generate(dir: &Path, name: &str, extra: &[&str]) -> String {
    let path = dir.join(name).display().to_string();
    let mut args = vec!["generate", "--out", &path];
    args.extend_from_slice(extra);
    let out = nzs(&args);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    path
}

const SMALL: [&str; 10] = ["--n", "60", "--m", "50", "--nnz", "600", "--mu", "0.01", "--nu", "1"];

#[test]
fn generate_is_deterministic_and_normalized() {
    let dir = tempfile::tempdir().unwrap();
    let a = generate(dir.path(), "a.bin", &SMALL);
    let b = generate(dir.path(), "b.bin", &SMALL);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let inst = InstanceFile::read(Path::new(&a)).unwrap();
    assert_eq!(inst.matrix.nnz(), 600);
    assert_eq!(inst.meta.rho, None);
    let norm = inst.matrix.spectral_norm_default().unwrap();
    assert!((norm - 1.0).abs() <= 1e-6, "{norm}");
}

#[test]
fn generate_rejects_too_many_entries() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("x.bin").display().to_string();
    let out = nzs(&["generate", "--n", "10", "--m", "10", "--nnz", "101", "--out", &out_path]);
    assert_eq!(code(&out), 2);
    assert!(!Path::new(&out_path).exists());
    assert_eq!(code(&nzs(&["generate", "--n", "ten"])), 2);
}

fn solve(dir: &Path, inst: &str, method: &str, eps: &str, extra: &[&str]) -> (i32, Option<SolveRecord>) {
    let report = dir.join(format!("{method}-{eps}.json")).display().to_string();
    let mut args = vec!["solve", "--method", method, "--instance", inst, "--eps", eps, "--out", &report];
    args.extend_from_slice(extra);
    let out = nzs(&args);
    let record = std::fs::read_to_string(&report).ok().map(|t| serde_json::from_str(&t).unwrap());
    (code(&out), record)
}

#[test]
fn solve_reports_schema_and_baselines_agree() {
    let dir = tempfile::tempdir().unwrap();
    let inst = generate(dir.path(), "g.bin", &SMALL);
    let eps = 1e-8;
    let (c, icl) = solve(dir.path(), &inst, "icl", "1e-8", &["--rho", "0.05%"]);
    assert_eq!(c, 0);
    let icl = icl.unwrap();
    assert!(icl.converged && icl.certified_sq_distance.unwrap() <= eps);
    assert!((icl.rho - 5e-4).abs() < 1e-18);

    let text = std::fs::read_to_string(dir.path().join("icl-1e-8.json")).unwrap();
    let v: Value = serde_json::from_str(&text).unwrap();
    for key in ["method", "rho", "eps", "queries_h", "queries_g", "queries_cert", "iterations", "certified_sq_distance", "seed"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }

    let (c1, eg) = solve(dir.path(), &inst, "eg", "1e-8", &[]);
    let (c2, ogda) = solve(dir.path(), &inst, "ogda", "1e-8", &[]);
    assert_eq!((c1, c2), (0, 0));
    let d = eg.unwrap().point().unwrap().dist_sq(&ogda.unwrap().point().unwrap()).sqrt();
    assert!(d <= 10.0 * eps.sqrt(), "{d}");
}

#[test]
fn non_convergence_exits_one_with_partial_report() {
    let dir = tempfile::tempdir().unwrap();
    let inst = generate(dir.path(), "g.bin", &SMALL);
    let (c, rec) = solve(dir.path(), &inst, "ogda", "1e-12", &["--max-iter", "3"]);
    assert_eq!(c, 1);
    let rec = rec.unwrap();
    assert!(!rec.converged);
    assert_eq!(rec.iterations, 3);
}

fn write_pennies(path: &Path) {
    let file = InstanceFile {
        meta: InstanceMeta {
            n: 2,
            m: 2,
            nnz: 4,
            seed: 0,
            mu: 0.0,
            nu: 0.0,
            normalized: false,
            raw_norm: 2.0,
            rho: None,
        },
        matrix: SparseMatrix::from_dense(&[vec![1.0, -1.0], vec![-1.0, 1.0]]).unwrap(),
    };
    file.write(path).unwrap();
}

fn gap(inst: &str, point: &Path) -> (i32, Option<Value>) {
    let out = nzs(&["gap", "--instance", inst, "--point", &point.display().to_string()]);
    let v = serde_json::from_slice(&out.stdout).ok();
    (code(&out), v)
}

#[test]
fn gap_of_uniform_pennies_is_zero_and_infeasible_points_fail() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("pennies.bin");
    write_pennies(&inst);
    let inst = inst.display().to_string();

    let uniform = dir.path().join("uniform.json");
    std::fs::write(&uniform, r#"{"x": [0.5, 0.5], "y": [0.5, 0.5]}"#).unwrap();
    let (c, v) = gap(&inst, &uniform);
    assert_eq!(c, 0);
    let v = v.unwrap();
    assert_eq!(v["deviation_gain"].as_f64().unwrap(), 0.0);
    assert!(v["delta_upper"].as_f64().unwrap() <= 1e-12);

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"x": [0.9, 0.9], "y": [0.5, 0.5]}"#).unwrap();
    assert_eq!(gap(&inst, &bad).0, 2);
    std::fs::write(&bad, r#"{"x": [1.0], "y": [0.5, 0.5]}"#).unwrap();
    assert_eq!(gap(&inst, &bad).0, 2);
}

#[test]
fn gap_at_accurate_solution_is_small() {
    let dir = tempfile::tempdir().unwrap();
    let inst = generate(dir.path(), "g.bin", &SMALL);
    let (c, _) = solve(dir.path(), &inst, "icl", "1e-10", &[]);
    assert_eq!(c, 0);
    let (c, v) = gap(&inst, &dir.path().join("icl-1e-10.json"));
    assert_eq!(c, 0);
    let gain = v.unwrap()["deviation_gain"].as_f64().unwrap();
    assert!(gain <= 1e-4, "{gain}");
}

fn numeric_cells_without_time(csv: &str) -> Vec<String> {
    csv.lines()
        .skip(1)
        .map(|l| l.rsplit_once(',').unwrap().0.to_string())
        .collect()
}

#[test]
fn bench_tables_are_reproducible_and_match_ledgers() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out_dir = dir.path().join(name);
        let out = nzs(&[
            "bench",
            "--table",
            "t1",
            "--seeds",
            "0",
            "--rho-list",
            "0,0.03%",
            "--methods",
            "icl,ogda",
            "--out-dir",
            &out_dir.display().to_string(),
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        let table = std::fs::read_to_string(out_dir.join("table.csv")).unwrap();
        let manifest: RunManifest =
            serde_json::from_str(&std::fs::read_to_string(out_dir.join("manifest.json")).unwrap()).unwrap();
        assert!(out_dir.join("summary.csv").exists());
        (table, manifest)
    };
    let (first, manifest) = run("a");
    let (second, _) = run("b");
    assert_eq!(first.lines().next().unwrap(), CSV_HEADER);
    assert_eq!(first.lines().count(), 5);
    assert_eq!(numeric_cells_without_time(&first), numeric_cells_without_time(&second));

    assert_eq!(manifest.instance_hashes.len(), 1);
    assert!(manifest.failures.is_empty());
    for total in &manifest.ledger_totals {
        let (mut h, mut g, mut c) = (0u64, 0u64, 0u64);
        for line in first.lines().skip(1) {
            let f: Vec<&str> = line.split(',').collect();
            if f[0] == total.method.to_string() && f[1] == total.rho {
                h += f[3].parse::<u64>().unwrap();
                g += f[4].parse::<u64>().unwrap();
                c += f[5].parse::<u64>().unwrap();
            }
        }
        assert_eq!((h, g, c), (total.queries_h, total.queries_g, total.queries_cert));
    }
}
