use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use cadproj::io::{read_instance, to_json};

fn cadbench(args: &[&str], out_dir: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_cadbench"));
    cmd.args(args);
    match out_dir {
        Some(d) => cmd.env(cadbench::OUT_DIR_ENV, d),
        None => cmd.env_remove(cadbench::OUT_DIR_ENV),
    };
    cmd.output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn sorted_files(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    v.sort();
    v
}

#[test]
fn gen_writes_reproducible_files() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["gen", "--family", "lp", "--n", "10", "--m", "8", "--d", "3", "--seed", "7", "--count", "5"];
    assert!(cadbench(&args, Some(a.path())).status.success());
    assert!(cadbench(&args, Some(b.path())).status.success());
    let files = sorted_files(a.path());
    assert_eq!(files.len(), 5);
    assert_eq!(files, sorted_files(b.path()));
    for f in &files {
        let text = fs::read_to_string(a.path().join(f)).unwrap();
        assert_eq!(text, fs::read_to_string(b.path().join(f)).unwrap());
        let inst = read_instance(a.path().join(f)).unwrap();
        assert_eq!(to_json(&inst).unwrap() + "\n", text);
    }
}

#[test]
fn gen_defaults_m_to_three_quarters_n() {
    let dir = tempfile::tempdir().unwrap();
    let o = cadbench(&["gen", "--family", "constraints-only", "--n", "20"], Some(dir.path()));
    assert!(o.status.success());
    assert_eq!(sorted_files(dir.path()), vec!["constraints-only-n20-m15-s0.json"]);
}

#[test]
fn usage_errors_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    assert!(!cadbench(&["gen", "--family", "lp"], Some(dir.path())).status.success());
    assert!(!cadbench(&["gen", "--family", "lp", "--n", "5", "--bogus"], Some(dir.path())).status.success());
    assert!(!cadbench(&["gen", "--family", "power", "--n", "5", "--m", "3"], Some(dir.path())).status.success());
    assert!(!cadbench(&["gen", "--family", "lp", "--n", "5", "--count", "0"], Some(dir.path())).status.success());
    assert!(!cadbench(&["project"], None).status.success());
}

#[test]
fn project_csv_and_oracle_check() {
    let dir = tempfile::tempdir().unwrap();
    let gen = ["gen", "--family", "quad-er", "--n", "10", "--m", "8", "--seed", "3", "--count", "3"];
    assert!(cadbench(&gen, Some(dir.path())).status.success());
    let dir_arg = dir.path().to_str().unwrap();
    let o = cadbench(&["project", dir_arg, "--eps", "1e-10", "--repeats", "2", "--verify"], None);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("instance_id,family,n,m,d,delta,method,epsilon,iterations,runtime_ms,violation,objective,converged,seed")
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 6);
    assert!(rows.iter().all(|r| r.contains(",quad-er,") && r.ends_with(&format!(",true,{}", r.rsplit(',').next().unwrap()))));
    // sorted by instance id, then repeat
    let ids: Vec<&str> = rows.iter().map(|r| r.split(',').next().unwrap()).collect();
    let mut sorted = ids.clone();
    sorted.sort();
    assert_eq!(ids, sorted);
}

#[test]
fn unconverged_runs_are_recorded() {
    let dir = tempfile::tempdir().unwrap();
    assert!(cadbench(&["gen", "--family", "lp", "--n", "60", "--seed", "1"], Some(dir.path())).status.success());
    let o = cadbench(
        &["project", dir.path().to_str().unwrap(), "--alg", "simul", "--eps", "1e-12", "--max-iter", "3", "--delta", "5"],
        None,
    );
    assert!(o.status.success());
    assert!(stdout(&o).lines().nth(1).unwrap().contains(",false,"));
}

#[test]
fn two_set_needs_two_rows() {
    let dir = tempfile::tempdir().unwrap();
    assert!(cadbench(&["gen", "--family", "lp", "--n", "6", "--m", "4"], Some(dir.path())).status.success());
    let o = cadbench(&["project", dir.path().to_str().unwrap(), "--alg", "two-set"], None);
    assert!(!o.status.success());
    assert!(cadbench(&["gen", "--family", "lp", "--n", "6", "--m", "2", "--seed", "1"], Some(dir.path()))
        .status
        .success());
    let file = dir.path().join("lp-n6-m2-s1.json");
    let o = cadbench(&["project", file.to_str().unwrap(), "--alg", "two-set", "--eps", "1e-10", "--verify"], None);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn verify_passes_and_catches_tampering() {
    let ok = cadbench(&["verify", "--suite", "theorem1", "--trials", "30"], None);
    assert!(ok.status.success());
    assert!(stdout(&ok).contains("PASS theorem1"));
    let bad = cadbench(&["verify", "--suite", "theorem1", "--trials", "30", "--tamper"], None);
    assert!(!bad.status.success());
    let text = stdout(&bad);
    assert!(text.lines().any(|l| l.starts_with("FAIL theorem1 seed ")), "{text}");
}

#[test]
fn verify_all_suites() {
    let o = cadbench(&["verify", "--trials", "20", "--seed", "500"], None);
    assert!(o.status.success(), "{}", stdout(&o));
    let text = stdout(&o);
    for s in ["theorem1", "prop1", "svc"] {
        assert!(text.contains(&format!("PASS {s}")), "{text}");
    }
}

#[test]
fn paired_descent_shares_the_iteration_grid() {
    let dir = tempfile::tempdir().unwrap();
    let o = cadbench(
        &["descend", "--family", "lp", "--n", "8", "--m", "6", "--seed", "4", "--grad", "both", "--steps", "25"],
        Some(dir.path()),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let grid = |name: &str| -> Vec<String> {
        fs::read_to_string(dir.path().join(name))
            .unwrap()
            .lines()
            .map(|l| l.split(',').next().unwrap().to_string())
            .collect()
    };
    let a = grid("lp-n8-m22-s4-surrogate.csv");
    let b = grid("lp-n8-m22-s4-exact.csv");
    assert_eq!(a.len(), 26);
    assert_eq!(a, b);
    assert_eq!(a[0], "iteration");
}
