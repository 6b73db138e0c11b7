use std::fs;
use std::process::Command;

use isocrit::cli::{cache_path, load_ap_table, parse_curve, run_command, store_ap_table, CliError, CACHE_ENV};
use isocrit::counting::{build_ap_table, ApTable};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_isocrit"));
    cmd.env_remove(CACHE_ENV);
    cmd
}

fn run(args: &[&str]) -> isocrit::cli::Outcome {
    run_command(std::iter::once("isocrit").chain(args.iter().copied()))
}

#[test]
fn table_round_trip_is_byte_exact() {
    let dir = tempfile::tempdir().unwrap();
    let c = parse_curve("37a1").unwrap();
    let table = build_ap_table(&c, 2000, None).unwrap();
    let path = dir.path().join("t.txt");
    store_ap_table(&table, &path).unwrap();
    let bytes = fs::read(&path).unwrap();
    assert_eq!(bytes, table.to_text().as_bytes());
    let loaded = load_ap_table(&path, &c).unwrap();
    assert_eq!(loaded, table);
    store_ap_table(&loaded, &path).unwrap();
    assert_eq!(fs::read(&path).unwrap(), bytes);
}

#[test]
fn load_rejects_foreign_and_malformed_tables() {
    let dir = tempfile::tempdir().unwrap();
    let a = parse_curve("-1,0").unwrap();
    let b = parse_curve("0,1").unwrap();
    let path = dir.path().join("t.txt");
    store_ap_table(&build_ap_table(&a, 50, None).unwrap(), &path).unwrap();
    assert!(matches!(load_ap_table(&path, &b), Err(CliError::CacheFile { .. })));

    fs::write(&path, "curve=[0,0,0,-1,0]\n7,0\n5,-2\n").unwrap();
    let err = load_ap_table(&path, &a).unwrap_err();
    assert!(err.to_string().contains("line 3"), "{err}");

    assert!(matches!(load_ap_table(&dir.path().join("absent"), &a), Err(CliError::Io { .. })));
}

#[test]
fn compare_is_identical_with_cold_and_warm_cache() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().to_str().unwrap();
    let args = ["compare", "--a", "32a2", "--b", "32a1", "--pmax", "3000", "--cache-dir", cache];
    let cold = run(&args);
    assert_eq!(cold.code, 0, "{}", cold.stderr);
    let a = parse_curve("32a2").unwrap();
    let file = cache_path(dir.path(), &a);
    let stored = fs::read(&file).unwrap();
    let warm = run(&args);
    assert_eq!(cold.stdout, warm.stdout);
    assert_eq!(fs::read(&file).unwrap(), stored);
    let uncached = run(&args[..7]);
    assert_eq!(uncached.stdout, cold.stdout);
}

#[test]
fn cache_extends_to_larger_pmax() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().to_str().unwrap();
    assert_eq!(run(&["ap", "--curve", "11a1", "--pmax", "500", "--cache-dir", cache]).code, 0);
    let c = parse_curve("11a1").unwrap();
    let small = load_ap_table(&cache_path(dir.path(), &c), &c).unwrap();
    assert_eq!(small.max_p(), Some(499));
    let out = run(&["ap", "--curve", "11a1", "--pmax", "1000", "--cache-dir", cache]);
    let big = load_ap_table(&cache_path(dir.path(), &c), &c).unwrap();
    assert_eq!(big, build_ap_table(&c, 1000, None).unwrap());
    let fresh = run(&["ap", "--curve", "11a1", "--pmax", "1000"]);
    assert_eq!(out.stdout, fresh.stdout);
    // a smaller request served from the larger cache reports only p ≤ pmax
    let again = run(&["ap", "--curve", "11a1", "--pmax", "500", "--cache-dir", cache]);
    let direct = run(&["ap", "--curve", "11a1", "--pmax", "500"]);
    assert_eq!(again.stdout, direct.stdout);
}

#[test]
fn corrupt_cache_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let c = parse_curve("-1,0").unwrap();
    fs::write(cache_path(dir.path(), &c), "curve=[0,0,0,-1,0]\n5,9\n").unwrap();
    let out = run(&["ap", "--curve", "-1,0", "--pmax", "50", "--cache-dir", dir.path().to_str().unwrap()]);
    assert_eq!(out.code, 2);
    assert!(out.stderr.contains("line 2"), "{}", out.stderr);
}

#[test]
fn binary_exit_codes_and_env_cache() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["compare", "--a", "[0,0,0,-1,0]", "--b", "0,1", "--pmax", "100", "--check"])
        .env(CACHE_ENV, dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["verdict"]["kind"], "NotIsogenous");
    let a = parse_curve("-1,0").unwrap();
    assert!(cache_path(dir.path(), &a).exists());

    let out = bin().args(["gsp-verify", "--ell", "5", "--g", "2", "--c", "3", "--check"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));

    let out = bin().args(["nonsense"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());

    let out = bin().args(["ap", "--curve", "-1,0", "--pmax", "10"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["records"].as_array().unwrap().len(), 2);
}

#[test]
fn reports_are_deterministic_across_thread_counts() {
    let args = ["compare", "--a", "37a1", "--b", "37a1.tw2", "--pmax", "5000"];
    let one = bin().args(args).env("RAYON_NUM_THREADS", "1").output().unwrap();
    let many = bin().args(args).env("RAYON_NUM_THREADS", "8").output().unwrap();
    assert_eq!(one.stdout, many.stdout);
    assert!(!one.stdout.is_empty());
}

#[test]
fn stored_table_parses_as_table() {
    let c = parse_curve("36a1").unwrap();
    let t = build_ap_table(&c, 300, None).unwrap();
    assert_eq!(ApTable::parse(&t.to_text()).unwrap(), t);
}
