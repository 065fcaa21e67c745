use std::process::{Command, Output};

fn bench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_serre-bench"))
        .args(args)
        .output()
        .expect("spawn serre-bench")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn status_line(text: &str) -> &str {
    let last = text.lines().last().expect("non-empty output");
    last.strip_prefix("# STATUS ").unwrap_or_else(|| panic!("last line is not a status row: {last}"))
}

/// Data rows, i.e. everything after the header that is not a comment.
fn table(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, rows)
}

#[test]
fn qi_probe_writes_csv_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("qi.csv");
    let o = bench(&["qi-probe", "--meshes", "16,32,64", "--out", path.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(o.stdout.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("# serre-bench qi-probe\n# git "));
    assert!(text.contains("# config r=3"));
    let (header, rows) = table(&text);
    assert_eq!(header, ["r", "N", "nu", "kappa", "max_b", "max_beta", "qh_l2_err"]);
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r.len() == header.len()));
    assert!(text.contains("# SLOPE nu=0 kappa=0"));
    assert_eq!(status_line(&text), "pass");
}

#[test]
fn converge_direct_passes_and_steady_is_degenerate() {
    let o = bench(&["converge", "--meshes", "16,32,64"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("# self-check residual="));
    let (header, rows) = table(&text);
    assert_eq!(header[..5], ["N", "h", "eta_l2", "u_l2", "u_h1"]);
    assert!(rows.iter().all(|r| r.last().unwrap() == "ok"));
    assert_eq!(status_line(&text), "pass");

    let o = bench(&["converge", "--a", "0", "--b", "0", "--meshes", "16,32,64"]);
    assert!(o.status.success());
    assert_eq!(status_line(&stdout(&o)), "degenerate");
}

#[test]
fn converge_picard_mode() {
    let o = bench(&["converge", "--mode", "picard", "--meshes", "16,32,64", "--iters", "5"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let (header, rows) = table(&text);
    assert_eq!(header[2], "theta");
    assert_eq!(rows.len(), 3);
    assert_eq!(status_line(&text), "pass");
}

#[test]
fn picard_rows_and_direct_comparison() {
    let o = bench(&["picard", "--meshes", "32", "--iters", "5"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let (header, rows) = table(&text);
    assert_eq!(header, ["n", "sup_delta", "alpha_n", "min_depth", "status"]);
    assert_eq!(rows[0][4], "undefined");
    assert!(rows[1..rows.len() - 1].iter().all(|r| r[4] == "contracting"));
    let last = rows.last().unwrap();
    assert_eq!(last[0], "direct");
    assert!(last[1].parse::<f64>().unwrap() < 1e-8);
    assert_eq!(status_line(&text), "pass");
}

#[test]
fn picard_failure_is_reported_with_success_exit() {
    let o = bench(&["picard", "--meshes", "16", "--t-star", "3", "--a", "0.3", "--b", "0.3"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("# VIOLATION") || text.contains("no-contraction"));
    assert_eq!(status_line(&text), "fail");
}

#[test]
fn residual_single_level_is_insufficient() {
    let o = bench(&["residual", "--meshes", "32", "--times", "0.1"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(table(&text).1.len(), 1);
    assert_eq!(status_line(&text), "insufficient-levels");
}

#[test]
fn simulate_reports_diagnostics() {
    let o = bench(&["simulate", "--meshes", "16", "--t-end", "0.05"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let (header, rows) = table(&text);
    assert_eq!(header, ["t", "min_depth", "energy", "mass"]);
    assert!(rows.len() >= 4);
    assert!(text.contains("# MASS_DRIFT"));
    assert_eq!(status_line(&text), "pass");
}

#[test]
fn usage_errors_exit_with_two() {
    for args in [
        &["converge", "--meshes", ""][..],
        &["converge", "--meshes", "32,16"],
        &["converge", "--mode", "sideways"],
        &["converge", "--a", "0.7"],
        &["qi-probe", "--nu", "3", "--kappa", "0"],
        &["qi-probe", "--nu", "0,1", "--kappa", "0"],
        &["picard", "--meshes", "16,32"],
        &["simulate", "--meshes", "abc"],
    ] {
        let o = bench(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(!o.stderr.is_empty());
        assert!(o.stdout.is_empty() || !String::from_utf8_lossy(&o.stdout).contains("# STATUS"));
    }
}

#[test]
fn unwritable_output_is_an_internal_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("missing").join("out.csv");
    let o = bench(&["simulate", "--meshes", "16", "--t-end", "0.02", "--out", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}
