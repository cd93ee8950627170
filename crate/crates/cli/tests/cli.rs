use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_anderson-edge"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn read(p: &Path) -> Vec<u8> {
    std::fs::read(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

fn spectrum_args(out: &Path) -> Vec<String> {
    ["spectrum", "--L", "100", "--k", "3", "--ensemble", "2", "--seed", "17", "--out"]
        .iter()
        .map(|s| s.to_string())
        .chain([out.display().to_string()])
        .collect()
}

fn run_owned(args: &[String]) -> Output {
    bin().args(args).output().expect("binary runs")
}

#[test]
fn spectrum_is_byte_identical_across_reruns_and_threads() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b/nested"));
    let mut first = spectrum_args(&a);
    first.extend(["--threads".into(), "1".into()]);
    let mut second = spectrum_args(&b);
    second.extend(["--threads".into(), "3".into()]);
    assert!(run_owned(&first).status.success());
    assert!(run_owned(&second).status.success());
    for f in ["spectrum.jsonl", "spectrum_summary.csv"] {
        assert_eq!(read(&a.join(f)), read(&b.join(f)), "{f} differs");
    }
    let text = String::from_utf8(read(&a.join("spectrum.jsonl"))).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("{\"header\":"));
    let rec: serde_json::Value = serde_json::from_str(lines[1]).unwrap();
    assert_eq!(rec["eigenvalues"].as_array().unwrap().len(), 3);
    let csv = String::from_utf8(read(&a.join("spectrum_summary.csv"))).unwrap();
    assert!(csv.starts_with("# {\"header\":"));
    assert_eq!(csv.lines().count(), 2 + 6);
}

#[test]
fn replay_reproduces_files() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(run_owned(&spectrum_args(&a)).status.success());
    let out = run(&["--replay", a.join("spectrum_summary.csv").to_str().unwrap(), "--out", b.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["spectrum.jsonl", "spectrum_summary.csv"] {
        assert_eq!(read(&a.join(f)), read(&b.join(f)), "{f} differs");
    }
}

#[test]
fn oversized_k_is_a_config_error_before_sampling() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("never");
    let res = run(&["spectrum", "--L", "10", "--k", "50", "--out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("exceeds"));
    assert!(!out.exists());
}

#[test]
fn verify_truncation_campaign_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let res = run(&["verify", "--instances", "100", "--seed", "3", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let csv = String::from_utf8(read(&tmp.path().join("verify_summary.csv"))).unwrap();
    let row: Vec<&str> = csv.lines().nth(2).unwrap().split(',').collect();
    assert_eq!(row[0], "truncation");
    assert_eq!(row[1], "100");
    assert_eq!(row[3], "0");
}

#[test]
fn inapplicable_parameters_warn_and_exit_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.toml");
    std::fs::write(&cfg, "L = 200\n[verify]\ninstances = 5\nr = 1\na = 0.5\n").unwrap();
    let res = run(&["verify", "--config", cfg.to_str().unwrap(), "--out", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&res.stderr).contains("inapplicable"));
    let text = String::from_utf8(read(&tmp.path().join("o/verify.jsonl"))).unwrap();
    assert!(text.lines().skip(1).all(|l| l.contains("\"status\":\"inapplicable\"")));
}

#[test]
fn injected_fault_exits_one_with_witness() {
    let tmp = tempfile::tempdir().unwrap();
    let res = run(&["verify", "--instances", "20", "--inject-fault", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(1));
    let w = String::from_utf8(read(&tmp.path().join("witnesses.jsonl"))).unwrap();
    assert!(w.lines().count() > 1);
}

#[test]
fn chi_table_single_site_is_exactly_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("chi.toml");
    std::fs::write(&cfg, "[chi]\nrhos = [0.5, 1.0]\ndims = [1]\nmax_n = [3]\nlimit = false\n").unwrap();
    let res = run(&["chi", "--config", cfg.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let csv = String::from_utf8(read(&tmp.path().join("chi.csv"))).unwrap();
    let rows: Vec<Vec<&str>> = csv.lines().skip(2).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 8);
    for r in rows.iter().filter(|r| r[2] == "0") {
        assert_eq!(r[4], "2.0");
    }
    assert!(!tmp.path().join("chi_limit.csv").exists());
}

#[test]
fn evt_emits_quantile_columns_and_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let args = |o: &Path| {
        vec!["evt".to_string(), "--L".into(), "300".into(), "--ensemble".into(), "12".into(), "--out".into(), o.display().to_string()]
    };
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(run_owned(&args(&a)).status.success());
    assert!(run_owned(&args(&b)).status.success());
    let q = String::from_utf8(read(&a.join("evt_quantiles.csv"))).unwrap();
    assert_eq!(q.lines().nth(1).unwrap(), "L,i,spacing,exp_quantile");
    let w: Vec<f64> = q.lines().skip(2).map(|l| l.split(',').nth(2).unwrap().parse().unwrap()).collect();
    assert_eq!(w.len(), 12 * 5);
    assert!(w.windows(2).all(|p| p[0] <= p[1]));
    for f in ["evt.jsonl", "evt_points.csv", "evt_quantiles.csv"] {
        assert_eq!(read(&a.join(f)), read(&b.join(f)), "{f} differs");
    }
}

#[test]
fn sample_writes_one_record_per_member() {
    let tmp = tempfile::tempdir().unwrap();
    let res = run(&["sample", "--L", "50,60", "--ensemble", "3", "--out", tmp.path().to_str().unwrap()]);
    assert!(res.status.success());
    let text = String::from_utf8(read(&tmp.path().join("sample.jsonl"))).unwrap();
    assert_eq!(text.lines().count(), 1 + 6);
    let rec: serde_json::Value = serde_json::from_str(text.lines().nth(1).unwrap()).unwrap();
    assert_eq!(rec["values"].as_array().unwrap().len(), 49);
}

#[test]
fn unknown_config_key_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    std::fs::write(&cfg, "bogus = 1\n").unwrap();
    assert_eq!(run(&["spectrum", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(run(&["spectrum", "--rho", "-1"]).status.code(), Some(2));
}

#[test]
fn schema_lists_config_fields() {
    let res = run(&["--print-schema"]);
    assert!(res.status.success());
    let v: serde_json::Value = serde_json::from_slice(&res.stdout).unwrap();
    let props = v["properties"].as_object().unwrap();
    for key in ["L", "rho", "k", "ensemble", "seed", "verify", "chi", "evt"] {
        assert!(props.contains_key(key), "missing {key}");
    }
}
