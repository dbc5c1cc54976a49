use std::path::PathBuf;
use std::process::Command;

use specsing_cli::report::{from_json, Cell};
use specsing_cli::{run, EXIT_NO_CONVERGENCE, EXIT_OK, EXIT_USAGE};

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
        .display()
        .to_string()
}

fn invoke(args: &[&str]) -> (i32, String, String) {
    let mut argv = vec!["specsing"];
    argv.extend_from_slice(args);
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

#[test]
fn ss_on_gain_slab() {
    let input = fixture("slab.medium");
    let (code, out, _) = invoke(&["ss", "--input", &input, "--k", "10:11", "--param", "kappa=-0.1:-0.01"]);
    assert_eq!(code, EXIT_OK);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "k_star,kappa_star,residual,kind,degenerate");
    assert_eq!(lines.len(), 2);
    let f: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(f[0], "10.477481736");
    assert_eq!(f[1], "-0.0661168070686");
    assert_eq!(f[3], "lasing-SS");
}

#[test]
fn threshold_prints_gain() {
    let (code, out, _) = invoke(&["threshold", "--eta", "3", "--L", "1"]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(out, "eta,L,reflectivity,g_th\n3,1,0.25,1.38629436112\n");
    let (_, out, _) = invoke(&["threshold", "--eta", "1"]);
    assert!(out.ends_with(",inf\n"));
}

#[test]
fn scan_of_vacuum_is_identity() {
    let (code, out, _) = invoke(&["scan", "--input", &fixture("empty.medium"), "--k", "1:2:100"]);
    assert_eq!(code, EXIT_OK);
    let rows: Vec<&str> = out.lines().skip(1).collect();
    assert_eq!(rows.len(), 100);
    for row in rows {
        let f: Vec<&str> = row.split(',').collect();
        assert_eq!(&f[1..9], &["1", "0", "0", "0", "0", "0", "1", "0"]);
    }
}

#[test]
fn empty_result_is_header_only() {
    // a real barrier family has no spectral singularities
    let (code, out, _) = invoke(&["ss", "--input", &fixture("gaussian.samples"), "--k", "0.5:3:40", "--param", "s=-2:2:40"]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(out, "k_star,s_star,residual,kind,degenerate\n");
}

#[test]
fn json_report_carries_meta() {
    let (code, out, _) = invoke(&["modes", "--k", "10:13", "--format", "json"]);
    assert_eq!(code, EXIT_OK);
    let r = from_json(&out).unwrap();
    assert_eq!(r.command, "modes");
    assert!(r.config.iter().any(|(k, v)| k == "k" && v == "10:13"));
    assert_eq!(r.rows.len(), 3);
    assert_eq!(r.rows[0][0], Cell::Int(10));
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["meta"]["version"], env!("CARGO_PKG_VERSION"));
}

#[test]
fn output_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("metric.csv");
    let p = path.display().to_string();
    let (code, out, _) = invoke(&["metric", "--input", &fixture("two_level.json"), "--output", &p]);
    assert_eq!(code, EXIT_OK);
    assert!(out.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("quantity,i,j,re,im\n"));
    assert!(text.contains("eta,0,0,2.5,0\n"));
}

#[test]
fn metric_with_displayed_normalization() {
    let norm = (2.5f64).sqrt().to_string();
    let norms = format!("{norm},{norm}");
    let (code, out, _) = invoke(&["metric", "--input", &fixture("two_level.json"), "--norms", &norms]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("eta,0,0,1,0\n"));
    assert!(out.contains("eta,0,1,0,0\n"));
    assert!(out.contains("eta,1,1,0.25,0\n"));
}

#[test]
fn ep_scan_finds_the_origin() {
    let (code, out, _) = invoke(&["ep-scan", "--input", &fixture("two_level_family.json")]);
    assert_eq!(code, EXIT_OK);
    let rows: Vec<&str> = out.lines().skip(1).collect();
    assert_eq!(rows.len(), 1);
    let t: f64 = rows[0].split(',').next().unwrap().parse().unwrap();
    assert!(t.abs() <= 0.01);
    assert!(rows[0].contains(",exceptional,"));
}

#[test]
fn malformed_input_reports_line() {
    let (code, _, err) = invoke(&["scan", "--input", &fixture("bad.medium")]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("bad.medium:3:"), "{err}");
}

#[test]
fn usage_errors() {
    assert_eq!(invoke(&["scan", "--bogus"]).0, EXIT_USAGE);
    assert_eq!(invoke(&["frobnicate"]).0, EXIT_USAGE);
    assert_eq!(invoke(&["scan", "--input", &fixture("empty.medium"), "--k", "2:1"]).0, EXIT_USAGE);
    assert_eq!(invoke(&["ss", "--input", &fixture("slab.medium"), "--param", "kappa"]).0, EXIT_USAGE);
    assert_eq!(invoke(&["resonances", "--input", &fixture("slab.medium"), "--re=-1:1", "--im=-1:1"]).0, EXIT_USAGE);
    assert_eq!(invoke(&["scan", "--input", "/nonexistent/file"]).0, EXIT_USAGE);
}

#[test]
fn solver_failures_exit_3() {
    // H(0) = [[0, 1], [0, 0]] is defective
    let (code, _, err) = invoke(&["metric", "--input", &fixture("two_level_family.json"), "--t", "0"]);
    assert_eq!(code, EXIT_NO_CONVERGENCE, "{err}");
    // the bound state k = i sits on the contour
    let (code, _, _) = invoke(&["resonances", "--input", &fixture("attractive_delta.potential"), "--re=-0.5:0.5", "--im", "1:2"]);
    assert_eq!(code, EXIT_NO_CONVERGENCE);
}

#[test]
fn help_lists_defaults() {
    let (code, out, _) = invoke(&["--help"]);
    assert_eq!(code, EXIT_OK);
    for sub in ["scan", "ss", "cpa", "resonances", "threshold", "modes", "intensity", "metric", "ep-scan"] {
        assert!(out.contains(sub), "{sub}");
    }
    let (_, out, _) = invoke(&["intensity", "--help"]);
    for flag in ["--eta", "--L", "--sigma", "--k", "--g-rel", "--tol"] {
        let line = out.lines().find(|l| l.trim_start().starts_with(flag)).unwrap_or_else(|| panic!("{flag}"));
        let next = out.lines().skip_while(|l| *l != line).take(3).collect::<String>();
        assert!(next.contains("[default:"), "{flag}: {next}");
    }
}

#[test]
fn binary_exit_codes_and_threads() {
    let bin = env!("CARGO_BIN_EXE_specsing");
    let run_bin = |args: &[&str], threads: &str| Command::new(bin).args(args).env("SPECSING_THREADS", threads).output().unwrap();
    let slab = fixture("slab.medium");
    let args = ["cpa", "--input", slab.as_str(), "--k", "10:11", "--param", "kappa=0.01:0.1"];
    let a = run_bin(&args, "1");
    let b = run_bin(&args, "3");
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert!(String::from_utf8_lossy(&a.stdout).contains(",CPA,"));
    assert_eq!(run_bin(&["scan", "--nope"], "1").status.code(), Some(2));
    let bad = fixture("bad.medium");
    assert_eq!(run_bin(&["scan", "--input", bad.as_str()], "1").status.code(), Some(2));
}
