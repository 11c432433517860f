use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use obswin_cli::bundle::sha256_hex;
use obswin_cli::run_with;
use serde_json::Value;

fn obswin(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("obswin").chain(args.iter().copied());
    let code = run_with(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn json(text: &str) -> Value {
    serde_json::from_str(text).unwrap()
}

fn schema_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/schemas")
}

fn assert_valid(kind: &str, doc: &Value) {
    let schema: Value =
        serde_json::from_str(&fs::read_to_string(schema_dir().join(format!("{kind}.schema.json"))).unwrap()).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let errors: Vec<String> = validator.iter_errors(doc).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{kind}: {errors:?}");
}

fn write_spec(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn rank_on_cubic_example_is_deficient_at_zero() {
    let (code, out, _) = obswin(&["rank", "examples/example1.sys", "--N", "3"]);
    assert_eq!(code, 0);
    let v = json(&out);
    assert_eq!(v["verdict"], "deficient_at_witnesses");
    assert_eq!(v["witness"][0].as_f64(), Some(0.0));
    assert_eq!(v["min_sigma"].as_f64(), Some(0.0));
    assert_valid("rank", &v);
}

#[test]
fn window_curve_follows_log_growth() {
    let (code, out, _) = obswin(&[
        "window",
        "examples/example2.sys",
        "--Tmax",
        "5",
        "--eps",
        "1e-3",
        "--rgrid",
        "0.5,0.1,0.01",
        "--format",
        "csv",
    ]);
    assert_eq!(code, 0);
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("r,T_hat,n_pairs,n_undistinguished"));
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        let r: f64 = f[0].parse().unwrap();
        let t: f64 = f[1].parse().unwrap();
        assert!((t - (1.001f64 / r).ln()).abs() < 1e-3, "{line}");
        assert_eq!(f[3], "0");
    }
}

#[test]
fn kfun_on_contraction_verifies_minorant() {
    let (code, out, _) = obswin(&[
        "kfun",
        "examples/linear-contraction.sys",
        "--T",
        "1",
        "--rgrid",
        "0.2,0.5,1.0",
    ]);
    assert_eq!(code, 0);
    let v = json(&out);
    assert_eq!(v["verdict"], "k_observable_on_evidence");
    assert_eq!(v["minorant"]["grid_points"], 1000);
    assert_eq!(v["minorant"]["below_table"], true);
    assert_eq!(v["hypotheses"]["rank"]["source"], "fresh");
    assert!(v["replay"].as_array().unwrap().iter().all(|r| r["holds"] == true));
    assert_valid("kfun", &v);
}

#[test]
fn distinguish_and_validate_reports() {
    let (code, out, _) = obswin(&["distinguish", "example2", "--x1", "0", "--x2", "0.1", "--eps", "1e-3"]);
    assert_eq!(code, 0);
    let v = json(&out);
    assert_eq!(v["outcome"]["kind"], "distinguished");
    assert!((v["outcome"]["t"].as_f64().unwrap() - (10.01f64).ln()).abs() < 1e-6);
    assert_valid("distinguish", &v);

    let (code, out, _) = obswin(&["distinguish", "double-integrator", "--x1", "-1,0", "--x2", "1,0"]);
    assert_eq!(code, 0);
    assert_eq!(json(&out)["outcome"]["t"].as_f64(), Some(0.0));

    let (code, out, _) = obswin(&["validate", "example2-smooth"]);
    assert_eq!(code, 0);
    let v = json(&out);
    assert_eq!(v["warnings"][0]["kind"], "conditional_seam");
    assert_valid("validate", &v);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(obswin(&["rank", "no-such-system"]).0, 1);
    assert_eq!(obswin(&["rank", "example1", "--bogus"]).0, 1);
    assert_eq!(obswin(&[]).0, 1);
    assert_eq!(obswin(&["rank", "example1", "--tol", "0"]).0, 1);
    assert_eq!(obswin(&["distinguish", "example1", "--x1", "0,1", "--x2", "1"]).0, 1);
    assert_eq!(obswin(&["window", "example1", "--pairs", "sobol:8"]).0, 1);
    assert_eq!(obswin(&["alpha0", "example1", "--rgrid", "0.5,0.1"]).0, 1);
    assert_eq!(obswin(&["kfun", "linear-contraction", "--rgrid", "0.5"]).0, 1);
    assert_eq!(obswin(&["validate", "example1", "--format", "csv"]).0, 1);
    assert_eq!(obswin(&["reproduce", "example9"]).0, 1);
    assert_eq!(obswin(&["rank", "example1", "--jobs", "0"]).0, 1);

    let dir = tempfile::tempdir().unwrap();
    let bad = write_spec(
        dir.path(),
        "bad.sys",
        "system bad\ndim 1\noutputs 1\nf1 = x2\nh1 = x1\nomega [0, 1]\n",
    );
    let (code, _, err) = obswin(&["validate", &bad]);
    assert_eq!(code, 1);
    assert!(err.starts_with("error: "), "{err}");
}

#[test]
fn help_and_version_exit_zero() {
    let (code, out, _) = obswin(&["--help"]);
    assert_eq!(code, 0);
    assert!(out.contains("reproduce"));
    assert_eq!(obswin(&["--version"]).0, 0);
}

#[test]
fn analysis_failures_exit_two() {
    let (code, _, err) = obswin(&["kfun", "example1", "--T", "0.2", "--rgrid", "0.1,0.5"]);
    assert_eq!(code, 2);
    assert!(err.contains("--force"), "{err}");
    assert_eq!(
        obswin(&["kfun", "example1", "--T", "0.2", "--rgrid", "0.1,0.5", "--force"]).0,
        0
    );

    let dir = tempfile::tempdir().unwrap();
    let blow = write_spec(
        dir.path(),
        "blowup.sys",
        "system blowup\ndim 1\noutputs 1\nf1 = x1^2\nh1 = x1\nomega [1, 2]\n",
    );
    let (code, _, err) = obswin(&[
        "alpha0", &blow, "--T", "5", "--rgrid", "0.5", "--starts", "4", "--evals", "50",
    ]);
    assert_eq!(code, 2, "{err}");

    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let out = blocker.join("sub");
    assert_eq!(obswin(&["rank", "example1", "--out", out.to_str().unwrap()]).0, 2);
}

#[test]
fn negative_verdicts_exit_zero() {
    let (code, out, _) = obswin(&[
        "kfun", "example2", "--T", "2", "--rgrid", "0.1,0.3", "--starts", "8", "--force",
    ]);
    assert_eq!(code, 0);
    let v = json(&out);
    assert_eq!(v["verdict"], "not_k_observable_on_evidence");
    assert_eq!(v["zero_levels"][0]["integral"].as_f64(), Some(0.0));
    assert!(v["kfunction"].is_null());
    assert_valid("kfun", &v);
}

#[test]
fn bundle_lists_every_artifact_with_checksums() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    assert_eq!(
        obswin(&["window", "linear-contraction", "--rgrid", "1,0.5", "--out", d]).0,
        0
    );
    let rank_dir = dir.path().join("rank");
    assert_eq!(
        obswin(&["rank", "linear-contraction", "--out", rank_dir.to_str().unwrap()]).0,
        0
    );
    let names: Vec<String> = fs::read_dir(&rank_dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    assert!(names.contains(&"rank.json".to_string()) && names.contains(&"index.json".to_string()));

    // The window bundle in `d` lacks a rank report, so kfun computes its hypotheses afresh.
    let (code, out, _) = obswin(&["kfun", "linear-contraction", "--rgrid", "0.2,0.5,1", "--out", d]);
    assert_eq!(code, 0);
    assert_eq!(json(&out)["hypotheses"]["window"]["source"], "fresh");

    let index = json(&fs::read_to_string(dir.path().join("index.json")).unwrap());
    assert_valid("index", &index);
    let files: Vec<&str> = index["artifacts"]
        .as_array()
        .unwrap()
        .iter()
        .map(|a| a["file"].as_str().unwrap())
        .collect();
    assert_eq!(files, ["kfun.json", "kfun_anchors.csv"]);
    for a in index["artifacts"].as_array().unwrap() {
        let bytes = fs::read(dir.path().join(a["file"].as_str().unwrap())).unwrap();
        assert_eq!(a["bytes"].as_u64(), Some(bytes.len() as u64));
        assert_eq!(a["sha256"].as_str().unwrap(), sha256_hex(&bytes));
    }
    assert!(dir.path().join("window_curve.csv").exists());
    assert_valid(
        "window",
        &json(&fs::read_to_string(dir.path().join("window.json")).unwrap()),
    );
}

#[test]
fn kfun_reads_cached_hypotheses() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    assert_eq!(obswin(&["rank", "example1", "--out", d]).0, 0);
    assert_eq!(obswin(&["window", "example1", "--Tmax", "0.2", "--out", d]).0, 0);
    let (code, _, err) = obswin(&["kfun", "example1", "--T", "0.2", "--rgrid", "0.1,0.5", "--out", d]);
    assert_eq!(code, 2);
    assert!(err.contains("deficient_at_witnesses"), "{err}");
    let (code, out, _) = obswin(&[
        "kfun", "example1", "--T", "0.2", "--rgrid", "0.1,0.5", "--out", d, "--force",
    ]);
    assert_eq!(code, 0);
    let v = json(&out);
    assert_eq!(v["hypotheses"]["rank"]["source"], "cached");
    assert_eq!(v["hypotheses"]["forced"], true);
}

#[test]
fn every_subcommand_output_matches_its_schema() {
    let cases: [(&str, &[&str]); 4] = [
        ("rank", &["rank", "double-integrator", "--samples", "64"]),
        (
            "window",
            &["window", "double-integrator", "--pairs", "lowdisc:40", "--rmin", "0.3"],
        ),
        (
            "alpha0",
            &["alpha0", "linear-contraction", "--rgrid", "0.5,1", "--starts", "4"],
        ),
        (
            "window",
            &["window", "example2-smooth", "--pairs", "boundary:30", "--Tmax", "1"],
        ),
    ];
    for (kind, args) in cases {
        let (code, out, err) = obswin(args);
        assert_eq!(code, 0, "{args:?}: {err}");
        let v = json(&out);
        assert_eq!(v["schema"], format!("obswin/{kind}/v1"));
        assert_valid(kind, &v);
    }
}

#[test]
fn reproduce_writes_a_valid_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let (code, out, err) = obswin(&["reproduce", "double-integrator", "--out", d]);
    assert_eq!(code, 0, "{err}");
    let v = json(&out);
    assert_valid("reproduce", &v);
    assert_eq!(v["kfun_verdict"], "k_observable_on_evidence");
    for c in v["checks"].as_array().unwrap() {
        assert!(c["abs_error"].as_f64().unwrap() < 1e-6, "{c}");
    }
    for (file, kind) in [
        ("rank.json", "rank"),
        ("window.json", "window"),
        ("kfun.json", "kfun"),
        ("reproduce.json", "reproduce"),
        ("index.json", "index"),
    ] {
        assert_valid(kind, &json(&fs::read_to_string(dir.path().join(file)).unwrap()));
    }
}

#[test]
fn seeded_runs_are_byte_identical() {
    let args = [
        "window",
        "double-integrator",
        "--pairs",
        "lowdisc:40",
        "--rmin",
        "0.3",
        "--seed",
        "7",
    ];
    let a = obswin(&args).1;
    assert_eq!(a, obswin(&args).1);
    let mut other = args;
    other[7] = "8";
    assert_ne!(a, obswin(&other).1);
}

#[test]
fn binary_honours_jobs_environment() {
    let bin = env!("CARGO_BIN_EXE_obswin");
    let out = Command::new(bin)
        .args(["rank", "example1"])
        .env("OBSWIN_JOBS", "0")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let one = Command::new(bin)
        .args(["rank", "example1"])
        .env("OBSWIN_JOBS", "1")
        .output()
        .unwrap();
    assert_eq!(one.status.code(), Some(0));
    let many = Command::new(bin)
        .args(["rank", "example1", "--jobs", "4"])
        .output()
        .unwrap();
    assert_eq!(one.stdout, many.stdout);
}
