use std::path::Path;
use std::process::{Command, Output};

fn vomc(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vomc")).args(args).current_dir(dir).output().expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn gen_compress_decompress_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&vomc(&["gen", "--depth", "2", "--len", "300", "--seed", "4", "--counts", "--trace", "--out", "g"], d));
    for f in ["tree.json", "sequence.json", "counts.csv", "trace.json"] {
        assert!(d.join("g").join(f).exists(), "{f}");
    }
    let tree: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("g/tree.json")).unwrap()).unwrap();
    assert_eq!(tree["D"], 2);
    for predictor in ["ctw", "ppm", "blend", "syntf"] {
        ok(&vomc(&["compress", "g/sequence.json", "--depth", "2", "--predictor", predictor, "-o", "s.vomc"], d));
        ok(&vomc(&["decompress", "s.vomc", "-o", "back.json"], d));
        let a: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("g/sequence.json")).unwrap()).unwrap();
        let b: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("back.json")).unwrap()).unwrap();
        assert_eq!(a["body"], b["body"], "{predictor}");
    }
    let bytes = std::fs::read(d.join("s.vomc")).unwrap();
    assert_eq!(&bytes[..4], b"VOMC");
}

#[test]
fn corrupted_container_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("bad.vomc"), b"NOPE\x01\x03\x01\x02").unwrap();
    let out = vomc(&["decompress", "bad.vomc", "-o", "x.json"], d);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("magic"));
}

#[test]
fn eval_is_deterministic_and_compare_reads_curves() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let args = |out: &'static str| {
        vec![
            "eval", "--depth", "2", "--trees", "4", "--len", "256", "--window", "128", "--predictors", "ctw,ppm:2,genie",
            "--seed", "5", "--out", out,
        ]
    };
    let text = ok(&vomc(&args("r1"), d));
    assert!(text.contains("ctw"));
    ok(&vomc(&args("r2"), d));
    for f in ["curve_ctw.csv", "curve_ppm_2.csv", "curve_genie.csv"] {
        assert_eq!(std::fs::read(d.join("r1").join(f)).unwrap(), std::fs::read(d.join("r2").join(f)).unwrap());
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("r1/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 5);
    assert!(manifest["git_describe"].is_string());
    let summary = ok(&vomc(&["compare", "r1/curve_ctw.csv", "r1/curve_genie.csv", "--out", "cmp.json"], d));
    assert!(summary.contains("genie is below ctw"));
    assert!(d.join("cmp.json").exists());
}

#[test]
fn bits_unit_scales_rates() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let base = ["eval", "--depth", "1", "--trees", "2", "--len", "64", "--window", "64", "--predictors", "uniform"];
    let nats = ok(&vomc(&[&base[..], &["--out", "n"]].concat(), d));
    let bits = ok(&vomc(&[&base[..], &["--unit", "bits", "--out", "b"]].concat(), d));
    assert!(nats.contains("1.0986"));
    assert!(bits.contains("1.5850"));
}

#[test]
fn verify_names_failing_golden() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("golden.csv"), "order,context,symbol,count\n0,,0,9\n").unwrap();
    let out = vomc(&["verify", "--golden", "golden.csv"], d);
    assert!(!out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("failing suites: ppm-golden"), "{text}");
}

#[test]
fn unknown_predictor_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = vomc(&["eval", "--trees", "1", "--len", "64", "--window", "64", "--predictors", "lstm"], dir.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("lstm"));
}
