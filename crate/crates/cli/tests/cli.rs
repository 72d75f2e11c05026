use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use homsum::classical::mixture_average_check;
use homsum::{ClassicalLaw, Scalar};
use serde_json::Value;
use tempfile::TempDir;

const PAIR: &str = r#"{"n": 2, "d": 2, "mode": "exact", "entries": [{"idx": [1, 2], "num": 1, "den": 2}]}"#;

fn homsum(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_homsum")).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// `(order, engine, exact value, exact scaled value)` per report entry.
fn moments(args: &[&str]) -> Vec<(u64, String, String, Option<String>)> {
    let v: Value = serde_json::from_str(&stdout(&homsum(args))).unwrap();
    v["moments"]
        .as_array()
        .unwrap()
        .iter()
        .map(|m| {
            let r = &m["report"];
            (
                m["order"].as_u64().unwrap(),
                m["engine"].as_str().unwrap().to_string(),
                r["value"]["exact"].as_str().unwrap().to_string(),
                r["scaled_value"]["exact"].as_str().map(str::to_string),
            )
        })
        .collect()
}

fn csv_rows(text: &str) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().unwrap().iter().map(str::to_string).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(|x| x.parse().unwrap()).collect()).collect();
    (header, rows)
}

#[test]
fn free_moments_of_the_product_pair() {
    let dir = TempDir::new().unwrap();
    let k = write(&dir, "pair.json", PAIR);
    let rows = moments(&["moments", path(&k), "--regime", "free", "--law", "free-rademacher", "--orders", "2,4"]);
    for (order, _, exact, scaled) in &rows {
        match order {
            2 => assert_eq!((exact.as_str(), scaled.as_deref()), ("1/2", Some("1"))),
            4 => assert_eq!((exact.as_str(), scaled.as_deref()), ("3/8", Some("3/2"))),
            _ => unreachable!(),
        }
    }
    assert_eq!(rows.len(), 3);
    let rows = moments(&["moments", path(&k), "--regime", "free", "--law", "semicircle", "--orders", "4"]);
    assert!(rows.iter().all(|r| r.2 == "5/8" && r.3.as_deref() == Some("5/2")));
}

#[test]
fn classical_second_moment_is_one() {
    let dir = TempDir::new().unwrap();
    let k = write(&dir, "pair.json", PAIR);
    let rows = moments(&["moments", path(&k), "--law", "m4=9/2", "--orders", "2,4"]);
    assert_eq!(rows[0].2, "1");
    // (X1 X2)^4 has mean m4^2
    assert!(rows[1..].iter().all(|r| r.0 == 4 && r.2 == "81/4"));
}

#[test]
fn star_sweep_column() {
    let out = stdout(&homsum(&["analyze", "star", "--d", "3", "--law", "m4=9/2", "--n", "2..9"]));
    let (header, rows) = csv_rows(&out);
    assert_eq!(header, ["n", "fourth_cumulant_scaled", "influence_max", "gap"]);
    assert_eq!(rows.len(), 8);
    for r in rows {
        let m4 = 4.5f64;
        let expected = m4 * (3.0 + (m4 * m4 - 3.0) / (r[0] - 1.0)) - 3.0;
        assert!((r[1] - expected).abs() < 1e-12 * expected);
    }
}

#[test]
fn product_zero_point_in_float_mode() {
    let out = stdout(&homsum(&["analyze", "product", "--d", "2", "--law", "m4=sqrt(3)", "--n", "2..6", "--mode", "float"]));
    let (_, rows) = csv_rows(&out);
    assert!(rows.iter().all(|r| r[1].abs() < 1e-12 && r[3].abs() < 1e-12));
}

#[test]
fn off_diagonal_influence_and_json() {
    let out = stdout(&homsum(&["analyze", "off-diagonal-pair", "--n", "4..64"]));
    let (_, rows) = csv_rows(&out);
    assert_eq!(rows.len(), 61);
    assert!(rows.iter().all(|r| (r[2] - 1.0 / (2.0 * r[0])).abs() < 1e-15 && r[1] > 0.0));
    let v: Value = serde_json::from_str(&stdout(&homsum(&["analyze", "off-diagonal-pair", "--n", "4", "--format", "json"]))).unwrap();
    assert_eq!(v["rows"][0]["influence_max"]["exact"], "1/8");
    assert_eq!(v["rows"][0]["fourth_cumulant_scaled"]["exact"], "7");
    assert!(!homsum(&["analyze", "off-diagonal-pair", "--d", "3"]).status.success());
}

#[test]
fn analyze_is_reproducible() {
    let args = ["analyze", "free-clt", "--d", "2", "--regime", "free", "--law", "free-rademacher", "--n", "1..6"];
    assert_eq!(stdout(&homsum(&args)), stdout(&homsum(&args)));
}

#[test]
fn verify_scopes() {
    for args in [
        vec!["verify", "--scope", "partitions"],
        vec!["verify", "--scope", "classical", "--d", "2", "--n", "4", "--cases", "200"],
        vec!["verify", "--scope", "free", "--d", "3", "--n", "4"],
    ] {
        let v: Value = serde_json::from_str(&stdout(&homsum(&args))).unwrap();
        for c in v["checks"].as_array().unwrap() {
            assert_eq!(c["failures"], 0, "{c}");
            assert_eq!(c["max_deviation"], 0.0);
        }
    }
    assert!(!homsum(&["verify", "--scope", "everything"]).status.success());
}

#[test]
fn verify_writes_report_file() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("report.csv");
    let o = homsum(&["verify", "--scope", "partitions", "--format", "csv", "--out", path(&out)]);
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("check,cases,failures,max_deviation\n"));
}

#[test]
fn sample_rademacher() {
    let dir = TempDir::new().unwrap();
    let k = write(&dir, "pair.json", PAIR);
    let args = ["sample", path(&k), "--law", "rademacher", "--order", "4", "--samples", "20000", "--seed", "9"];
    let text = stdout(&homsum(&args));
    let v: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["mean"], 1.0);
    assert_eq!(v["n"], 20000);
    assert_eq!(v["seed"], 9);
    assert_eq!(text, stdout(&homsum(&args)));
}

#[test]
fn sample_mixture_matches_exact_value() {
    let dir = TempDir::new().unwrap();
    let kernel = r#"{"n": 3, "d": 2, "mode": "exact", "entries": [
        {"idx": [1, 2], "num": 1, "den": 2}, {"idx": [1, 3], "num": 1, "den": 2}, {"idx": [2, 3], "num": 1, "den": 2}
    ], "scale_sq": {"num": 1, "den": 3}}"#;
    let k = write(&dir, "tri.json", kernel);
    let f = homsum::Kernel::from_json(kernel).unwrap();
    let avg = mixture_average_check(&f, &ClassicalLaw::gaussian(), 2, &Scalar::ratio(1, 2)).unwrap();
    assert!(avg.passed);
    let exact = avg.averaged.to_f64() + 3.0;
    let out = stdout(&homsum(&["sample", path(&k), "--law", "mixture-t(gaussian,2,0.5)", "--samples", "1000000", "--seed", "31"]));
    let v: Value = serde_json::from_str(&out).unwrap();
    let (mean, stderr) = (v["mean"].as_f64().unwrap(), v["stderr"].as_f64().unwrap());
    assert!((mean - exact).abs() <= 4.0 * stderr, "{mean} ± {stderr} vs {exact}");
}

#[test]
fn sample_rejects_free_regime() {
    let dir = TempDir::new().unwrap();
    let k = write(&dir, "pair.json", PAIR);
    let o = homsum(&["sample", path(&k), "--regime", "free"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("classical regime only"));
}

#[test]
fn bad_kernel_file() {
    let dir = TempDir::new().unwrap();
    let k = write(&dir, "bad.json", "{\"n\": 2,\n \"d\": 2, \"entries\": [{\"idx\": [1]}]}");
    let o = homsum(&["moments", path(&k)]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("bad.json"), "{err}");
    let k = write(&dir, "trunc.json", "{\"n\": 2,\n");
    let err = String::from_utf8_lossy(&homsum(&["moments", path(&k)]).stderr).to_string();
    assert!(err.contains("line 2"), "{err}");
}
