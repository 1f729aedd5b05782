//! End-to-end tests of the `ensemblex` binary: exit-code contract, report
//! values, CSV shape, and bit-reproducible sampling.

use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ensemblex"))
}

/// Fresh scratch directory per test.
fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("ensemblex-cli-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_model(dir: &PathBuf, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn stdout_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

const MATCHING4: &str = r#"{
  "layers": [4],
  "master": [[1]],
  "constraints": [{"pair": [1,1], "type": "degrees", "values": [1,1,1,1]}]
}"#;

const LINKS4: &str = r#"{
  "layers": [4],
  "master": [[1]],
  "constraints": [{"pair": [1,1], "type": "link_count", "value": 3}]
}"#;

#[test]
fn check_valid_model_exits_zero() {
    let dir = scratch("check-ok");
    let model = write_model(&dir, "m.json", MATCHING4);
    let out = bin().arg("check").arg(&model).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert_eq!(v["feasible"], true);
    assert_eq!(v["blocks"][0]["feasible"], true);
}

#[test]
fn check_sum_mismatch_exits_one() {
    let dir = scratch("check-sum");
    let model = write_model(
        &dir,
        "m.json",
        r#"{
          "layers": [2, 2],
          "master": [[0,1],[1,0]],
          "constraints": [
            {"pair": [1,2], "type": "degrees", "values": [2,1]},
            {"pair": [2,1], "type": "degrees", "values": [1,1]}
          ]
        }"#,
    );
    let out = bin().arg("check").arg(&model).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let v = stdout_json(&out);
    assert_eq!(v["feasible"], false);
    let text = v["violations"].to_string();
    assert!(text.contains("sum mismatch"), "violations: {text}");
}

#[test]
fn check_malformed_json_exits_two() {
    let dir = scratch("check-bad");
    let model = write_model(&dir, "m.json", "{not json");
    let out = bin().arg("check").arg(&model).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn check_unknown_field_exits_two() {
    let dir = scratch("check-unknown");
    let model = write_model(
        &dir,
        "m.json",
        r#"{"layers":[2],"master":[[1]],"constraints":[],"surprise":1}"#,
    );
    let out = bin().arg("check").arg(&model).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn entropy_perfect_matching_value() {
    let dir = scratch("entropy-matching");
    let model = write_model(&dir, "m.json", MATCHING4);
    let out = bin().arg("entropy").arg(&model).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    // three perfect matchings against independent edges with p = 1/3
    let expected = (729.0f64 / 48.0).ln() / 4.0;
    assert!((v["s_n"].as_f64().unwrap() - expected).abs() < 1e-9);
    assert_eq!(v["all_exact"], true);
}

#[test]
fn entropy_link_count_value() {
    let dir = scratch("entropy-links");
    let model = write_model(&dir, "m.json", LINKS4);
    let out = bin().arg("entropy").arg(&model).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    let expected = (64.0f64 / 20.0).ln() / 4.0; // 0.290788...
    assert!((v["s_n"].as_f64().unwrap() - expected).abs() < 1e-9);
}

#[test]
fn entropy_bits_flag_rescales() {
    let dir = scratch("entropy-bits");
    let model = write_model(&dir, "m.json", LINKS4);
    let nats = stdout_json(&bin().arg("entropy").arg(&model).output().unwrap());
    let bits = stdout_json(&bin().arg("entropy").arg(&model).arg("--bits").output().unwrap());
    let ratio = bits["S_n"].as_f64().unwrap() / nats["S_n"].as_f64().unwrap();
    assert!((ratio - 1.0 / std::f64::consts::LN_2).abs() < 1e-12);
    assert_eq!(bits["unit"], "bits");
}

#[test]
fn entropy_csv_round_trips() {
    let dir = scratch("entropy-csv");
    let model = write_model(&dir, "m.json", MATCHING4);
    let out = bin()
        .args(["entropy"])
        .arg(&model)
        .args(["--format", "csv"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "row,pair_s,pair_t,ln_omega,ln_p_canonical,s,exact"
    );
    let per_node = text
        .lines()
        .find(|l| l.starts_with("per_node"))
        .expect("per_node row");
    let s: f64 = per_node.split(',').nth(5).unwrap().parse().unwrap();
    let expected = (729.0f64 / 48.0).ln() / 4.0;
    assert!((s - expected).abs() < 1e-9);
}

#[test]
fn entropy_asymptotic_emits_limit_when_fractions_present() {
    let dir = scratch("entropy-limit");
    // two-layer multiplex: identical 2-regular layers, no inter-layer pairs
    let model = write_model(
        &dir,
        "m.json",
        r#"{
          "layers": [6, 6],
          "master": [[1,0],[0,1]],
          "constraints": [
            {"pair": [1,1], "type": "degrees", "values": [2,2,2,2,2,2]},
            {"pair": [2,2], "type": "degrees", "values": [2,2,2,2,2,2]}
          ],
          "limits": {"A": [0.5, 0.5]}
        }"#,
    );
    let out = bin()
        .args(["entropy"])
        .arg(&model)
        .args(["--mode", "asymptotic"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    // delta-at-2 limit law in every layer: s_infinity = g(2) = 2 - ln 2
    let expected = 2.0 - 2.0f64.ln();
    assert!((v["s_infinity"].as_f64().unwrap() - expected).abs() < 1e-12);
}

#[test]
fn entropy_exact_over_cap_exits_one() {
    let dir = scratch("entropy-cap");
    let k: Vec<String> = vec!["2".into(); 20];
    let model = write_model(
        &dir,
        "m.json",
        &format!(
            r#"{{"layers":[20],"master":[[1]],"constraints":[{{"pair":[1,1],"type":"degrees","values":[{}]}}]}}"#,
            k.join(",")
        ),
    );
    let out = bin().arg("entropy").arg(&model).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("cap"), "stderr: {err}");
}

#[test]
fn scan_scale_free_rows_decrease() {
    let out = bin()
        .args(["scan", "--family", "scale-free", "--gamma-range", "2:6:1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 5);
    let values: Vec<f64> = rows
        .iter()
        .map(|r| r.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    for w in values.windows(2) {
        assert!(w[1] < w[0], "s_infinity must decrease in gamma: {values:?}");
    }
}

#[test]
fn scan_regular_rows_and_empty_range() {
    let out = bin()
        .args(["scan", "--family", "regular", "--k", "2", "--n-range", "6:12:2"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 5); // header + 4 rows

    let empty = bin()
        .args(["scan", "--family", "regular", "--k", "2", "--n-range", "10:6:2"])
        .output()
        .unwrap();
    assert_eq!(empty.status.code(), Some(1));
}

#[test]
fn sample_same_seed_is_byte_identical() {
    let dir = scratch("sample-repro");
    let model = write_model(&dir, "m.json", MATCHING4);
    for ensemble in ["mic", "can"] {
        let (a, b) = (dir.join(format!("{ensemble}-a")), dir.join(format!("{ensemble}-b")));
        for out_dir in [&a, &b] {
            let out = bin()
                .args(["sample"])
                .arg(&model)
                .args(["--ensemble", ensemble, "--replicas", "20", "--seed", "99", "--out"])
                .arg(out_dir)
                .output()
                .unwrap();
            assert_eq!(out.status.code(), Some(0));
        }
        let mut names: Vec<String> = fs::read_dir(&a)
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect();
        names.sort();
        assert_eq!(names.len(), 21); // 20 replicas + summary.json
        for name in names {
            let left = fs::read(a.join(&name)).unwrap();
            let right = fs::read(b.join(&name)).unwrap();
            assert_eq!(left, right, "{ensemble}/{name} differs between runs");
        }
    }
}

#[test]
fn sample_mic_matching_frequencies_near_uniform() {
    let dir = scratch("sample-freq");
    let model = write_model(&dir, "m.json", MATCHING4);
    let out_dir = dir.join("out");
    let out = bin()
        .args(["sample"])
        .arg(&model)
        .args(["--ensemble", "mic", "--replicas", "3000", "--seed", "5", "--out"])
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap();
    let freq = summary["graph_frequencies"].as_object().unwrap();
    assert_eq!(freq.len(), 3); // the three perfect matchings on 4 nodes
    for (graph, p) in freq {
        let p = p.as_f64().unwrap();
        // 4 sigma of a Bernoulli(1/3) mean over 3000 draws
        assert!((p - 1.0 / 3.0).abs() < 4.0 * (2.0f64 / 9.0 / 3000.0).sqrt(), "{graph}: {p}");
    }
}

#[test]
fn sample_edge_lists_are_zero_based_pairs() {
    let dir = scratch("sample-format");
    let model = write_model(&dir, "m.json", LINKS4);
    let out_dir = dir.join("out");
    bin()
        .args(["sample"])
        .arg(&model)
        .args(["--ensemble", "mic", "--replicas", "2", "--seed", "1", "--out"])
        .arg(&out_dir)
        .output()
        .unwrap();
    let text = fs::read_to_string(out_dir.join("replica-000.edgelist")).unwrap();
    assert_eq!(text.lines().count(), 3); // exactly L = 3 links
    for line in text.lines() {
        let parts: Vec<usize> = line.split(' ').map(|p| p.parse().unwrap()).collect();
        assert_eq!(parts.len(), 2);
        assert!(parts[0] < parts[1] && parts[1] < 4);
    }
}

#[test]
fn oracle_agreement_and_cap() {
    let dir = scratch("oracle");
    let model = write_model(&dir, "m.json", MATCHING4);
    let out = bin().arg("oracle").arg(&model).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert_eq!(v["omega_exact"], 3);
    assert!(v["max_discrepancy"].as_f64().unwrap() < 1e-9);

    let big = write_model(
        &dir,
        "big.json",
        r#"{"layers":[6],"master":[[1]],"constraints":[{"pair":[1,1],"type":"degrees","values":[1,1,1,1,1,1]}]}"#,
    );
    let out = bin().arg("oracle").arg(&big).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("cap"), "stderr: {err}");
}

#[test]
fn oracle_one_sided_bipartite_agrees() {
    let dir = scratch("oracle-oneside");
    let model = write_model(
        &dir,
        "m.json",
        r#"{
          "layers": [3, 4],
          "master": [[0,1],[1,0]],
          "constraints": [{"pair": [1,2], "type": "degrees", "values": [2,2,2]}],
          "class": "proportional"
        }"#,
    );
    let out = bin().arg("oracle").arg(&model).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert_eq!(v["omega_exact"], 216); // C(4,2)^3
    assert!(v["max_discrepancy"].as_f64().unwrap() < 1e-9);
}

#[test]
fn thread_env_var_does_not_change_output() {
    let dir = scratch("threads");
    let model = write_model(&dir, "m.json", MATCHING4);
    let single = bin()
        .env("ENSEMBLEX_THREADS", "1")
        .args(["scan", "--family", "scale-free", "--gamma-range", "1.5:3:0.5"])
        .output()
        .unwrap();
    let many = bin()
        .env("ENSEMBLEX_THREADS", "8")
        .args(["scan", "--family", "scale-free", "--gamma-range", "1.5:3:0.5"])
        .output()
        .unwrap();
    assert_eq!(single.stdout, many.stdout);
    // sampling under a thread cap stays replica-deterministic as well
    let (a, b) = (dir.join("t1"), dir.join("t8"));
    for (threads, out_dir) in [("1", &a), ("8", &b)] {
        bin()
            .env("ENSEMBLEX_THREADS", threads)
            .args(["sample"])
            .arg(&model)
            .args(["--ensemble", "can", "--replicas", "16", "--seed", "4", "--out"])
            .arg(out_dir)
            .output()
            .unwrap();
    }
    for i in 0..16 {
        let name = format!("replica-{i:03}.edgelist");
        assert_eq!(
            fs::read(a.join(&name)).unwrap(),
            fs::read(b.join(&name)).unwrap()
        );
    }
}
