use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bidisc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bidisc"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn out_dir(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join(name);
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

fn inspect(spec: &str) -> Value {
    let out = bidisc(&["inspect", spec]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["job"]["command"], "inspect");
    assert_eq!(v["input_hash"].as_str().unwrap().len(), 40);
    v["result"].clone()
}

fn close(v: &Value, re: f64, im: f64) -> bool {
    (v[0].as_f64().unwrap() - re).abs() < 1e-8 && (v[1].as_f64().unwrap() - im).abs() < 1e-8
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .unwrap();
    assert_eq!(
        rdr.headers().unwrap(),
        vec!["branch_id", "theta", "re_g", "im_g"]
    );
    rdr.records()
        .map(|r| r.unwrap().iter().map(String::from).collect())
        .collect()
}

#[test]
fn inspect_kappa_reports_its_singularity() {
    let r = inspect("kappa");
    assert_eq!(r["bidegree"], serde_json::json!([1, 1]));
    assert_eq!(r["stability"]["consistent"], true);
    let s = r["singularities"].as_array().unwrap();
    assert_eq!(s.len(), 1);
    assert!(close(&s[0]["location"][0], 1.0, 0.0) && close(&s[0]["location"][1], 1.0, 0.0));
    assert!(close(&s[0]["nontangential_value"], -1.0, 0.0));
}

#[test]
fn inspect_amy_reports_its_line() {
    let r = inspect("amy");
    let lines = r["exceptional_values"].as_array().unwrap();
    assert!(lines.iter().any(|l| {
        l["orientation"] == "vertical"
            && close(&l["tau"], 1.0, 0.0)
            && close(&l["alpha"], -1.0, 0.0)
    }));
}

#[test]
fn inspect_constant_has_empty_lists() {
    let r = inspect(r#"{"p": {"bidegree": [0, 0], "coeffs": [[[2, 0]]]}}"#);
    assert_eq!(r["singularities"], serde_json::json!([]));
    assert_eq!(r["exceptional_values"], serde_json::json!([]));
}

#[test]
fn levelset_kappa_minus_one_is_two_lines() {
    let dir = out_dir("ls_kappa");
    let out = bidisc(&[
        "levelset",
        "kappa",
        "--alpha",
        "-1",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let rows = csv_rows(&dir.join("levelset.csv"));
    assert_eq!(rows.len(), 2);
    assert!(rows[0][0].starts_with("VLINE:") && rows[1][0].starts_with("HLINE:"));
    let v: Value =
        serde_json::from_slice(&std::fs::read(dir.join("levelset.json")).unwrap()).unwrap();
    assert_eq!(v["result"]["branches"], serde_json::json!([]));
}

#[test]
fn levelset_amy_minus_one_is_line_and_anti_diagonal() {
    let dir = out_dir("ls_amy");
    let out = bidisc(&[
        "levelset",
        "amy",
        "--alpha=-1",
        "--resolution",
        "512",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let rows = csv_rows(&dir.join("levelset.csv"));
    assert_eq!(
        rows.iter().filter(|r| r[0].starts_with("VLINE:")).count(),
        1
    );
    let branch: Vec<_> = rows.iter().filter(|r| r[0] == "0").collect();
    assert_eq!(branch.len(), 512);
    assert!(rows
        .iter()
        .all(|r| r[0] == "0" || r[0].starts_with("VLINE:")));
    for r in branch {
        let t: f64 = r[1].parse().unwrap();
        let (x, y): (f64, f64) = (r[2].parse().unwrap(), r[3].parse().unwrap());
        assert!((x - t.cos()).abs() < 1e-8 && (y + t.sin()).abs() < 1e-8);
    }
}

#[test]
fn levelset_kappa_i_passes_through_known_point() {
    let dir = out_dir("ls_kappa_i");
    let out = bidisc(&[
        "levelset",
        "kappa",
        "--alpha",
        "i",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let rows = csv_rows(&dir.join("levelset.csv"));
    assert!(rows.iter().all(|r| r[0] == "0"));
    // theta = pi is the excluded angle, so check the two straddling samples.
    let near: Vec<_> = rows
        .iter()
        .filter(|r| (r[1].parse::<f64>().unwrap() - std::f64::consts::PI).abs() < 1e-3)
        .collect();
    assert_eq!(near.len(), 2);
    for r in near {
        let (x, y): (f64, f64) = (r[2].parse().unwrap(), r[3].parse().unwrap());
        assert!((x - 0.6).abs() < 1e-3 && (y + 0.8).abs() < 1e-3);
    }
}

#[test]
fn verdict_identity_pair_is_bounded() {
    let dir = out_dir("verdict_identity");
    let out = bidisc(&[
        "verdict",
        "z1",
        "z2",
        "--samples",
        "2e4",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v: Value =
        serde_json::from_slice(&std::fs::read(dir.join("verdict.json")).unwrap()).unwrap();
    assert_eq!(
        v["result"]["conclusion_per_beta"][0]["conclusion"],
        "BOUNDED_CONSISTENT"
    );
    assert_eq!(v["job"]["specs"], serde_json::json!(["z1", "z2"]));
    assert!(dir.join("ladder_beta_0.csv").exists());
}

#[test]
fn verdict_identical_singular_coordinates() {
    let dir = out_dir("verdict_kk");
    let out = bidisc(&[
        "verdict",
        "kappa",
        "kappa",
        "--samples",
        "2e4",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v: Value =
        serde_json::from_slice(&std::fs::read(dir.join("verdict.json")).unwrap()).unwrap();
    assert_eq!(
        v["result"]["conclusion_per_beta"][0]["conclusion"],
        "NOT_BOUNDED"
    );
}

#[test]
fn input_errors_exit_2() {
    assert_eq!(
        bidisc(&["inspect", "no_such_symbol"]).status.code(),
        Some(2)
    );
    assert_eq!(
        bidisc(&[
            "inspect",
            r#"{"p": {"bidegree": [1, 0], "coeffs": [[[1, 0]], [[2, 0]]]}}"#
        ])
        .status
        .code(),
        Some(2)
    );
    assert_eq!(
        bidisc(&["levelset", "kappa", "--alpha", "2"]).status.code(),
        Some(2)
    );
    assert_eq!(
        bidisc(&["verdict", "z1", "z2", "--beta", "1.5"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        bidisc(&["verdict", "z1", "z2", "--samples", "10"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn reproduce_single_example_at_low_samples() {
    let dir = out_dir("reproduce_example1");
    let out = bidisc(&[
        "reproduce-examples",
        "--only",
        "example1",
        "--samples",
        "1e5",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );
    let v: Value =
        serde_json::from_slice(&std::fs::read(dir.join("reproduce.json")).unwrap()).unwrap();
    let rows = v["result"].as_array().unwrap();
    assert!(
        rows.len() >= 2
            && rows
                .iter()
                .all(|r| r["case"] == "example1" && r["pass"] == true)
    );
    assert_eq!(v["job"]["only"], "example1");
}

#[test]
fn reruns_are_byte_identical() {
    let (a, b) = (out_dir("rerun_a"), out_dir("rerun_b"));
    for dir in [&a, &b] {
        let d = dir.to_str().unwrap();
        assert!(
            bidisc(&["verdict", "kappa", "amy", "--samples", "2e4", "--out", d])
                .status
                .success()
        );
        assert!(bidisc(&[
            "levelset",
            "amy",
            "--alpha",
            "-1",
            "--resolution",
            "256",
            "--out",
            d
        ])
        .status
        .success());
    }
    let mut names: Vec<_> = std::fs::read_dir(&a)
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert!(names.len() >= 4);
    for name in names {
        let (x, y) = (
            std::fs::read(a.join(&name)).unwrap(),
            std::fs::read(b.join(&name)).unwrap(),
        );
        // Only the recorded output directory differs between the two runs.
        let strip = |bytes: Vec<u8>, dir: &Path| {
            String::from_utf8(bytes)
                .unwrap()
                .replace(dir.to_str().unwrap(), "OUT")
        };
        assert_eq!(strip(x, &a), strip(y, &b), "{name:?} differs");
    }
}

#[test]
fn unwindowed_small_sample_ladder_exits_3() {
    let dir = out_dir("unwindowed");
    let out = bidisc(&[
        "verdict",
        "z1",
        "z2",
        "--window",
        "off",
        "--samples",
        "1e4",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
}
