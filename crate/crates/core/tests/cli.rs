use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn rwz(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rwz")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write(dir: &TempDir, name: &str, body: &str) -> String {
    let p = dir.path().join(name);
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

const SIMULATE: &str = r#"
[domain]
kind = "interval"
a = 0.0
b = 1.0

[coefficients]
preset = "trig"
drift_linear = -0.5

[driver]
kind = "mollifier"

[simulate]
n_fine = 1024
delta = 0.0625
x0 = [0.5]
seed = 3
"#;

#[test]
fn skorohod_matches_the_hand_computed_reflection() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "h.csv", "t,h\n0,0\n1,-1\n2,1\n");
    let out = rwz(&["skorohod", "--input", &input, "--domain", "half-line:0"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(
        String::from_utf8(out.stdout).unwrap(),
        "t,x1,k1,k_tv\n0.0,0.0,0.0,0.0\n1.0,0.0,1.0,1.0\n2.0,2.0,1.0,1.0\n"
    );
}

#[test]
fn skorohod_reads_the_domain_from_the_config() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "h.csv", "0,0.5\n0.5,1.5\n1,-0.25\n");
    let cfg = write(&dir, "c.toml", "[domain]\nkind = \"interval\"\na = 0.0\nb = 1.0\n");
    let out = rwz(&["--config", &cfg, "skorohod", "--input", &input, "--format", "json"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let x: Vec<f64> = v["x"].as_array().unwrap().iter().map(|n| n[0].as_f64().unwrap()).collect();
    assert_eq!(x, vec![0.5, 1.0, 0.0]);
}

#[test]
fn skorohod_input_errors() {
    let dir = TempDir::new().unwrap();
    let empty = write(&dir, "empty.csv", "");
    assert_eq!(code(&rwz(&["skorohod", "--input", &empty, "--domain", "half-line"])), 2);
    let missing = dir.path().join("nope.csv");
    assert_eq!(code(&rwz(&["skorohod", "--input", missing.to_str().unwrap(), "--domain", "half-line"])), 2);
    let outside = write(&dir, "out.csv", "0,-1\n1,0\n");
    let out = rwz(&["skorohod", "--input", &outside, "--domain", "half-line:0"]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
    assert!(!stderr(&out).is_empty());
    let ok = write(&dir, "ok.csv", "0,0\n1,1\n");
    assert_eq!(code(&rwz(&["skorohod", "--input", &ok, "--domain", "sphere"])), 4);
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(code(&rwz(&["frobnicate"])), 2);
    assert_eq!(code(&rwz(&["stats", "--threads", "zero"])), 2);
}

#[test]
fn stats_rejects_bad_arguments() {
    let out = rwz(&["stats", "--driver", "mollifier", "--n", "0"]);
    assert_eq!(code(&out), 4, "{}", stderr(&out));
    assert_eq!(code(&rwz(&["stats", "--driver", "brownian-bridge"])), 4);
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "c.toml", "[driver]\nkind = \"mollifier\"\nkernel = \"no-such-kernel\"\n");
    assert_eq!(code(&rwz(&["--config", &cfg, "stats"])), 4);
}

fn s12(json: &[u8]) -> (f64, f64) {
    let v: serde_json::Value = serde_json::from_slice(json).unwrap();
    assert_eq!(v["r"], 2);
    (v["s"]["mean"][1].as_f64().unwrap(), v["s"]["stderr"][1].as_f64().unwrap())
}

#[test]
fn stats_skew_parts() {
    let out = rwz(&["stats", "--driver", "mollifier", "--n", "20000", "--seed", "1"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let (m, se) = s12(&out.stdout);
    assert!(m.abs() <= 4.0 * se, "mollifier s12 {m} +- {se}");

    let out = rwz(&["stats", "--driver", "mcshane", "--n", "20000", "--seed", "2"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let (m, se) = s12(&out.stdout);
    let target = 1.0 / (3.0 * std::f64::consts::PI);
    assert!((m - target).abs() <= 4.0 * se, "mcshane s12 {m} +- {se}");
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["recursion"]["rows"].as_array().unwrap().len(), 2);
}

#[test]
fn simulate_stays_in_the_domain_and_reruns_identically() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "sim.toml", SIMULATE);
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        let out = rwz(&["--config", &cfg, "simulate", "--out", p.to_str().unwrap()]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
    }
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text, fs::read_to_string(&b).unwrap());
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,x1,xdelta1,k_tv,kdelta_tv"));
    let mut rows = 0;
    for line in lines {
        let v: Vec<f64> = line.split(',').map(|s| s.parse().unwrap()).collect();
        assert!((0.0..=1.0).contains(&v[1]) && (0.0..=1.0).contains(&v[2]), "{line}");
        rows += 1;
    }
    assert_eq!(rows, 1025);
    let other = rwz(&["--config", &cfg, "simulate", "--seed", "4"]);
    assert_ne!(other.stdout, fs::read(&a).unwrap());
}

#[test]
fn zero_noise_simulation_has_identical_columns() {
    let dir = TempDir::new().unwrap();
    let body = SIMULATE.replace("preset = \"trig\"", "preset = \"additive\"\nsigma = 0.0");
    let cfg = write(&dir, "zero.toml", &body);
    let out = rwz(&["--config", &cfg, "simulate"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    for line in String::from_utf8(out.stdout).unwrap().lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols[1], cols[2], "{line}");
    }
}

#[test]
fn simulate_rejects_a_mesh_that_does_not_divide_the_horizon() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "bad.toml", &SIMULATE.replace("delta = 0.0625", "delta = 0.3"));
    let out = rwz(&["--config", &cfg, "simulate"]);
    assert_eq!(code(&out), 4);
    assert!(stderr(&out).contains("does not divide"), "{}", stderr(&out));
}

#[test]
fn simulate_start_outside_is_a_domain_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "out.toml", &SIMULATE.replace("x0 = [0.5]", "x0 = [1.5]"));
    assert_eq!(code(&rwz(&["--config", &cfg, "simulate"])), 3);
}

const STUDY: &str = r#"
[domain]
kind = "interval"
a = 0.0
b = 1.0

[coefficients]
preset = "trig"
drift_linear = -0.5

[driver]
kind = "piecewise-linear"

[study]
name = "small"
x0 = [0.5]
delta_schedule = [0.0625, 0.03125, 0.015625]
n_paths = 40
n_fine_ref = 512
correction_samples = 200
"#;

#[test]
fn converge_writes_named_reports() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "study.toml", STUDY);
    let out_dir = dir.path().join("reports");
    fs::create_dir(&out_dir).unwrap();
    let out = rwz(&["--config", &cfg, "converge", "--out", out_dir.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(String::from_utf8_lossy(&out.stdout).contains("slope"));
    let mut names: Vec<String> = fs::read_dir(&out_dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names.len(), 2);
    assert!(names[0].starts_with("small-") && names[0].ends_with(".csv"));
    assert_eq!(Path::new(&names[0]).file_stem(), Path::new(&names[1]).file_stem());
    let csv = fs::read_to_string(out_dir.join(&names[0])).unwrap();
    assert!(csv.starts_with("delta,n_delta,p,error,stderr,n_paths\n"));
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn converge_config_errors() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("missing.toml");
    assert_eq!(code(&rwz(&["--config", missing.to_str().unwrap(), "converge"])), 2);

    let cfg = write(&dir, "q.toml", &STUDY.replace("x0 = [0.5]", "x0 = [0.5]\nq = 0.3"));
    let out = rwz(&["--config", &cfg, "converge"]);
    assert_eq!(code(&out), 4);
    assert!(stderr(&out).contains("1/5"), "{}", stderr(&out));

    let cfg = write(&dir, "typo.toml", &STUDY.replace("n_paths", "n_path"));
    assert_eq!(code(&rwz(&["--config", &cfg, "converge"])), 4);
    let cfg = write(&dir, "preset.toml", &STUDY.replace("\"trig\"", "\"cubic\""));
    assert_eq!(code(&rwz(&["--config", &cfg, "converge"])), 4);
}
