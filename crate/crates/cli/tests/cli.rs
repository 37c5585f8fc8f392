use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn eal(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eal")).args(args).output().expect("eal runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn run(cmd: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![cmd, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    eal(&args)
}

fn csv_rows(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path).unwrap().records().map(Result::unwrap).collect()
}

const PAIR: &str = r#"
seed = 11
starts = 3

[schedule]
checkpoints = [5000, 20000]

[[factor]]
system = { kind = "rotation", angle = "frac(sqrt2)" }
observable = { kind = "trig", modes = [[1, 1.0, 0.0], [-2, 0.5, 0.5]] }
iterate = { kind = "function", expr = "x^0.9" }

[[factor]]
system = { kind = "rotation", angle = "frac(sqrt3)" }
observable = { kind = "mode", m = 1 }
iterate = { kind = "function", expr = "x^0.5" }
"#;

#[test]
fn classify_single_function_prints_json() {
    let out = eal(&["classify", "--function", "x^0.5", "--classes", "SL,T"]);
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let verdicts = v.as_array().unwrap();
    assert_eq!(verdicts.len(), 2);
    assert_eq!(verdicts[1]["class_name"], "T");
    assert_eq!(verdicts[1]["verdict"], "holds");
    assert_eq!(eal(&["classify", "--function", "x^^2"]).status.code(), Some(2));
}

#[test]
fn classify_catalog_matches_golden_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "golden.toml",
        r#"functions = ["x^0.5", "x^(1/3)*log(x)", "log(x)^2", "log(x)*log(log(x))", "x^0.04*(4/0.04+sin(log(x)))^3", "3*x+1"]"#,
    );
    let out = run("classify", &cfg, dir.path(), &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = csv_rows(&dir.path().join("classify.csv"));
    let verdict = |f: &str, c: &str| {
        rows.iter()
            .find(|r| &r[0] == f && &r[1] == c)
            .map(|r| r[2].to_string())
            .unwrap()
    };
    assert_eq!(verdict("x^0.5", "T"), "holds");
    assert_eq!(verdict("x^(1/3)*log(x)", "T"), "holds");
    assert_eq!(verdict("log(x)^2", "F"), "holds");
    assert_eq!(verdict("log(x)^2", "T"), "fails");
    assert_eq!(verdict("log(x)*log(log(x))", "S"), "holds");
    assert_eq!(verdict("log(x)*log(log(x))", "T"), "fails");
    assert_eq!(verdict("x^0.04*(4/0.04+sin(log(x)))^3", "S"), "holds");
    assert_eq!(verdict("x^0.04*(4/0.04+sin(log(x)))^3", "T"), "fails");
    assert_eq!(verdict("3*x+1", "SL"), "fails");
}

#[test]
fn constant_observables_average_to_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "ones.toml",
        r#"
seed = 2
[schedule]
budget = 9000
[[factor]]
system = { kind = "rotation", angle = "golden" }
observable = { kind = "constant", value = 1.0 }
iterate = { kind = "function", expr = "x^(1/3)*log(x)" }
"#,
    );
    assert!(run("average", &cfg, dir.path(), &[]).status.success());
    let rows = csv_rows(&dir.path().join("average.csv"));
    assert_eq!(rows.len(), 5);
    for r in rows {
        assert_eq!(&r[3], "1");
        assert_eq!(&r[4], "0");
    }
}

#[test]
fn output_bytes_do_not_depend_on_run_or_workers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "pair.toml", PAIR);
    let mut outputs = Vec::new();
    for (i, w) in ["1", "1", "4"].iter().enumerate() {
        let out = dir.path().join(format!("run{i}"));
        assert!(run("average", &cfg, &out, &["--workers", w]).status.success());
        outputs.push((
            fs::read(out.join("average.csv")).unwrap(),
            fs::read(out.join("average.json")).unwrap(),
        ));
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);
}

#[test]
fn rows_carry_hash_version_and_decisions() {
    let dir = tempfile::tempdir().unwrap();
    let toml_cfg = write_config(dir.path(), "pair.toml", PAIR);
    let parsed: toml::Value = toml::from_str(PAIR).unwrap();
    let json_cfg = write_config(dir.path(), "pair.json", &serde_json::to_string(&parsed).unwrap());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(run("average", &toml_cfg, &a, &[]).status.success());
    assert!(run("average", &json_cfg, &b, &[]).status.success());
    let sidecar: Value = serde_json::from_slice(&fs::read(a.join("average.json")).unwrap()).unwrap();
    let hash = sidecar["config_hash"].as_str().unwrap().to_string();
    assert_eq!(hash.len(), 64);
    assert_eq!(sidecar["seed"], 11);
    let rows = csv_rows(&a.join("average.csv"));
    assert_eq!(rows.len(), 6);
    for r in &rows {
        assert_eq!(&r[7], hash);
        assert!(!r[8].is_empty());
        assert!(r[9].contains("splitmix64-start-points"));
    }
    assert_eq!(fs::read(a.join("average.csv")).unwrap(), fs::read(b.join("average.csv")).unwrap());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let broken = write_config(dir.path(), "broken.toml", "seed = \n");
    assert_eq!(run("average", &broken, &out, &[]).status.code(), Some(2));
    let missing = dir.path().join("missing.toml");
    assert_eq!(run("average", &missing, &out, &[]).status.code(), Some(2));

    let unordered = PAIR.replace("x^0.9", "x^0.3");
    let cfg = write_config(dir.path(), "unordered.toml", &unordered);
    let o = run("average", &cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("growth"));

    let strict = format!("tolerance = 1e-9\n{}", PAIR.replace("starts = 3", "starts = 1"));
    let cfg = write_config(dir.path(), "strict.toml", &strict);
    assert_eq!(run("limit", &cfg, &out, &[]).status.code(), Some(3));
    assert!(out.join("limit.csv").exists());

    // A rational gamma breaks the equidistribution behind the window
    // integral, so neither normalization matches the brute-force average.
    let cfg = write_config(
        dir.path(),
        "rational_gamma.toml",
        r#"
seed = 1
[schedule]
budget = 10000
[[factor]]
system = { kind = "rotation", angle = "1/2" }
observable = { kind = "mode", m = 1 }
iterate = { kind = "linear", slope = 2 }
start = 0
"#,
    );
    assert_eq!(run("limit", &cfg, &out, &[]).status.code(), Some(4));
}

#[test]
fn irrational_limit_selects_scaled_window() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "irrational.toml",
        r#"
seed = 1
tolerance = 0.02
[schedule]
budget = 200000
[[factor]]
system = { kind = "rotation", angle = "1/sqrt2" }
observable = { kind = "trig", modes = [[1, 1.0, 0.0], [0, 0.5, 0.0], [-3, 0.0, 0.3]] }
iterate = { kind = "linear", slope = "sqrt2", offset = 0.3 }
start = 0.17
"#,
    );
    let o = run("limit", &cfg, dir.path(), &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&dir.path().join("limit.csv"));
    assert_eq!(&rows[0][10], "scaled");
    assert!(rows[0][9].contains("1:1"));
    assert!(rows[0][13].contains("window-normalization-selected-by-calibration"));
}

#[test]
fn occupancy_and_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "sqrt.toml",
        r#"
[schedule]
budget = 9999
[[factor]]
system = { kind = "rotation", angle = "sqrt2" }
observable = { kind = "mode", m = 1 }
iterate = { kind = "function", expr = "x^(1/2)" }
start = 0
"#,
    );
    assert!(run("occupancy", &cfg, dir.path(), &[]).status.success());
    let rows = csv_rows(&dir.path().join("occupancy.csv"));
    let total: u64 = rows.iter().map(|r| r[1].parse::<u64>().unwrap()).sum();
    assert_eq!(total, 9999);
    for r in &rows {
        let b: i64 = r[0].parse().unwrap();
        assert_eq!(r[1].parse::<i64>().unwrap(), 2 * b + 1);
    }

    let sweep = format!(
        "tolerance = 0.1\n{}\n[sweep]\nexponents = [[0.9, 0.8], [0.5]]\n",
        PAIR.replace("checkpoints = [5000, 20000]", "budget = 30000")
    );
    let cfg = write_config(dir.path(), "sweep.toml", &sweep);
    let o = run("sweep", &cfg, dir.path(), &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&dir.path().join("sweep.csv"));
    assert_eq!(rows.len(), 2 * 3);
    assert_eq!(&rows[0][1], "0.9;0.5");
    assert_eq!(&rows[3][1], "0.8;0.5");
}
