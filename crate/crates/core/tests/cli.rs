//! End-to-end tests of the `dual-threshold` binary.

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dual_threshold::commands::SweepConfig;
use dual_threshold::io::write_logits_csv;
use dual_threshold::{exchangeable_split, generate_dataset, GeneratorConfig};
use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dual-threshold"))
        .args(args)
        .output()
        .expect("spawn binary")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path_str(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

/// Two correct samples with scores 0.1, 0.2 and two misclassified ones with
/// scores 0.8, 0.9 (K=2, so the other class wins).
fn four_sample_csv(dir: &Path) -> PathBuf {
    let mut text = String::from("sample_id,label,prob_0,prob_1\n");
    for (i, score) in [0.1f64, 0.2, 0.8, 0.9].into_iter().enumerate() {
        let p = (-score).exp();
        text.push_str(&format!("s{i},0,{p:.9},{:.9}\n", 1.0 - p));
    }
    let path = dir.join("four.csv");
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn calibrate_worked_example() {
    let dir = TempDir::new().unwrap();
    let cal = four_sample_csv(dir.path());
    let out = dir.path().join("t.json");
    let o = run(&[
        "calibrate",
        "--cal",
        &path_str(&cal),
        "--alpha",
        "0.5",
        "--out",
        &path_str(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("q_abs=0.200000"), "{text}");
    assert!(text.contains("youden_j=1.000000"), "{text}");
    assert!(text.contains("n=4"), "{text}");
    // k = ceil(5 * 0.5) = 3 -> third smallest score
    assert!(text.contains("q_conf=0.800000"), "{text}");
    assert!(stderr(&o).is_empty());

    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(json["format_version"], 1);
    assert_eq!(json["n_calibration"], 4);
}

#[test]
fn calibrate_warns_on_infinite_conformal_threshold() {
    let dir = TempDir::new().unwrap();
    let cal = four_sample_csv(dir.path());
    let out = dir.path().join("t.json");
    // alpha = 0.1 < 1/5
    let o = run(&[
        "calibrate",
        "--cal",
        &path_str(&cal),
        "--out",
        &path_str(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("q_conf=inf"));
    assert!(
        stderr(&o).starts_with("warning: q_conf=inf"),
        "{}",
        stderr(&o)
    );
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(json["q_conf"], "inf");
}

#[test]
fn missing_inputs_exit_2() {
    let dir = TempDir::new().unwrap();
    let missing = path_str(&dir.path().join("nope.csv"));
    let out = path_str(&dir.path().join("t.json"));
    let o = run(&["calibrate", "--cal", &missing, "--out", &out]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("error:"), "{}", stderr(&o));
    assert!(stderr(&o).contains("nope.csv"));

    let o = run(&["evaluate", "--test", &missing, "--thresholds", &out]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(run(&["calibrate", "--bogus"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    let dir = TempDir::new().unwrap();
    let cal = four_sample_csv(dir.path());
    let out = path_str(&dir.path().join("t.json"));
    let o = run(&[
        "calibrate",
        "--cal",
        &path_str(&cal),
        "--alpha",
        "1.5",
        "--out",
        &out,
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("alpha"));
}

#[test]
fn parse_error_names_the_line() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("bad.csv");
    std::fs::write(
        &csv,
        "sample_id,label,logit_0,logit_1\na,0,1.0,2.0\nb,2,1.0,2.0\n",
    )
    .unwrap();
    let o = run(&[
        "calibrate",
        "--cal",
        &path_str(&csv),
        "--out",
        &path_str(&dir.path().join("t.json")),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bad.csv:3:"), "{}", stderr(&o));
}

#[test]
fn version_lists_formats() {
    let o = run(&["--version"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(
        text.contains("thresholds format 1") && text.contains("generator v1"),
        "{text}"
    );
}

fn write_generated(dir: &Path, name: &str, config: &GeneratorConfig) -> PathBuf {
    let path = dir.join(name);
    write_logits_csv(&generate_dataset(config).unwrap(), &path).unwrap();
    path
}

#[test]
fn evaluate_rejects_class_count_mismatch() {
    let dir = TempDir::new().unwrap();
    let cal = four_sample_csv(dir.path());
    let t = path_str(&dir.path().join("t.json"));
    assert!(run(&[
        "calibrate",
        "--cal",
        &path_str(&cal),
        "--alpha",
        "0.5",
        "--out",
        &t
    ])
    .status
    .success());
    let test = write_generated(
        dir.path(),
        "k3.csv",
        &GeneratorConfig {
            k_classes: 3,
            n_samples: 20,
            ..Default::default()
        },
    );
    let o = run(&["evaluate", "--test", &path_str(&test), "--thresholds", &t]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("3 classes"), "{}", stderr(&o));
}

#[test]
fn evaluate_rejects_tampered_thresholds() {
    let dir = TempDir::new().unwrap();
    let cal = four_sample_csv(dir.path());
    let t = dir.path().join("t.json");
    assert!(run(&[
        "calibrate",
        "--cal",
        &path_str(&cal),
        "--alpha",
        "0.5",
        "--out",
        &path_str(&t)
    ])
    .status
    .success());
    let text = std::fs::read_to_string(&t)
        .unwrap()
        .replace("\"alpha\": 0.5", "\"alpha\": 1.5");
    std::fs::write(&t, text).unwrap();
    let o = run(&[
        "evaluate",
        "--test",
        &path_str(&cal),
        "--thresholds",
        &path_str(&t),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("alpha"), "{}", stderr(&o));
}

#[test]
fn evaluate_in_sample_and_sentinel() {
    let dir = TempDir::new().unwrap();
    let cal = write_generated(
        dir.path(),
        "cal.csv",
        &GeneratorConfig {
            n_samples: 800,
            seed: 11,
            ..Default::default()
        },
    );
    let t = path_str(&dir.path().join("t.json"));
    let records = dir.path().join("records.csv");
    let summary = dir.path().join("summary.json");
    assert!(run(&["calibrate", "--cal", &path_str(&cal), "--out", &t])
        .status
        .success());
    let o = run(&[
        "evaluate",
        "--test",
        &path_str(&cal),
        "--thresholds",
        &t,
        "--records-out",
        &path_str(&records),
        "--summary-out",
        &path_str(&summary),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        std::fs::read_to_string(&records).unwrap().lines().count(),
        801
    );
    let s: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&summary).unwrap()).unwrap();
    let coverage = s[0]["coverage"].as_f64().unwrap();
    assert!(coverage >= 0.9 - 0.02, "in-sample coverage {coverage}");
    assert_eq!(s[0]["n"], 800);

    // alpha below 1/(n+1): every label is in every set
    let inf = path_str(&dir.path().join("inf.json"));
    assert!(run(&[
        "calibrate",
        "--cal",
        &path_str(&cal),
        "--alpha",
        "0.001",
        "--out",
        &inf
    ])
    .status
    .success());
    let summary_csv = dir.path().join("summary.csv");
    let o = run(&[
        "evaluate",
        "--test",
        &path_str(&cal),
        "--thresholds",
        &inf,
        "--summary-out",
        &path_str(&summary_csv),
        "--condition",
        "rain",
        "--severity",
        "2",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&summary_csv).unwrap();
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(&row[..5], &["rain", "2", "800", "1.000000", "10.000000"]);
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("config.toml");
    std::fs::write(&path, body).unwrap();
    path
}

#[test]
fn gen_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let config = write_config(
        dir.path(),
        "seed = 5\nconditions = [\"rain\", \"fog\"]\nseverities = [2]\n[generator]\nn_samples = 150\n",
    );
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let o = run(&["gen", &path_str(&config), "--out", &path_str(out)]);
        assert!(o.status.success(), "{}", stderr(&o));
        assert!(stdout(&o).contains("rain_s2.csv: 150 samples"));
    }
    let mut names: Vec<_> = std::fs::read_dir(&a)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(
        names,
        [
            "fog_s0.csv",
            "fog_s2.csv",
            "manifest.toml",
            "rain_s0.csv",
            "rain_s2.csv"
        ]
    );
    for name in &names {
        assert_eq!(
            std::fs::read(a.join(name)).unwrap(),
            std::fs::read(b.join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn gen_rejects_empty_dataset() {
    let dir = TempDir::new().unwrap();
    let config = write_config(dir.path(), "[generator]\nn_samples = 0\n");
    let o = run(&[
        "gen",
        &path_str(&config),
        "--out",
        &path_str(&dir.path().join("out")),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("n_samples"), "{}", stderr(&o));

    let config = write_config(dir.path(), "alpha = 0.1\nunknown_key = 3\n");
    let o = run(&[
        "gen",
        &path_str(&config),
        "--out",
        &path_str(&dir.path().join("out")),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sweep_degenerate_condition_exits_3() {
    let dir = TempDir::new().unwrap();
    let config = write_config(
        dir.path(),
        "conditions = [\"rain\"]\nseverities = [1]\nn_calibration = 100\n\
         [generator]\nn_samples = 300\nbase_accuracy = 0.999999\n",
    );
    let out = dir.path().join("out");
    let o = run(&["sweep", &path_str(&config), "--out-dir", &path_str(&out)]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(
        stderr(&o).starts_with("error: degenerate labels: rain:"),
        "{}",
        stderr(&o)
    );
    assert!(!out.join("summary.csv").exists());
}

/// A one-cell sweep must match calibrate + evaluate run by hand on the same
/// split.
#[test]
fn sweep_matches_calibrate_then_evaluate() {
    let dir = TempDir::new().unwrap();
    let config = write_config(
        dir.path(),
        "seed = 99\nconditions = [\"fog\"]\nseverities = [3]\nn_calibration = 400\n\
         [generator]\nn_samples = 1200\n",
    );
    let out = dir.path().join("sweep");
    let o = run(&[
        "sweep",
        &path_str(&config),
        "--out-dir",
        &path_str(&out),
        "--jobs",
        "2",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));

    let cfg = SweepConfig::read(&config).unwrap();
    let clean = generate_dataset(&cfg.generator_config("fog", 0)).unwrap();
    let (cal, _) = exchangeable_split(&clean, 400, cfg.split_seed("fog")).unwrap();
    let cal_ids: HashSet<_> = cal.iter().map(|s| s.sample_id.clone()).collect();
    let test: Vec<_> = generate_dataset(&cfg.generator_config("fog", 3))
        .unwrap()
        .into_iter()
        .filter(|s| !cal_ids.contains(&s.sample_id))
        .collect();
    assert_eq!(test.len(), 800);
    let cal_csv = dir.path().join("cal.csv");
    let test_csv = dir.path().join("test.csv");
    write_logits_csv(&cal, &cal_csv).unwrap();
    write_logits_csv(&test, &test_csv).unwrap();

    let t = path_str(&dir.path().join("t.json"));
    assert!(
        run(&["calibrate", "--cal", &path_str(&cal_csv), "--out", &t])
            .status
            .success()
    );
    let summary = dir.path().join("summary.csv");
    let records = dir.path().join("records.csv");
    let o = run(&[
        "evaluate",
        "--test",
        &path_str(&test_csv),
        "--thresholds",
        &t,
        "--summary-out",
        &path_str(&summary),
        "--records-out",
        &path_str(&records),
        "--condition",
        "fog",
        "--severity",
        "3",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        std::fs::read_to_string(&summary).unwrap(),
        std::fs::read_to_string(out.join("summary.csv")).unwrap()
    );
    assert_eq!(
        std::fs::read_to_string(&records).unwrap(),
        std::fs::read_to_string(out.join("records/fog_s3.csv")).unwrap()
    );
}
