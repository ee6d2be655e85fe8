//! End-to-end checks of the `cilfair` binary.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const SMALL: &str = r#"{
  "schema_version": 1,
  "dataset": {"synthetic": {"classes": 8, "train_per_class": 24, "test_per_class": 8, "feature_dim": 6, "seed": 3}},
  "schedule": {"steps": 3, "classes_per_step": 2, "order_seed": 1},
  "train": {"hidden_sizes": [10], "epochs_base": 6, "epochs_cil": 5,
            "epochs_dropout_phase": 2, "epochs_ordinary_phase": 3, "memory_capacity": 10,
            "coverage": {"max_resample_attempts": 3}},
  "methods": ["traditional", "ciliate"],
  "seeds": [1, 2, 3],
  "probe": {"base_classes": 4, "new_classes": 4, "memory_sizes": [8, 16, 32, 64], "repetitions": 4,
            "imbalance_per_class": 5},
  "sweep": {"eta": [0.01, 0.3, 0.7]}
}"#;

fn cilfair(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cilfair"))
        .args(args)
        .output()
        .unwrap()
}

fn setup(config: &str) -> (TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("config.json");
    std::fs::write(&path, config).unwrap();
    (dir, path)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(str::to_string).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(str::to_string).collect())
        .collect();
    (header, rows)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn run_writes_one_csv_per_method_and_seed_plus_summary() {
    let (dir, config) = setup(SMALL);
    let before = std::fs::read(&config).unwrap();
    let out = dir.path().join("out");
    let o = cilfair(&["run", s(&config), "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        std::fs::read(&config).unwrap(),
        before,
        "config was modified"
    );

    let mut csvs: Vec<String> = std::fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".csv"))
        .collect();
    csvs.sort();
    let mut want: Vec<String> = ["ciliate", "traditional"]
        .iter()
        .flat_map(|m| (1..=3).map(move |k| format!("{m}_seed{k}.csv")))
        .collect();
    want.sort();
    assert_eq!(csvs, want);
    assert!(out.join("summary.json").is_file());

    for name in &csvs {
        let (header, rows) = read_csv(&out.join(name));
        assert_eq!(
            header,
            [
                "step",
                "acc",
                "precision",
                "recall",
                "cwv",
                "mcd",
                "coverage"
            ]
        );
        assert_eq!(rows.len(), 3);
        for (k, row) in rows.iter().enumerate() {
            assert_eq!(row[0], (k + 1).to_string());
            for v in &row[1..] {
                let x: f64 = v.parse().unwrap();
                assert!((0.0..=1.0).contains(&x));
            }
        }
    }
}

/// Independent aggregation of the per-seed tables.
fn aggregate(out: &Path, method: &str, seeds: &[u64]) -> BTreeMap<(usize, String), (f64, f64)> {
    let mut cols: BTreeMap<(usize, String), Vec<f64>> = BTreeMap::new();
    for seed in seeds {
        let (header, rows) = read_csv(&out.join(format!("{method}_seed{seed}.csv")));
        for row in rows {
            let step: usize = row[0].parse().unwrap();
            for (name, v) in header.iter().zip(&row).skip(1) {
                cols.entry((step, name.clone()))
                    .or_default()
                    .push(v.parse().unwrap());
            }
        }
    }
    cols.into_iter()
        .map(|(k, mut v)| {
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            v.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let n = v.len();
            let median = if n % 2 == 1 {
                v[n / 2]
            } else {
                0.5 * (v[n / 2 - 1] + v[n / 2])
            };
            (k, (mean, median))
        })
        .collect()
}

#[test]
fn summary_matches_recomputation_from_the_csvs() {
    let (dir, config) = setup(SMALL);
    let out = dir.path().join("out");
    assert!(
        cilfair(&["run", s(&config), "--out", s(&out), "--jobs", "2"])
            .status
            .success()
    );
    let summary: Value =
        serde_json::from_slice(&std::fs::read(out.join("summary.json")).unwrap()).unwrap();
    for m in summary["methods"].as_array().unwrap() {
        let method = m["method"].as_str().unwrap();
        let oracle = aggregate(&out, method, &[1, 2, 3]);
        let steps = m["steps"].as_array().unwrap();
        assert_eq!(steps.len(), 3);
        let mut step_means: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for st in steps {
            let k = st["step"].as_u64().unwrap() as usize;
            for metric in ["acc", "precision", "recall", "cwv", "mcd", "coverage"] {
                let (mean, median) = oracle[&(k, metric.to_string())];
                let got_mean = st[metric]["mean"].as_f64().unwrap();
                let got_median = st[metric]["median"].as_f64().unwrap();
                assert!(
                    (got_mean - mean).abs() < 1e-12,
                    "{method} step {k} {metric}"
                );
                assert!(
                    (got_median - median).abs() < 1e-12,
                    "{method} step {k} {metric}"
                );
                step_means.entry(metric.to_string()).or_default().push(mean);
            }
        }
        for (metric, means) in step_means {
            let all = means.iter().sum::<f64>() / means.len() as f64;
            let rest = means[1..].iter().sum::<f64>() / (means.len() - 1) as f64;
            assert!((m["average_all_steps"][&metric].as_f64().unwrap() - all).abs() < 1e-12);
            assert!((m["average_except_first"][&metric].as_f64().unwrap() - rest).abs() < 1e-12);
        }
    }
}

#[test]
fn oversubscribed_schedule_is_a_config_error_with_no_output() {
    let bad = SMALL.replace(r#""classes_per_step": 2"#, r#""classes_per_step": 3"#);
    let (dir, config) = setup(&bad);
    let out = dir.path().join("out");
    let o = cilfair(&["run", s(&config), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(
        stderr(&o).contains("schedule.classes_per_step"),
        "{}",
        stderr(&o)
    );
    assert!(!out.exists());
}

#[test]
fn invalid_fields_are_named() {
    let cases = [
        (r#""seeds": [1, 2, 3]"#, r#""seeds": []"#, "seeds"),
        (
            r#""memory_capacity": 10"#,
            r#""memory_capacity": 10, "eta": 2.0"#,
            "train",
        ),
        (
            r#""schema_version": 1"#,
            r#""schema_version": 9"#,
            "schema_version",
        ),
        (
            r#""methods": ["traditional", "ciliate"]"#,
            r#""method": ["ciliate"]"#,
            "method",
        ),
        (
            r#""memory_capacity": 10"#,
            r#""memory_capacity": 3"#,
            "train.memory_capacity",
        ),
    ];
    for (from, to, field) in cases {
        let (dir, config) = setup(&SMALL.replace(from, to));
        let out = dir.path().join("out");
        let o = cilfair(&["run", s(&config), "--out", s(&out)]);
        assert_eq!(o.status.code(), Some(2), "{field}");
        assert!(stderr(&o).contains(field), "{field}: {}", stderr(&o));
        assert!(!out.exists());
    }
}

#[test]
fn non_empty_output_needs_force() {
    let (dir, config) = setup(SMALL);
    let out = dir.path().join("out");
    std::fs::create_dir(&out).unwrap();
    std::fs::write(out.join("keep.txt"), "x").unwrap();
    let o = cilfair(&["run", s(&config), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.join("summary.json").exists());
    let o = cilfair(&["run", s(&config), "--out", s(&out), "--force"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(out.join("summary.json").exists());
}

#[test]
fn unwritable_output_is_a_runtime_error() {
    let (dir, config) = setup(SMALL);
    let file = dir.path().join("plain_file");
    std::fs::write(&file, "x").unwrap();
    let o = cilfair(&["run", s(&config), "--out", s(&file.join("sub"))]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn output_dir_from_config_and_missing_dir() {
    let with_out = SMALL.replacen('{', r#"{"output_dir": "from_config","#, 1);
    let (dir, config) = setup(&with_out);
    let o = Command::new(env!("CARGO_BIN_EXE_cilfair"))
        .current_dir(dir.path())
        .args(["run", "config.json"])
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(dir.path().join("from_config/summary.json").exists());

    let (_dir, config2) = setup(SMALL);
    let o = cilfair(&["run", s(&config2)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("output_dir"));
    drop(config);
}

#[test]
fn version_flag() {
    let o = cilfair(&["--version"]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains(env!("CARGO_PKG_VERSION")));
}

fn probe(kind: &str) -> (TempDir, PathBuf) {
    let (dir, config) = setup(SMALL);
    let out = dir.path().join("out");
    let o = cilfair(&["probe", kind, s(&config), "--out", s(&out)]);
    assert!(o.status.success(), "{kind}: {}", stderr(&o));
    (dir, out)
}

#[test]
fn probes_write_one_row_per_condition() {
    for (kind, rows) in [
        ("mask", 3),
        ("memory", 4),
        ("imbalance", 2),
        ("distill", 2),
        ("hard-sample", 2),
    ] {
        let (_dir, out) = probe(kind);
        let (header, table) = read_csv(&out.join(format!("probe_{kind}.csv")));
        assert_eq!(header, ["condition", "acc", "cwv", "mcd", "coverage"]);
        assert_eq!(table.len(), rows, "{kind}");
        let (runs_header, runs) = read_csv(&out.join(format!("probe_{kind}_runs.csv")));
        assert_eq!(
            runs_header,
            ["condition", "seed", "acc", "cwv", "mcd", "coverage"]
        );
        assert_eq!(runs.len(), rows * 3);
    }
}

#[test]
fn coverage_bias_probe_reports_a_correlation() {
    let (_dir, out) = probe("coverage-bias");
    let (_, table) = read_csv(&out.join("probe_coverage-bias.csv"));
    assert_eq!(table.len(), 3 * 4);
    let summary: Value =
        serde_json::from_slice(&std::fs::read(out.join("probe_coverage-bias.json")).unwrap())
            .unwrap();
    for key in ["pearson_r", "pooled_pearson_r"] {
        if let Some(r) = summary[key].as_f64() {
            assert!((-1.0..=1.0).contains(&r), "{key} = {r}");
        }
    }
    assert_eq!(summary["pearson_r_per_seed"].as_array().unwrap().len(), 3);
}

fn sweep(param: &str, config: &str) -> (Vec<Vec<String>>, Value) {
    let (dir, path) = setup(config);
    let out = dir.path().join("out");
    let o = cilfair(&["sweep", param, s(&path), "--out", s(&out)]);
    assert!(o.status.success(), "{param}: {}", stderr(&o));
    let (header, rows) = read_csv(&out.join(format!("sweep_{param}.csv")));
    assert_eq!(header, ["point", "seed", "acc", "cwv", "mcd"]);
    let summary =
        serde_json::from_slice(&std::fs::read(out.join(format!("sweep_{param}.json"))).unwrap())
            .unwrap();
    (rows, summary)
}

fn best_is_lowest_mean_cwv(summary: &Value) {
    let points = summary["points"].as_array().unwrap();
    let lowest = points
        .iter()
        .map(|p| p["cwv"]["mean"].as_f64().unwrap())
        .fold(f64::INFINITY, f64::min);
    let best = points
        .iter()
        .find(|p| p["cwv"]["mean"].as_f64().unwrap() == lowest)
        .unwrap();
    assert_eq!(summary["best_point"], best["point"]);
}

#[test]
fn divergence_sweep_has_three_groups() {
    let (rows, summary) = sweep("divergence-metric", SMALL);
    assert_eq!(rows.len(), 3 * 3);
    let groups: std::collections::BTreeSet<&str> = rows.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(groups.len(), 3);
    best_is_lowest_mean_cwv(&summary);
}

#[test]
fn eta_sweep_rows_per_point_and_seed() {
    let (rows, summary) = sweep("eta", SMALL);
    assert_eq!(rows.len(), 3 * 3);
    assert_eq!(rows[0][0], "eta=0.01");
    best_is_lowest_mean_cwv(&summary);
}

#[test]
fn class_split_sweep_has_three_schedules() {
    let config = SMALL
        .replace(
            r#""classes": 8, "train_per_class": 24"#,
            r#""classes": 20, "train_per_class": 10"#,
        )
        .replace(r#""seeds": [1, 2, 3]"#, r#""seeds": [1]"#)
        .replace(r#""memory_capacity": 10"#, r#""memory_capacity": 20"#);
    let (rows, summary) = sweep("class-split", &config);
    let points: Vec<&str> = rows.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(
        points,
        [
            "classes_per_step=20",
            "classes_per_step=5",
            "classes_per_step=2"
        ]
    );
    best_is_lowest_mean_cwv(&summary);
}

#[test]
fn coverage_threshold_sweep_crosses_both_grids() {
    let config = SMALL
        .replace(r#""seeds": [1, 2, 3]"#, r#""seeds": [1]"#)
        .replace(
            r#""sweep": {"eta": [0.01, 0.3, 0.7]}"#,
            r#""sweep": {"activation_thresholds": [0.5, 0.99], "coverage_thresholds": [0.5, 0.75, 0.95]}"#,
        );
    let (rows, _) = sweep("coverage-thresholds", &config);
    assert_eq!(rows.len(), 6);
    assert_eq!(rows[0][0], "t=0.5/beta=0.5");
}

#[test]
fn parallel_and_serial_runs_agree() {
    let (dir, config) = setup(SMALL);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(cilfair(&["run", s(&config), "--out", s(&a), "--jobs", "1"])
        .status
        .success());
    assert!(cilfair(&["run", s(&config), "--out", s(&b), "--jobs", "3"])
        .status
        .success());
    for name in [
        "summary.json",
        "ciliate_seed2.csv",
        "traces/traditional_seed3.json",
    ] {
        assert_eq!(
            std::fs::read(a.join(name)).unwrap(),
            std::fs::read(b.join(name)).unwrap(),
            "{name}"
        );
    }
}
