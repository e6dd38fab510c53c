use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn fisc(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fisc"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn rows(path: &Path) -> Vec<String> {
    fs::read_to_string(path).unwrap().lines().map(str::to_owned).collect()
}

fn generate(dir: &Path, model: &str) -> String {
    let out = fisc(&["generate", "--model", model, "--n", "120", "--seed", "1"], dir);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    dir.join("data.csv").to_str().unwrap().to_owned()
}

#[test]
fn bench_reports_perfect_detection() {
    let dir = tempfile::tempdir().unwrap();
    let out = fisc(&["bench"], dir.path());
    assert!(out.status.success());
    let table = rows(&dir.path().join("bench.csv"));
    assert_eq!(table[0], "function;method;auc");
    assert_eq!(table.len(), 1 + 8);
    assert!(table[1..].iter().all(|r| r.ends_with(";1.0")), "{table:?}");
    assert!(String::from_utf8_lossy(&out.stdout).contains("F4"));
}

#[test]
fn bench_filter_gives_one_function() {
    let dir = tempfile::tempdir().unwrap();
    assert!(fisc(&["bench", "--function", "F1"], dir.path()).status.success());
    let table = rows(&dir.path().join("bench.csv"));
    assert!(table[1..].iter().all(|r| r.starts_with("F1;")));
    assert_eq!(table.len(), 1 + 2);
}

#[test]
fn shuffled_labels_fail_the_benchmark() {
    let dir = tempfile::tempdir().unwrap();
    let out = fisc(&["bench", "--shuffle-labels", "--seed", "7"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    for row in &rows(&dir.path().join("bench.csv"))[1..] {
        let auc: f64 = row.rsplit(';').next().unwrap().parse().unwrap();
        assert!((auc - 0.5).abs() <= 0.1, "{row}");
    }
}

#[test]
fn out_of_range_feature_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate(&dir.path().join("gen"), "sum-product(2)");
    let out = fisc(
        &["fis", "--data", &data, "--model", "sum-product(2)", "--features", "0,1,2"],
        &dir.path().join("fis"),
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("index 2"));
}

#[test]
fn halo_has_36_rows_per_radius() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate(&dir.path().join("gen"), "sum-product(2)");
    let out = fisc(
        &[
            "halo", "--data", &data, "--model", "sum-product(2)", "--features", "0,1", "--epsilon", "0.3", "--radii",
            "0.1,0.2,0.3",
        ],
        &dir.path().join("halo"),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = rows(&dir.path().join("halo/halo.csv"));
    assert_eq!(table[0], "t;alloc_fracs;mask_values;phi_joint;in_set;angle;status");
    for t in ["0.1", "0.2", "0.3"] {
        assert_eq!(table[1..].iter().filter(|r| r.split(';').next() == Some(t)).count(), 36);
    }
}

#[test]
fn same_run_twice_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate(&dir.path().join("gen"), "sum-product(2,3)");
    let args = [
        "search", "--data", &data, "--model", "sum-product(2,3)", "--features", "0,1", "--strategy", "permutation:4",
        "--seed", "3",
    ];
    for run in ["a", "b"] {
        assert!(fisc(&args, &dir.path().join(run)).status.success());
    }
    for file in ["models.json", "mcr.csv", "fisc.csv", "run.json"] {
        assert_eq!(
            fs::read(dir.path().join("a").join(file)).unwrap(),
            fs::read(dir.path().join("b").join(file)).unwrap(),
            "{file}"
        );
    }
}

#[test]
fn model_class_member_can_be_scored() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate(&dir.path().join("gen"), "sum-product(2)");
    let search = dir.path().join("search");
    assert!(fisc(&["search", "--data", &data, "--model", "sum-product(2)"], &search).status.success());
    let models = search.join("models.json");
    let out = fisc(
        &[
            "fis", "--data", &data, "--model", "sum-product(2)", "--mask-file", models.to_str().unwrap(),
            "--mask-index", "3", "--strategy", "baseline:zeros",
        ],
        &dir.path().join("fis"),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(rows(&dir.path().join("fis/fis.csv")).len(), 2);
}

#[test]
fn mlp_report_and_infeasible_tolerance() {
    let dir = tempfile::tempdir().unwrap();
    let model = "sigmoid-mlp(alpha=1;beta=0.5,-0.4,0.3;b=0.1)";
    let data = generate(&dir.path().join("gen"), model);
    let args = |eps: &'static str| ["mlp-analytic", "--data", &data, "--model", model, "--features", "0,1", "--epsilon", eps].map(str::to_owned);
    let ok = Command::new(env!("CARGO_BIN_EXE_fisc"))
        .args(args("0.05"))
        .arg("--out")
        .arg(dir.path().join("ok"))
        .output()
        .unwrap();
    assert!(ok.status.success(), "{}", String::from_utf8_lossy(&ok.stderr));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("ok/mlp.json")).unwrap()).unwrap();
    assert!(report["fis_min"].as_f64().unwrap() <= report["fis_max"].as_f64().unwrap());

    let bad = Command::new(env!("CARGO_BIN_EXE_fisc"))
        .args(args("0.6"))
        .arg("--out")
        .arg(dir.path().join("bad"))
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(3));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = fisc(&["fis", "--data", "/nonexistent/data.csv", "--model", "linear(1,2)"], dir.path());
    assert_eq!(missing.status.code(), Some(4));
    let bad_model = fisc(&["bench", "--function", "F9"], dir.path());
    assert_eq!(bad_model.status.code(), Some(2));
    let data = generate(&dir.path().join("gen"), "sum-product(2)");
    let bad_eps = fisc(&["search", "--data", &data, "--model", "sum-product(2)", "--epsilon=-1"], dir.path());
    assert_eq!(bad_eps.status.code(), Some(2));
    let radius = fisc(
        &["halo", "--data", &data, "--model", "sum-product(2)", "--features", "0,1", "--radii", "0.5"],
        &dir.path().join("halo"),
    );
    assert_eq!(radius.status.code(), Some(2));
}
