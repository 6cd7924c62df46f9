mod common;

use std::path::Path;
use std::process::{Command, Output};

use plboost::boost::{self, OutputKind};
use plboost::data::load_csv;
use plboost::objective::metric_rmse;

fn plboost(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_plboost")).args(args).output().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_config(dir: &Path, extra: &str) -> std::path::PathBuf {
    let path = dir.join("train.conf");
    let text = format!(
        "data = train.csv\nmodel_out = model.json\nmetric_log_out = log.csv\nhas_header = true\n\
         num_trees = 5\nmax_leaf = 4\nmin_sum_hessian_in_leaf = 1\n{extra}"
    );
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn train_predict_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = common::synthetic_regression(200, 4, 0.1, 1);
    common::write_csv(&dir.path().join("train.csv"), &data, true);
    let conf = write_config(dir.path(), "");

    let out = plboost(&["train", conf.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));

    let log = std::fs::read_to_string(dir.path().join("log.csv")).unwrap();
    let lines: Vec<&str> = log.lines().collect();
    assert_eq!(lines[0], "iter,train,valid,seconds");
    assert_eq!(lines.len(), 6);
    assert!(lines[1].starts_with("1,"));

    let model_path = dir.path().join("model.json");
    let data_path = dir.path().join("train.csv");
    let pred_path = dir.path().join("pred.txt");
    let out = plboost(&[
        "predict",
        model_path.to_str().unwrap(),
        data_path.to_str().unwrap(),
        pred_path.to_str().unwrap(),
        "--has-header",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let written: Vec<f64> = std::fs::read_to_string(&pred_path).unwrap().lines().map(|l| l.parse().unwrap()).collect();
    assert_eq!(written.len(), data.n_rows());

    // bit-for-bit the same as predicting in process
    let model = boost::load_model(&model_path).unwrap();
    let loaded = load_csv(&data_path, true, 0).unwrap();
    let direct = boost::predict(&model, &loaded, OutputKind::Raw).unwrap();
    assert!(written.iter().zip(&direct).all(|(a, b)| a.to_bits() == b.to_bits()));

    let out = plboost(&["eval", model_path.to_str().unwrap(), data_path.to_str().unwrap(), "--has-header"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let stdout = String::from_utf8(out.stdout).unwrap();
    let value: f64 = stdout.trim().strip_prefix("rmse: ").unwrap().parse().unwrap();
    // recomputed from the written predictions
    let expected = metric_rmse(&written, &loaded.labels).unwrap();
    assert!((value - expected).abs() <= 1e-12 * expected.max(1.0));
}

#[test]
fn unknown_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    common::write_csv(&dir.path().join("train.csv"), &common::synthetic_regression(20, 2, 0.1, 2), true);
    let conf = write_config(dir.path(), "max_depth = 6\n");
    let out = plboost(&["train", conf.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("max_depth"));
    assert!(!dir.path().join("model.json").exists());
}

#[test]
fn probability_output_requires_binary_model() {
    let dir = tempfile::tempdir().unwrap();
    common::write_csv(&dir.path().join("train.csv"), &common::synthetic_regression(50, 2, 0.1, 3), true);
    let conf = write_config(dir.path(), "");
    assert!(plboost(&["train", conf.to_str().unwrap()]).status.success());
    let d = dir.path();
    let out = plboost(&[
        "predict",
        d.join("model.json").to_str().unwrap(),
        d.join("train.csv").to_str().unwrap(),
        d.join("p.txt").to_str().unwrap(),
        "--prob",
        "--has-header",
    ]);
    assert!(!out.status.success());
    assert!(stderr(&out).to_lowercase().contains("probab"));
}

#[test]
fn binary_probabilities_and_single_class_eval() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let data = common::synthetic_binary(300, 3, 4);
    common::write_csv(&d.join("train.csv"), &data, true);
    let conf = write_config(d, "objective = binary\n");
    let out = plboost(&["train", conf.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));

    let model = d.join("model.json");
    let out = plboost(&[
        "predict",
        model.to_str().unwrap(),
        d.join("train.csv").to_str().unwrap(),
        d.join("p.txt").to_str().unwrap(),
        "--prob",
        "--has-header",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let probs: Vec<f64> =
        std::fs::read_to_string(d.join("p.txt")).unwrap().lines().map(|l| l.parse().unwrap()).collect();
    assert!(probs.iter().all(|p| (0.0..=1.0).contains(p)));

    let out = plboost(&["eval", model.to_str().unwrap(), d.join("train.csv").to_str().unwrap(), "--has-header"]);
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout).unwrap().starts_with("auc: "));

    let ones = data.select(&(0..data.n_rows()).filter(|&i| data.labels[i] == 1.0).collect::<Vec<_>>());
    common::write_csv(&d.join("ones.csv"), &ones, true);
    let out = plboost(&["eval", model.to_str().unwrap(), d.join("ones.csv").to_str().unwrap(), "--has-header"]);
    assert!(!out.status.success());
    assert!(stderr(&out).starts_with("error:"));
}

#[test]
fn schema_mismatch_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    common::write_csv(&d.join("train.csv"), &common::synthetic_regression(50, 3, 0.1, 5), true);
    common::write_csv(&d.join("narrow.csv"), &common::synthetic_regression(10, 2, 0.1, 6), true);
    let conf = write_config(d, "");
    assert!(plboost(&["train", conf.to_str().unwrap()]).status.success());
    let out = plboost(&[
        "predict",
        d.join("model.json").to_str().unwrap(),
        d.join("narrow.csv").to_str().unwrap(),
        d.join("p.txt").to_str().unwrap(),
        "--has-header",
    ]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("feature"));
}

#[test]
fn memorizing_config_reaches_zero_rmse() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("train.csv"), "y,x\n1,0\n5,1\n-2,2\n7,3\n0.5,4\n").unwrap();
    std::fs::write(
        d.join("train.conf"),
        "data = train.csv\nmodel_out = model.json\nhas_header = true\nlearning_rate = 1\n\
         num_trees = 3\nmax_leaf = 8\nmin_sum_hessian_in_leaf = 0\nl2_reg = 0\nleaf_type = constant\n",
    )
    .unwrap();
    let out = plboost(&["train", d.join("train.conf").to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let out = plboost(&[
        "eval",
        d.join("model.json").to_str().unwrap(),
        d.join("train.csv").to_str().unwrap(),
        "--has-header",
    ]);
    assert_eq!(String::from_utf8(out.stdout).unwrap().trim(), "rmse: 0");
}

#[test]
fn missing_files_fail_with_diagnostic() {
    let out = plboost(&["eval", "/nonexistent/model.json", "/nonexistent/data.csv"]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("/nonexistent/model.json"));
}
