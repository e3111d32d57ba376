use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn rfrw(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rfrw"))
        .args(args)
        .env("RFRW_THREADS", "1")
        .output()
        .expect("run rfrw")
}

fn path(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_string_lossy().into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn simulate(dir: &TempDir, dgp: &str, len: usize) -> String {
    let out = path(dir, &format!("{dgp}.csv"));
    let o = rfrw(&["simulate", "--dgp", dgp, "--len", &len.to_string(), "--seed", "4", "--out", &out]);
    assert!(o.status.success(), "{o:?}");
    out
}

#[test]
fn fit_predict_round_trip() {
    let dir = TempDir::new().unwrap();
    let series = simulate(&dir, "m1", 400);
    let model = path(&dir, "m.json");
    let o = rfrw(&[
        "fit", "--series", &series, "--out", &model, "--lags", "5", "--weights", "exp1", "--B", "100", "--k", "auto",
        "--holdout", "50",
    ]);
    assert_eq!(o.status.code(), Some(0), "{o:?}");
    let summary = stdout(&o);
    assert!(summary.contains("T=345 p=5 B=100 k=41 m_try=1"), "{summary}");

    let first = rfrw(&["predict", "--model", &model, "--series", &series, "--horizon", "50"]);
    assert!(first.status.success());
    let text = stdout(&first);
    assert_eq!(text.lines().count(), 51);
    assert!(text.starts_with("t,transformed,level\n350,"));

    // Refit with the same seed gives the same file contents apart from the timestamp.
    let again = path(&dir, "m2.json");
    rfrw(&["fit", "--series", &series, "--out", &again, "--lags", "5", "--holdout", "50"]);
    let second = rfrw(&["predict", "--model", &again, "--series", &series, "--horizon", "50"]);
    assert_eq!(stdout(&second), text);
}

#[test]
fn zero_horizon_gives_header_only() {
    let dir = TempDir::new().unwrap();
    let series = simulate(&dir, "m2", 200);
    let model = path(&dir, "m.json");
    assert!(rfrw(&["fit", "--series", &series, "--out", &model, "--lags", "3", "--B", "5"]).status.success());
    let out = path(&dir, "f.csv");
    let o = rfrw(&["predict", "--model", &model, "--series", &series, "--horizon", "0", "--out", &out]);
    assert!(o.status.success());
    assert_eq!(fs::read_to_string(out).unwrap(), "t,transformed,level\n");
}

#[test]
fn constant_series_forecasts_the_constant() {
    let dir = TempDir::new().unwrap();
    let series = path(&dir, "flat.csv");
    let mut text = String::from("date,value\n");
    for d in 1..=28 {
        text.push_str(&format!("2021-02-{d:02},250\n"));
    }
    fs::write(&series, text).unwrap();
    let model = path(&dir, "m.json");
    let o = rfrw(&[
        "fit", "--series", &series, "--out", &model, "--lags", "3", "--pipeline", "logdiff+sdiff:7", "--k", "2",
        "--B", "10",
    ]);
    assert!(o.status.success(), "{o:?}");
    for mode in [&[][..], &["--recursive"][..]] {
        let mut args = vec!["predict", "--model", &model, "--series", &series, "--horizon", "5"];
        args.extend_from_slice(mode);
        let out = stdout(&rfrw(&args));
        let rows: Vec<&str> = out.lines().skip(1).collect();
        assert_eq!(rows.len(), 5);
        for row in rows {
            let cols: Vec<&str> = row.split(',').collect();
            assert_eq!(cols[1].parse::<f64>().unwrap(), 0.0);
            assert_eq!(cols[2].parse::<f64>().unwrap(), 250.0);
        }
    }
}

#[test]
fn bad_input_exits_2() {
    let dir = TempDir::new().unwrap();
    let bad = path(&dir, "bad.csv");
    fs::write(&bad, "date,y\n2020-01-01,1\n").unwrap();
    let o = rfrw(&["fit", "--series", &bad, "--out", &path(&dir, "m.json"), "--lags", "2"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("row 1"));

    fs::write(&bad, "value\n1\n2\n\n3\nx\n").unwrap();
    let o = rfrw(&["fit", "--series", &bad, "--out", &path(&dir, "m.json"), "--lags", "2"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("row 5"));

    let series = simulate(&dir, "m1", 100);
    let o = rfrw(&["fit", "--series", &series, "--out", &path(&dir, "m.json"), "--lags", "2", "--mtry", "7"]);
    assert_eq!(o.status.code(), Some(2));
    let o = rfrw(&["fit", "--series", &series, "--out", &path(&dir, "m.json"), "--lags", "2", "--weights", "mbb:0"]);
    assert_eq!(o.status.code(), Some(2));
    let o = rfrw(&["predict", "--model", &path(&dir, "missing.json"), "--series", &series]);
    assert_eq!(o.status.code(), Some(2));
}

fn lag1_threshold(series: &Path, lags: usize) -> f64 {
    let text = fs::read_to_string(series).unwrap();
    let values: Vec<f64> = text.lines().skip(1).map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    let mut lag1: Vec<f64> = values[lags - 1..values.len() - 1].to_vec();
    lag1.sort_by(f64::total_cmp);
    0.5 * (lag1[0] + lag1[1])
}

#[test]
fn audit_verdicts() {
    let dir = TempDir::new().unwrap();
    let series = simulate(&dir, "m1", 300);
    let model = path(&dir, "valid.json");
    let o = rfrw(&[
        "fit", "--series", &series, "--out", &model, "--lags", "5", "--policy", "valid", "--k", "10", "--xi", "0.2",
        "--B", "20",
    ]);
    assert!(o.status.success(), "{o:?}");
    let o = rfrw(&["audit", "--model", &model, "--series", &series]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("20 of 20 trees clean"));

    // Replace the first tree by a stump whose left leaf holds a single row.
    let mut json: serde_json::Value = serde_json::from_str(&fs::read_to_string(&model).unwrap()).unwrap();
    let threshold = lag1_threshold(Path::new(&series), 5);
    json["trees"][0]["nodes"] = serde_json::json!([
        {"split": {"feature": 0, "threshold": threshold}},
        {"leaf": {"estimate": 0.0, "weight_total": 1.0, "count": 1}},
        {"leaf": {"estimate": 0.0, "weight_total": 1.0, "count": 294}},
    ]);
    let edited = path(&dir, "edited.json");
    fs::write(&edited, serde_json::to_string(&json).unwrap()).unwrap();
    let o = rfrw(&["audit", "--model", &edited, "--series", &series]);
    assert_eq!(o.status.code(), Some(1), "{}", stdout(&o));
    assert!(stdout(&o).contains("tree 0: "));
    assert!(stdout(&o).contains("LeafBelowK"));

    // A model with an exogenous channel cannot be audited on a series without it.
    let m3 = simulate(&dir, "m3", 300);
    let exog = path(&dir, "exog.json");
    assert!(rfrw(&["fit", "--series", &m3, "--out", &exog, "--lags", "4", "--exog", "x:4", "--B", "5"]).status.success());
    let o = rfrw(&["audit", "--model", &exog, "--series", &series]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bench_writes_tables() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("tables");
    let o = rfrw(&[
        "bench", "--dgp", "m2", "--methods", "rfrw2,rf", "--T", "200,300", "--scenarios", "3", "--reps", "2", "--B", "10",
        "--test-size", "20", "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{o:?}");
    let files: Vec<PathBuf> = ["m2.csv", "m2.md", "m2.json"].iter().map(|f| out.join(f)).collect();
    assert!(files.iter().all(|f| f.exists()));
    let csv = fs::read_to_string(&files[0]).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(stdout(&o).contains("| RF-RW-2 |"));
    let o = rfrw(&["bench", "--dgp", "m9", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}
