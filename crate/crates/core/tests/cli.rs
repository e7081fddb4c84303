mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tokcast::model::{Checkpoint, ModelConfig, ModelParams, TrainSpec};

fn tokcast(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tokcast"))
        .current_dir(dir)
        .env_remove("TOKCAST_CONFIG")
        .args(args)
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn tiny_checkpoint(path: &Path) {
    let config = ModelConfig {
        d_model: 8,
        n_heads: 2,
        d_ff: 16,
        n_enc: 1,
        n_dec: 1,
        context_len: 80,
        horizon_len: 48,
        ..Default::default()
    };
    let params = ModelParams::init(&config, 1);
    Checkpoint {
        config,
        train: TrainSpec::default(),
        params,
    }
    .save(path)
    .unwrap();
}

fn bench_config(dir: &Path) {
    common::write_series(
        &dir.join("load.csv"),
        &[common::seasonal_load("a", 260, 1), common::seasonal_load("b", 260, 2)],
    );
    tiny_checkpoint(&dir.join("tiny.zlc"));
    fs::write(
        dir.join("bench.json"),
        r#"{"datasets": [{"id": "load", "path": "load.csv"}],
            "models": [{"baseline": "snm"}, {"baseline": "npts"}, {"checkpoint": "tiny.zlc", "id": "tiny"}],
            "horizons": [1, 6], "lookback": 72, "stride": 6, "max_windows": 12, "seed": 3}"#,
    )
    .unwrap();
}

#[test]
fn help_and_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&tokcast(dir.path(), &["--help"])), 0);
    assert_eq!(code(&tokcast(dir.path(), &["--version"])), 0);
    assert_eq!(code(&tokcast(dir.path(), &["frobnicate"])), 1);
    assert_eq!(code(&tokcast(dir.path(), &["benchmark", "--output", "x"])), 1);
}

#[test]
fn ingest_reports_gaps() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("gappy.csv"),
        "series_id,timestamp,value\n\
         s,2021-01-01T00:00:00Z,1\n\
         s,2021-01-01T01:00:00Z,\n\
         s,2021-01-01T02:00:00Z,3\n",
    )
    .unwrap();
    assert_eq!(code(&tokcast(dir.path(), &["ingest", "gappy.csv"])), 1);
    let out = tokcast(dir.path(), &["ingest", "gappy.csv", "--impute", "--output", "clean.csv"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(fs::read_to_string(dir.path().join("clean.csv")).unwrap().contains(",2\n"));
}

#[test]
fn forecast_file_contract() {
    let dir = tempfile::tempdir().unwrap();
    let period: Vec<f64> = (0..24).map(|t| 100.0 + (t * t % 17) as f64).collect();
    let values: Vec<f64> = period.iter().cycle().take(24 * 8).copied().collect();
    let ts = tokcast::TimeSeries::hourly("p", common::epoch(), values).unwrap();
    common::write_series(&dir.path().join("p.csv"), &[ts]);

    let args = ["forecast", "--baseline", "snm", "--input", "p.csv", "--horizon", "24", "--output"];
    let out = tokcast(dir.path(), &[&args[..], &["snm.csv"]].concat());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let mut rdr = csv::Reader::from_path(dir.path().join("snm.csv")).unwrap();
    let header: Vec<String> = rdr.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(
        header,
        ["series_id", "step", "q0.1", "q0.2", "q0.3", "q0.4", "q0.5", "q0.6", "q0.7", "q0.8", "q0.9", "point"]
    );
    for (t, rec) in rdr.records().enumerate() {
        let rec = rec.unwrap();
        let point: f64 = rec[11].parse().unwrap();
        assert_eq!(point, period[t]);
        assert_eq!(&rec[6], &rec[11]);
    }

    tiny_checkpoint(&dir.path().join("tiny.zlc"));
    let model = ["forecast", "--checkpoint", "tiny.zlc", "--input", "p.csv", "--horizon", "12", "--seed", "9", "--output"];
    assert_eq!(code(&tokcast(dir.path(), &[&model[..], &["m1.csv"]].concat())), 0);
    assert_eq!(code(&tokcast(dir.path(), &[&model[..], &["m2.csv"]].concat())), 0);
    let m1 = fs::read(dir.path().join("m1.csv")).unwrap();
    assert_eq!(m1, fs::read(dir.path().join("m2.csv")).unwrap());
    let text = String::from_utf8(m1).unwrap();
    for line in text.lines().skip(1) {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells[6], cells[11]);
    }
}

#[test]
fn benchmark_report_and_dm() {
    let dir = tempfile::tempdir().unwrap();
    bench_config(dir.path());
    let out = tokcast(dir.path(), &["--config", "bench.json", "benchmark", "--output", "run"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["report.json", "errors.json", "timings.json", "tables.txt", "plots/tiny__load__h6.csv"] {
        assert!(dir.path().join("run").join(f).is_file(), "{f}");
    }
    let record: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("run/report.json")).unwrap()).unwrap();
    assert_eq!(record["reports"].as_array().unwrap().len(), 6);
    assert!(record.get("timings").is_none());

    let out = tokcast(dir.path(), &["report", "run"]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("verified"));

    let out = tokcast(dir.path(), &["dm", "snm", "npts", "--run", "run", "--json"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let ab: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let out = tokcast(dir.path(), &["dm", "npts", "snm", "--run", "run", "--json"]);
    let ba: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    for (x, y) in ab.as_array().unwrap().iter().zip(ba.as_array().unwrap()) {
        let (s, t) = (x["statistic"].as_f64().unwrap(), y["statistic"].as_f64().unwrap());
        assert!((s + t).abs() < 1e-12);
    }
    let out = tokcast(dir.path(), &["dm", "tiny", "tiny", "--run", "run", "--json"]);
    let same: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(same[0]["statistic"].as_f64(), Some(0.0));
    assert_eq!(same[0]["p_value"].as_f64(), Some(1.0));
    assert_eq!(same[0]["reject"].as_bool(), Some(false));

    let path = dir.path().join("run/report.json");
    let tampered = fs::read_to_string(&path).unwrap().replacen("\\\"seed\\\": 3", "\\\"seed\\\": 4", 1);
    assert_ne!(tampered, fs::read_to_string(&path).unwrap());
    fs::write(&path, tampered).unwrap();
    assert_eq!(code(&tokcast(dir.path(), &["report", "run"])), 1);
}

#[test]
fn benchmark_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    bench_config(dir.path());
    for out in ["a", "b"] {
        assert_eq!(code(&tokcast(dir.path(), &["--config", "bench.json", "benchmark", "--output", out])), 0);
    }
    let a = fs::read(dir.path().join("a/report.json")).unwrap();
    assert_eq!(a, fs::read(dir.path().join("b/report.json")).unwrap());
    assert_eq!(
        fs::read(dir.path().join("a/errors.json")).unwrap(),
        fs::read(dir.path().join("b/errors.json")).unwrap()
    );
}

#[test]
fn config_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    bench_config(dir.path());
    let out = Command::new(env!("CARGO_BIN_EXE_tokcast"))
        .current_dir(dir.path())
        .env("TOKCAST_CONFIG", "bench.json")
        .args(["time", "--horizon", "1", "--runs", "2"])
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    let snm = text.lines().find(|l| l.starts_with("snm")).unwrap();
    let mean_ms: f64 = snm.split_whitespace().nth(4).unwrap().parse().unwrap();
    assert!(mean_ms > 0.0);
    let tiny = text.lines().find(|l| l.starts_with("tiny")).unwrap();
    let tiny_ms: f64 = tiny.split_whitespace().nth(4).unwrap().parse().unwrap();
    assert!(tiny_ms > mean_ms);
}

#[test]
fn train_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    common::write_series(&dir.path().join("pool.csv"), &common::synthetic_pool(6, 200, 2));
    fs::write(
        dir.path().join("train.json"),
        r#"{"corpus": [{"path": "pool.csv"}],
            "mixup": {"len": 96, "count": 20, "seed": 1},
            "model": {"d_model": 8, "n_heads": 2, "d_ff": 16, "n_enc": 1, "n_dec": 1, "context_len": 73, "horizon_len": 24},
            "train": {"steps": 5, "batch_size": 4, "seed": 1},
            "window": {"context": 72, "horizon": 24, "stride": 24},
            "output": "m.zlc"}"#,
    )
    .unwrap();
    let first = tokcast(dir.path(), &["--config", "train.json", "train"]);
    assert_eq!(code(&first), 0, "{}", String::from_utf8_lossy(&first.stderr));
    assert!(stdout(&first).contains("final training loss"));
    let bytes = fs::read(dir.path().join("m.zlc")).unwrap();
    assert_eq!(&bytes[..4], b"ZLC1");
    Checkpoint::from_bytes(&bytes).unwrap();
    assert!(dir.path().join("m.zlc.train.json").is_file());

    let second = tokcast(dir.path(), &["--config", "train.json", "train", "--output", "m2.zlc"]);
    assert_eq!(code(&second), 0);
    assert_eq!(bytes, fs::read(dir.path().join("m2.zlc")).unwrap());
    let hash = |o: &Output| stdout(o).lines().next().unwrap().to_string();
    assert_eq!(hash(&first), hash(&second));

    fs::write(
        dir.path().join("bad.json"),
        r#"{"corpus": [{"path": "missing.csv"}], "output": "x.zlc"}"#,
    )
    .unwrap();
    assert_eq!(code(&tokcast(dir.path(), &["--config", "bad.json", "train"])), 1);
    assert!(!dir.path().join("x.zlc").exists());
}
