mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tokcast::baselines::{forecast_baseline, Baseline, BaselineConfig};
use tokcast::harness::bench::{dataset_windows, Dataset};
use tokcast::harness::config::{cell_seed, BenchmarkConfig};
use tokcast::harness::{dm_table, run_benchmark};
use tokcast::metrics::{build_report, DmLoss, EvalPair, ReportSpec};
use tokcast::Error;

fn config(dir: &std::path::Path, models: serde_json::Value, extra: serde_json::Value) -> (BenchmarkConfig, String) {
    common::write_series(
        &dir.join("load.csv"),
        &[common::seasonal_load("a", 260, 1), common::seasonal_load("b", 260, 2)],
    );
    let mut v = serde_json::json!({
        "datasets": [{"id": "load", "path": dir.join("load.csv")}],
        "models": models,
        "horizons": [1],
        "lookback": 72,
        "stride": 8,
        "seed": 42,
    });
    for (k, x) in extra.as_object().unwrap() {
        v[k] = x.clone();
    }
    let text = serde_json::to_string_pretty(&v).unwrap();
    (BenchmarkConfig::from_json(&text).unwrap(), text)
}

#[test]
fn one_row_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let (cfg, text) = config(dir.path(), serde_json::json!([{"baseline": "snm"}, {"baseline": "csba"}]), serde_json::json!({}));
    let run = run_benchmark(&cfg, &text).unwrap();
    assert_eq!(run.record.reports.len(), 2);
    assert!(run.record.failed.is_empty());
    assert!(run.record.verify());
}

#[test]
fn repetitions_average_single_runs() {
    let dir = tempfile::tempdir().unwrap();
    let (cfg, text) = config(
        dir.path(),
        serde_json::json!([{"baseline": "npts"}]),
        serde_json::json!({"repetitions": 2}),
    );
    let averaged = run_benchmark(&cfg, &text).unwrap().record.reports.remove(0);

    let ds = Dataset::load("load", &cfg.datasets[0].path, false, &cfg).unwrap();
    let task = cfg.task(1).unwrap();
    let windows = dataset_windows(&ds, &task, &cfg).unwrap();
    let spec = ReportSpec {
        grid: cfg.quantiles.clone(),
        pincs: cfg.pincs.clone(),
    };
    let singles: Vec<_> = (0..2)
        .map(|rep| {
            let seed = cell_seed(42, "npts", "load", 1, rep);
            let pairs: Vec<EvalPair> = windows
                .iter()
                .enumerate()
                .map(|(k, w)| {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream(k as u64);
                    EvalPair {
                        actuals: w.actuals.to_vec(),
                        forecast: forecast_baseline(Baseline::Npts, w.context, &task, &BaselineConfig::default(), &mut rng)
                            .unwrap(),
                    }
                })
                .collect();
            build_report("npts", "load", 1, &pairs, &spec).unwrap()
        })
        .collect();
    assert_ne!(singles[0].crps, singles[1].crps);
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(1.0);
    assert!(close(averaged.rmse, (singles[0].rmse + singles[1].rmse) / 2.0));
    assert!(close(averaged.crps, (singles[0].crps + singles[1].crps) / 2.0));
    assert!(close(averaged.intervals[1].picp, (singles[0].intervals[1].picp + singles[1].intervals[1].picp) / 2.0));
}

#[test]
fn duplicate_model_gives_identical_rows() {
    let dir = tempfile::tempdir().unwrap();
    let (cfg, text) = config(
        dir.path(),
        serde_json::json!([{"baseline": "ets_lite"}, {"baseline": "ets_lite"}]),
        serde_json::json!({}),
    );
    let reports = run_benchmark(&cfg, &text).unwrap().record.reports;
    assert_eq!(reports.len(), 2);
    assert_eq!(reports[0], reports[1]);
}

#[test]
fn failed_cells_do_not_stop_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let (cfg, text) = config(
        dir.path(),
        serde_json::json!([{"baseline": "snm"}]),
        serde_json::json!({"horizons": [1, 500]}),
    );
    let record = run_benchmark(&cfg, &text).unwrap().record;
    assert_eq!(record.reports.len(), 1);
    assert_eq!(record.failed.len(), 1);
    assert_eq!(record.failed[0].horizon, 500);
}

#[test]
fn dm_on_benchmark_errors() {
    let dir = tempfile::tempdir().unwrap();
    let (cfg, text) = config(
        dir.path(),
        serde_json::json!([{"baseline": "snm"}, {"baseline": "csba"}]),
        serde_json::json!({"stride": 2}),
    );
    let mut errors = run_benchmark(&cfg, &text).unwrap().errors;
    let ab = dm_table(&errors, "snm", "csba", DmLoss::Squared).unwrap();
    let ba = dm_table(&errors, "csba", "snm", DmLoss::Squared).unwrap();
    assert!((ab[0].result.statistic + ba[0].result.statistic).abs() < 1e-12);
    assert_eq!(ab[0].result.reject, ab[0].result.statistic.abs() > 1.96);
    let same = dm_table(&errors, "snm", "snm", DmLoss::Squared).unwrap();
    assert_eq!((same[0].result.statistic, same[0].result.p_value), (0.0, 1.0));

    errors[1].origins.pop();
    errors[1].errors.pop();
    assert!(matches!(
        dm_table(&errors, "csba", "snm", DmLoss::Squared),
        Err(Error::MismatchedWindows)
    ));
}

#[test]
fn inputs_are_not_modified() {
    let dir = tempfile::tempdir().unwrap();
    let (cfg, text) = config(dir.path(), serde_json::json!([{"baseline": "snm"}]), serde_json::json!({}));
    let before = std::fs::read(&cfg.datasets[0].path).unwrap();
    run_benchmark(&cfg, &text).unwrap();
    assert_eq!(std::fs::read(&cfg.datasets[0].path).unwrap(), before);
}
