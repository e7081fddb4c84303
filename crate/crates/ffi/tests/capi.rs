use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use tokcast::model::{Checkpoint, ModelConfig, ModelParams, TrainSpec};
use tokcast_ffi::*;

fn periodic(n: usize) -> Vec<f64> {
    (0..n).map(|t| 50.0 + ((t % 24) as f64 * 0.5).sin() * 8.0).collect()
}

fn last_error() -> String {
    let p = tc_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn tiny_checkpoint(dir: &std::path::Path) -> CString {
    let config = ModelConfig {
        d_model: 8,
        n_heads: 2,
        d_ff: 16,
        n_enc: 1,
        n_dec: 1,
        context_len: 64,
        horizon_len: 24,
        ..Default::default()
    };
    let params = ModelParams::init(&config, 2);
    let path = dir.join("tiny.zlc");
    Checkpoint {
        config,
        train: TrainSpec::default(),
        params,
    }
    .save(&path)
    .unwrap();
    CString::new(path.to_str().unwrap()).unwrap()
}

#[test]
fn baseline_forecast_round_trip() {
    let ctx = periodic(24 * 5);
    let id = CString::new("snm").unwrap();
    let mut f = ptr::null_mut();
    let status = unsafe { tc_forecast_baseline(id.as_ptr(), ctx.as_ptr(), ctx.len(), 24, ptr::null(), 0, 0, &mut f) };
    assert_eq!(status, TcStatus::TC_OK);
    unsafe {
        assert_eq!(tc_forecast_horizon(f), 24);
        assert_eq!(tc_forecast_level_count(f), 9);
        let mut levels = [0.0; 9];
        assert_eq!(tc_forecast_levels(f, levels.as_mut_ptr(), 9), TcStatus::TC_OK);
        assert_eq!(levels[4], 0.5);
        let mut point = [0.0; 24];
        assert_eq!(tc_forecast_point(f, point.as_mut_ptr(), 24), TcStatus::TC_OK);
        assert_eq!(&point[..], &ctx[ctx.len() - 24..]);
        let mut median = [0.0; 24];
        assert_eq!(tc_forecast_values(f, 4, median.as_mut_ptr(), 24), TcStatus::TC_OK);
        assert_eq!(median, point);

        let mut crps = f64::NAN;
        assert_eq!(tc_metric_crps(point.as_ptr(), 24, f, &mut crps), TcStatus::TC_OK);
        assert!(crps >= 0.0);

        let mut small = [0.0; 3];
        assert_eq!(tc_forecast_point(f, small.as_mut_ptr(), 3), TcStatus::TC_INVALID_ARGUMENT);
        assert!(last_error().contains("buffer"));
        assert_eq!(tc_forecast_values(f, 99, median.as_mut_ptr(), 24), TcStatus::TC_INVALID_ARGUMENT);
        tc_forecast_free(f);
    }
}

#[test]
fn errors_are_reported() {
    let ctx = periodic(10);
    let mut f = ptr::null_mut();
    let bogus = CString::new("arima").unwrap();
    let status = unsafe { tc_forecast_baseline(bogus.as_ptr(), ctx.as_ptr(), ctx.len(), 4, ptr::null(), 0, 0, &mut f) };
    assert_eq!(status, TcStatus::TC_INVALID_ARGUMENT);
    assert!(f.is_null());
    assert!(last_error().contains("arima"));

    let snm = CString::new("snm").unwrap();
    let status = unsafe { tc_forecast_baseline(snm.as_ptr(), ctx.as_ptr(), ctx.len(), 4, ptr::null(), 0, 0, &mut f) };
    assert_eq!(status, TcStatus::TC_VALIDATION);

    let status = unsafe { tc_forecast_baseline(snm.as_ptr(), ptr::null(), 5, 4, ptr::null(), 0, 0, &mut f) };
    assert_eq!(status, TcStatus::TC_NULL_POINTER);

    let mut m = ptr::null_mut();
    let missing = CString::new("/nonexistent/model.zlc").unwrap();
    assert_eq!(unsafe { tc_model_load(missing.as_ptr(), &mut m) }, TcStatus::TC_VALIDATION);
    assert!(m.is_null());
    unsafe {
        tc_model_free(ptr::null_mut());
        tc_forecast_free(ptr::null_mut());
    }
}

#[test]
fn model_forecast_is_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let path = tiny_checkpoint(dir.path());
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { tc_model_load(path.as_ptr(), &mut m) }, TcStatus::TC_OK);
    assert_eq!(unsafe { tc_model_horizon_limit(m) }, 24);
    let ctx = periodic(48);
    let levels = [0.05, 0.5, 0.95];
    let run = |seed| {
        let mut f = ptr::null_mut();
        let s = unsafe { tc_forecast_model(m, ctx.as_ptr(), ctx.len(), 12, levels.as_ptr(), 3, 10, 1.0, seed, &mut f) };
        assert_eq!(s, TcStatus::TC_OK);
        let mut rows = [[0.0; 12]; 3];
        for (i, r) in rows.iter_mut().enumerate() {
            assert_eq!(unsafe { tc_forecast_values(f, i, r.as_mut_ptr(), 12) }, TcStatus::TC_OK);
        }
        unsafe { tc_forecast_free(f) };
        rows
    };
    let a = run(7);
    assert_eq!(a, run(7));
    assert!((0..12).all(|t| a[0][t] <= a[1][t] && a[1][t] <= a[2][t]));
    let mut f = ptr::null_mut();
    let s = unsafe { tc_forecast_model(m, ctx.as_ptr(), ctx.len(), 30, ptr::null(), 0, 4, 1.0, 0, &mut f) };
    assert_eq!(s, TcStatus::TC_VALIDATION);
    unsafe { tc_model_free(m) };
}

#[test]
fn metrics_and_dm() {
    let a = [1.0, 2.0, 3.0, 4.0];
    let p = [1.0, 2.0, 3.0, 8.0];
    let (mut r, mut m) = (0.0, 0.0);
    unsafe {
        assert_eq!(tc_metric_rmse(a.as_ptr(), p.as_ptr(), 4, &mut r), TcStatus::TC_OK);
        assert_eq!(tc_metric_mae(a.as_ptr(), p.as_ptr(), 4, &mut m), TcStatus::TC_OK);
    }
    assert_eq!((r, m), (2.0, 1.0));

    let e1: Vec<f64> = (0..40).map(|i| (i as f64 * 0.7).sin()).collect();
    let e2: Vec<f64> = (0..40).map(|i| 1.5 * (i as f64 * 1.3).cos()).collect();
    let (mut s1, mut s2, mut pv, mut rej) = (0.0, 0.0, 0.0, false);
    unsafe {
        assert_eq!(
            tc_dm_test(e1.as_ptr(), e2.as_ptr(), 40, 2, TcLoss::TC_LOSS_SQUARED, &mut s1, &mut pv, &mut rej),
            TcStatus::TC_OK
        );
        assert_eq!(
            tc_dm_test(e2.as_ptr(), e1.as_ptr(), 40, 2, TcLoss::TC_LOSS_SQUARED, &mut s2, &mut pv, &mut rej),
            TcStatus::TC_OK
        );
    }
    assert!((s1 + s2).abs() < 1e-12);
    assert_eq!(rej, s2.abs() > 1.96);
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(tc_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

const C_PROGRAM: &str = r#"
#include <stdio.h>
#include "tokcast.h"

int main(void) {
    double ctx[96];
    for (int i = 0; i < 96; i++) ctx[i] = 10.0 + (i % 24);
    TcForecast *f = NULL;
    if (tc_forecast_baseline("snm", ctx, 96, 24, NULL, 0, 1, &f) != TC_OK) {
        fprintf(stderr, "%s\n", tc_last_error_message());
        return 1;
    }
    double point[24];
    if (tc_forecast_point(f, point, 24) != TC_OK) return 2;
    for (int t = 0; t < 24; t++) if (point[t] != ctx[72 + t]) return 3;
    tc_forecast_free(f);
    if (tc_forecast_baseline("nope", ctx, 96, 24, NULL, 0, 1, &f) != TC_INVALID_ARGUMENT) return 4;
    printf("ok %s\n", tc_version());
    return 0;
}
"#;

#[test]
fn c_program_links_against_static_library() {
    if Command::new("cc").arg("--version").output().is_err() {
        eprintln!("no C compiler; skipping");
        return;
    }
    let crate_dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let exe = std::env::current_exe().unwrap();
    let deps = exe.parent().unwrap();
    let archive = [deps.join("libtokcast_ffi.a"), deps.parent().unwrap().join("libtokcast_ffi.a")]
        .into_iter()
        .find(|p| p.is_file())
        .expect("static library built alongside the tests");
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(&src, C_PROGRAM).unwrap();
    let bin = dir.path().join("main");
    let cc = Command::new("cc")
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(crate_dir.join("include"))
        .arg(&src)
        .arg(&archive)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .output()
        .unwrap();
    assert!(cc.status.success(), "{}", String::from_utf8_lossy(&cc.stderr));
    let run = Command::new(&bin).output().unwrap();
    assert!(run.status.success(), "exit {:?}: {}", run.status.code(), String::from_utf8_lossy(&run.stderr));
    assert!(String::from_utf8_lossy(&run.stdout).starts_with("ok "));
}
