use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use cepsonar::dsp::{cepstrogram, LifterWindow, SpectralParams};
use cepsonar::nn::{Checkpoint, ModelConfig, NetworkModel};
use cepsonar::series::TimeSeries;
use cepsonar_ffi::*;

fn last_error() -> String {
    let p = cepsonar_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

/// Surface-minus-direct path difference for the default geometry, written
/// out from the image-source construction.
fn oracle_tdoa(r: f64) -> f64 {
    ((r * r + 30.0f64.powi(2)).sqrt() - (r * r + 28.0f64.powi(2)).sqrt()) / 1500.0
}

#[test]
fn range_conversions_invert() {
    for r in [0.0, 10.0, 50.0, 100.0, 200.0, 500.0] {
        let mut tau = 0.0;
        assert_eq!(unsafe { cepsonar_range_to_tdoa(r, 1.0, 29.0, 1500.0, &mut tau) }, CepsonarStatus::Ok);
        assert!((tau - oracle_tdoa(r)).abs() < 1e-15);
        let mut back = -1.0;
        assert_eq!(unsafe { cepsonar_tdoa_to_range(tau, 1.0, 29.0, 1500.0, &mut back) }, CepsonarStatus::Ok);
        assert!((back - r).abs() < 0.1, "{r} -> {back}");
    }
}

#[test]
fn failures_set_status_and_message() {
    let mut x = 0.0;
    assert_eq!(unsafe { cepsonar_tdoa_to_range(0.0, 1.0, 29.0, 1500.0, &mut x) }, CepsonarStatus::OutOfGeometry);
    assert!(last_error().contains("TDOA"));
    assert_eq!(unsafe { cepsonar_tdoa_to_range(1e-4, -1.0, 29.0, 1500.0, &mut x) }, CepsonarStatus::InvalidArgument);
    assert_eq!(unsafe { cepsonar_range_to_tdoa(f64::NAN, 1.0, 29.0, 1500.0, &mut x) }, CepsonarStatus::InvalidArgument);
    assert_eq!(unsafe { cepsonar_range_to_tdoa(1.0, 1.0, 29.0, 1500.0, ptr::null_mut()) }, CepsonarStatus::NullPointer);
    assert_eq!(last_error(), "tdoa is null");
    let mut f = ptr::null_mut();
    assert_eq!(unsafe { cepsonar_featurizer_new(250_000.0, 256, 1, &mut f) }, CepsonarStatus::InvalidArgument);
    assert!(f.is_null());
    let mut m = ptr::null_mut();
    let bad = CString::new("/definitely/not/here.cnnm").unwrap();
    assert_eq!(unsafe { cepsonar_model_load(bad.as_ptr(), &mut m) }, CepsonarStatus::Io);
    assert!(m.is_null());
    assert!(last_error().contains("/definitely/not/here.cnnm"));
}

#[test]
fn featurizer_matches_library() {
    let rate = 250_000.0;
    let samples: Vec<f64> = (0..3 * 8192).map(|i| ((i * 7919) % 1013) as f64 / 1013.0 - 0.5).collect();
    let mut f = ptr::null_mut();
    assert_eq!(unsafe { cepsonar_featurizer_new(rate, 4096, 3, &mut f) }, CepsonarStatus::Ok);
    let (mut m, mut n) = (0, 0);
    assert_eq!(unsafe { cepsonar_featurizer_shape(f, &mut m, &mut n) }, CepsonarStatus::Ok);
    assert_eq!((m, n), (330, 3));
    let mut out = vec![0.0; m * n];
    assert_eq!(unsafe { cepsonar_featurizer_compute(f, samples.as_ptr(), samples.len(), out.as_mut_ptr(), out.len()) }, CepsonarStatus::Ok);
    let params = SpectralParams { window_length: 4096, ..SpectralParams::default() };
    let expected = cepstrogram(&TimeSeries::new(samples.clone(), rate).unwrap(), 3, LifterWindow::ranging(rate).unwrap(), &params).unwrap();
    assert_eq!(out, expected.values);
    assert_eq!(
        unsafe { cepsonar_featurizer_compute(f, samples.as_ptr(), samples.len(), out.as_mut_ptr(), out.len() - 1) },
        CepsonarStatus::ShapeMismatch
    );
    unsafe { cepsonar_featurizer_free(f) };
}

#[test]
fn model_round_trip_through_handle() {
    let cfg = ModelConfig { conv_filters: 4, hidden_units: 8, ..ModelConfig::new(40, 2) };
    let ck = Checkpoint { model: NetworkModel::<f32>::init(cfg, 9).unwrap(), norm: None };
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.cnnm");
    ck.save(&path).unwrap();

    let c_path = CString::new(path.to_str().unwrap()).unwrap();
    let mut model = ptr::null_mut();
    assert_eq!(unsafe { cepsonar_model_load(c_path.as_ptr(), &mut model) }, CepsonarStatus::Ok);
    let (mut m, mut n) = (0, 0);
    assert_eq!(unsafe { cepsonar_model_input_shape(model, &mut m, &mut n) }, CepsonarStatus::Ok);
    assert_eq!((m, n), (40, 2));

    let features: Vec<f64> = (0..3 * 80).map(|i| (i as f64 * 0.37).sin()).collect();
    let mut out = [CepsonarPrediction { presence_probability: -1.0, range: -1.0 }; 3];
    assert_eq!(unsafe { cepsonar_model_predict(model, features.as_ptr(), 3, out.as_mut_ptr()) }, CepsonarStatus::Ok);
    let views: Vec<&[f64]> = features.chunks(80).collect();
    for (o, p) in out.iter().zip(ck.predict_raw(&views).unwrap()) {
        assert_eq!(o.presence_probability, p.presence_probability);
        assert_eq!(o.range, p.range_estimate);
        assert!((0.0..=1.0).contains(&o.presence_probability));
    }
    assert_eq!(unsafe { cepsonar_model_predict(model, ptr::null(), 0, ptr::null_mut()) }, CepsonarStatus::Ok);
    assert_eq!(unsafe { cepsonar_model_predict(model, ptr::null(), 1, out.as_mut_ptr()) }, CepsonarStatus::NullPointer);
    unsafe { cepsonar_model_free(model) };
}

fn target_dir() -> PathBuf {
    // Integration tests run from <target>/<profile>/deps.
    std::env::current_exe().unwrap().parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn c_program_links_against_header() {
    let crate_dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    let lib = target_dir().join("libcepsonar_ffi.a");
    assert!(lib.exists(), "static library missing at {}", lib.display());
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let status = Command::new(std::env::var("CC").unwrap_or_else(|_| "cc".into()))
        .args(["-std=c99", "-Wall", "-Werror", "-I"])
        .arg(crate_dir.join("include"))
        .arg(crate_dir.join("tests/c/smoke.c"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .expect("C compiler available");
    assert!(status.success());
    let run = Command::new(&exe).output().unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    assert_eq!(String::from_utf8_lossy(&run.stdout).trim(), "ok");
}

#[test]
fn version_is_static_string() {
    let v = unsafe { CStr::from_ptr(cepsonar_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
