use std::ffi::{CStr, CString};
use std::process::Command;
use std::ptr;

use rqp_core::eval::{make_labels, train_regressor, Dataset, NetPredictor};
use rqp_core::features::ChannelSet;
use rqp_core::ingest::{synth_corpus, write_corpus, CorpusItem};
use rqp_core::model::{ModelForm, ModelKind};
use rqp_core::nn::TrainConfig;
use rqp_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(rqp_last_error_message()) }
        .to_string_lossy()
        .into_owned()
}

#[test]
fn qp_conversions() {
    let mut qp = 0.0;
    assert_eq!(unsafe { rqp_qstep_to_qp(1.0, &mut qp) }, RqpStatus::Ok);
    assert_eq!(qp, 4.0);
    let mut q = 0.0;
    assert_eq!(unsafe { rqp_qp_to_qstep(22.0, &mut q) }, RqpStatus::Ok);
    assert!((q - 8.0).abs() < 1e-12);
    assert_eq!(unsafe { rqp_qstep_to_qp(-1.0, &mut qp) }, RqpStatus::InvalidArgument);
    assert!(!last_error().is_empty());
    assert_eq!(unsafe { rqp_qstep_to_qp(1.0, ptr::null_mut()) }, RqpStatus::NullPointer);
}

#[test]
fn entropy_matches_reference_value() {
    let mut h = 0.0;
    assert_eq!(unsafe { rqp_cauchy_entropy(1.0, 1.0, false, 1, &mut h) }, RqpStatus::Ok);
    assert!((h - 0.858_398_797_743_100_8).abs() < 1e-14, "{h}");
    let mut adaptive = 0.0;
    assert_eq!(unsafe { rqp_cauchy_entropy(1.0, 1.0, true, 0, &mut adaptive) }, RqpStatus::Ok);
    assert!(adaptive > h);
    assert_eq!(unsafe { rqp_cauchy_entropy(0.0, 1.0, true, 0, &mut h) }, RqpStatus::InvalidArgument);
}

#[test]
fn fit_and_invert_fastened_quadratic() {
    // qp = alpha (u^2 - u0^2) + beta (u - u0) + qp0 sampled at two rates
    let (alpha, beta, qp0, u0): (f64, f64, f64, f64) = (0.05, -6.0 - 0.8, 10.0, 8.0);
    let r0 = u0.exp();
    let us = [7.0f64, 5.5];
    let qps: Vec<f64> = us.iter().map(|u| alpha * (u * u - u0 * u0) + beta * (u - u0) + qp0).collect();
    let rates: Vec<f64> = us.iter().map(|u| u.exp()).collect();
    let mut m = ptr::null_mut();
    let st = unsafe { rqp_model_fit(RqpModelForm::Quadratic, true, qp0, r0, qps.as_ptr(), rates.as_ptr(), 2, &mut m) };
    assert_eq!(st, RqpStatus::Ok, "{}", last_error());

    let mut coeffs = [0.0; 3];
    let mut len = 0;
    assert_eq!(unsafe { rqp_model_coeffs(m, coeffs.as_mut_ptr(), 1, &mut len) }, RqpStatus::BufferTooSmall);
    assert_eq!(len, 2);
    assert_eq!(unsafe { rqp_model_coeffs(m, coeffs.as_mut_ptr(), 3, &mut len) }, RqpStatus::Ok);
    assert!((coeffs[0] - alpha).abs() < 1e-9 && (coeffs[1] - beta).abs() < 1e-9, "{coeffs:?}");

    let mut rate = 0.0;
    assert_eq!(unsafe { rqp_model_predict_rate(m, qp0, &mut rate) }, RqpStatus::Ok);
    assert!((rate / r0 - 1.0).abs() < 1e-12);
    let mut qp = 0.0;
    assert_eq!(unsafe { rqp_model_qp(m, r0, &mut qp) }, RqpStatus::Ok);
    assert!((qp - qp0).abs() < 1e-12);
    for (q, r) in qps.iter().zip(&rates) {
        unsafe { rqp_model_predict_rate(m, *q, &mut rate) };
        assert!((rate / r - 1.0).abs() < 1e-6);
    }
    unsafe { rqp_model_free(m) };
}

#[test]
fn fit_errors_map_to_status_codes() {
    let (qps, rates) = ([10.0], [100.0]);
    let mut m = ptr::null_mut();
    let st = unsafe { rqp_model_fit(RqpModelForm::Quadratic, false, 0.0, 0.0, qps.as_ptr(), rates.as_ptr(), 1, &mut m) };
    assert_eq!(st, RqpStatus::UnderDetermined);
    assert!(m.is_null());
    assert!(last_error().contains('1'), "{}", last_error());

    // concave-up free quadratic that never reaches qp 100
    let coeffs = [1.0, 0.0, 0.0];
    assert_eq!(unsafe { rqp_model_new(RqpModelForm::Quadratic, false, 0.0, 0.0, coeffs.as_ptr(), 3, &mut m) }, RqpStatus::Ok);
    let mut rate = 0.0;
    assert_eq!(unsafe { rqp_model_predict_rate(m, -5.0, &mut rate) }, RqpStatus::NoRealRoot);
    unsafe { rqp_model_free(m) };
    assert_eq!(unsafe { rqp_model_new(RqpModelForm::Linear, false, 0.0, 0.0, coeffs.as_ptr(), 3, &mut m) }, RqpStatus::InvalidArgument);
    assert_eq!(unsafe { rqp_model_predict_rate(ptr::null(), 1.0, &mut rate) }, RqpStatus::NullPointer);
    unsafe { rqp_model_free(ptr::null_mut()) };

    let mut d = 0.0;
    assert_eq!(unsafe { rqp_relative_error(100.0, 85.0, &mut d) }, RqpStatus::Ok);
    assert!((d - 15.0).abs() < 1e-12);
}

#[test]
fn predictor_round_trip_through_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let items: Vec<CorpusItem> = synth_corpus(12, 2, (32, 32)).unwrap().into_iter().map(Into::into).collect();
    write_corpus(dir.path(), &items).unwrap();
    let kind = ModelKind::new(ModelForm::Quadratic, true);
    let data = Dataset::split(items.clone(), 2, 0.2).unwrap();
    let cfg = TrainConfig { epochs: 2, ..TrainConfig::default() };
    let (regressor, _) = train_regressor(&data, kind, ChannelSet::FULL, &cfg).unwrap();
    let net = NetPredictor { regressor, channels: ChannelSet::FULL };
    let ck = dir.path().join("model.json");
    net.to_checkpoint().unwrap().save(&ck).unwrap();

    let path = CString::new(ck.to_str().unwrap()).unwrap();
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { rqp_predictor_load(path.as_ptr(), &mut p) }, RqpStatus::Ok, "{}", last_error());
    let frame = CString::new(dir.path().join("synth_00001.pgm").to_str().unwrap()).unwrap();
    let sidecar = CString::new(dir.path().join("synth_00001.rqp.json").to_str().unwrap()).unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { rqp_predictor_model(p, frame.as_ptr(), sidecar.as_ptr(), &mut m) }, RqpStatus::Ok, "{}", last_error());

    let expected = net.params(&items[1]).unwrap();
    let mut coeffs = [0.0; 2];
    let mut len = 0;
    unsafe { rqp_model_coeffs(m, coeffs.as_mut_ptr(), 2, &mut len) };
    assert_eq!(coeffs.to_vec(), expected.coeffs);
    let anchor = items[1].metadata.anchor;
    let mut rate = 0.0;
    unsafe { rqp_model_predict_rate(m, anchor.qp0, &mut rate) };
    assert!((rate / anchor.r0 - 1.0).abs() < 1e-12);
    assert!(make_labels(&items[1].metadata, kind).is_ok());
    unsafe {
        rqp_model_free(m);
        rqp_predictor_free(p);
    }

    let missing = CString::new(dir.path().join("none.json").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { rqp_predictor_load(missing.as_ptr(), &mut p) }, RqpStatus::Io);
    std::fs::write(dir.path().join("bad.json"), "{}").unwrap();
    let bad = CString::new(dir.path().join("bad.json").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { rqp_predictor_load(bad.as_ptr(), &mut p) }, RqpStatus::Parse);
}

#[test]
fn generated_header_compiles_as_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/rqp.h");
    let text = std::fs::read_to_string(header).unwrap();
    for name in ["rqp_model_fit", "rqp_predictor_load", "rqp_last_error_message", "RQP_STATUS_NO_REAL_ROOT", "RqpModel"] {
        assert!(text.contains(name), "header lacks {name}");
    }
    match Command::new("cc").args(["-fsyntax-only", "-x", "c", header]).output() {
        Ok(out) => assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr)),
        Err(_) => eprintln!("no C compiler; skipped syntax check"),
    }
}
