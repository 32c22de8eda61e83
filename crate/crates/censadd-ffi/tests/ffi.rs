//! Exercises the C interface from Rust: handle lifecycle, band extraction,
//! and the error contract.

use censadd_ffi::*;
use std::ffi::{CStr, CString};

const CONFIG: &str = r#"{
    "psi": {"kind": "indicator_leq_tau0", "tau0": 0.8},
    "kernels": {"density": {"family": "epanechnikov", "order": 2}},
    "bandwidths": {"h": 0.3, "h_density": 0.4},
    "q": [{"family": "uniform", "a": -1.0, "b": 1.0}],
    "grid": {"points": 21, "span": 0.9}
}"#;

fn sample_arrays() -> (Vec<f64>, Vec<u8>, Vec<f64>) {
    let n = 40;
    let z: Vec<f64> = (0..n).map(|i| 0.1 + 0.9 * ((i * 13) % 17) as f64 / 17.0).collect();
    let delta: Vec<u8> = (0..n).map(|i| ((i * 7) % 5 != 0) as u8).collect();
    let x: Vec<f64> = (0..n)
        .map(|i| -0.95 + 1.9 * ((i * 11) % 23) as f64 / 22.0)
        .collect();
    (z, delta, x)
}

#[test]
fn fit_through_the_c_interface_matches_the_library() {
    let (z, delta, x) = sample_arrays();
    let n = z.len();

    let mut sample: *mut CensaddSample = std::ptr::null_mut();
    let status = unsafe {
        censadd_sample_new(z.as_ptr(), delta.as_ptr(), x.as_ptr(), n, 1, &mut sample)
    };
    assert_eq!(status, CensaddStatus::Ok);
    assert_eq!(unsafe { censadd_sample_n(sample) }, n);
    assert_eq!(unsafe { censadd_sample_dim(sample) }, 1);

    let config = CString::new(CONFIG).unwrap();
    let mut fit: *mut CensaddFit = std::ptr::null_mut();
    let status = unsafe { censadd_fit_run(sample, config.as_ptr(), &mut fit) };
    assert_eq!(status, CensaddStatus::Ok);
    assert_eq!(unsafe { censadd_fit_dim(fit) }, 1);
    let len = unsafe { censadd_fit_grid_len(fit, 0) };
    assert_eq!(len, 21);

    let mut grid = vec![0.0; len];
    let mut eta = vec![0.0; len];
    let mut lo = vec![0.0; len];
    let mut hi = vec![0.0; len];
    for (column, buf) in [
        (CensaddBandColumn::Grid, &mut grid),
        (CensaddBandColumn::Eta, &mut eta),
        (CensaddBandColumn::CiLo, &mut lo),
        (CensaddBandColumn::CiHi, &mut hi),
    ] {
        let status =
            unsafe { censadd_fit_band(fit, 0, column, buf.as_mut_ptr(), len) };
        assert_eq!(status, CensaddStatus::Ok);
    }

    // direct library run with the same inputs
    let cols = vec![x.clone()];
    let lib_sample =
        censadd::survival::CensoredSample::from_columns(z, delta, cols).unwrap();
    let cfg: censadd::config::FitFileConfig = serde_json::from_str(CONFIG).unwrap();
    let (lib_fit, lib_report) = censadd::cli::fit_bands(&lib_sample, &cfg).unwrap();
    assert_eq!(grid, lib_fit.components[0].grid);
    assert_eq!(eta, lib_fit.components[0].eta);
    assert_eq!(&lo, lib_fit.components[0].ci_lo.as_ref().unwrap());
    assert_eq!(&hi, lib_fit.components[0].ci_hi.as_ref().unwrap());
    let constant = unsafe { censadd_fit_constant(fit) };
    assert_eq!(constant, lib_fit.constant);

    let report_ptr = unsafe { censadd_fit_report_json(fit) };
    assert!(!report_ptr.is_null());
    let report_json = unsafe { CStr::from_ptr(report_ptr) }.to_str().unwrap();
    let parsed: serde_json::Value = serde_json::from_str(report_json).unwrap();
    assert_eq!(parsed["n"].as_u64().unwrap() as usize, n);
    assert_eq!(
        parsed["constant"].as_f64().unwrap(),
        lib_report.constant
    );
    unsafe {
        censadd_string_free(report_ptr);
        censadd_fit_free(fit);
        censadd_sample_free(sample);
    }
}

#[test]
fn error_contract() {
    // null pointers
    let status = unsafe {
        censadd_sample_new(
            std::ptr::null(),
            std::ptr::null(),
            std::ptr::null(),
            0,
            0,
            std::ptr::null_mut(),
        )
    };
    assert_eq!(status, CensaddStatus::NullPointer);

    // invalid observation: delta = 2
    let z = [0.5f64];
    let delta = [2u8];
    let x = [0.0f64];
    let mut sample: *mut CensaddSample = std::ptr::null_mut();
    let status = unsafe {
        censadd_sample_new(z.as_ptr(), delta.as_ptr(), x.as_ptr(), 1, 1, &mut sample)
    };
    assert_eq!(status, CensaddStatus::InvalidArgument);
    let msg_ptr = censadd_last_error_message();
    assert!(!msg_ptr.is_null());
    let msg = unsafe { CStr::from_ptr(msg_ptr) }.to_str().unwrap().to_string();
    assert!(msg.contains("indicator"), "message: {msg}");
    unsafe { censadd_string_free(msg_ptr) };

    // malformed configuration JSON
    let delta_ok = [1u8];
    let status = unsafe {
        censadd_sample_new(z.as_ptr(), delta_ok.as_ptr(), x.as_ptr(), 1, 1, &mut sample)
    };
    assert_eq!(status, CensaddStatus::Ok);
    let bad = CString::new("{\"nope\": 1}").unwrap();
    let mut fit: *mut CensaddFit = std::ptr::null_mut();
    let status = unsafe { censadd_fit_run(sample, bad.as_ptr(), &mut fit) };
    assert_eq!(status, CensaddStatus::InvalidArgument);
    let msg_ptr = censadd_last_error_message();
    assert!(!msg_ptr.is_null());
    unsafe {
        censadd_string_free(msg_ptr);
        censadd_sample_free(sample);
    }

    // version string is a readable static
    let version = unsafe { CStr::from_ptr(censadd_version()) }.to_str().unwrap();
    assert!(version.starts_with("0."));
}

#[test]
fn band_buffer_too_small_is_reported() {
    let (z, delta, x) = sample_arrays();
    let mut sample: *mut CensaddSample = std::ptr::null_mut();
    unsafe {
        censadd_sample_new(z.as_ptr(), delta.as_ptr(), x.as_ptr(), z.len(), 1, &mut sample)
    };
    let config = CString::new(CONFIG).unwrap();
    let mut fit: *mut CensaddFit = std::ptr::null_mut();
    let status = unsafe { censadd_fit_run(sample, config.as_ptr(), &mut fit) };
    assert_eq!(status, CensaddStatus::Ok);
    let mut small = vec![0.0; 3];
    let status = unsafe {
        censadd_fit_band(fit, 0, CensaddBandColumn::Eta, small.as_mut_ptr(), 3)
    };
    assert_eq!(status, CensaddStatus::InvalidArgument);
    // out-of-range axis
    let status = unsafe {
        censadd_fit_band(fit, 5, CensaddBandColumn::Eta, small.as_mut_ptr(), 3)
    };
    assert_eq!(status, CensaddStatus::InvalidArgument);
    unsafe {
        censadd_fit_free(fit);
        censadd_sample_free(sample);
    }
}
