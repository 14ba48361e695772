use std::ffi::{CStr, CString};
use std::ptr;

use vapor_memory_lab_ffi::*;

fn last_error() -> String {
    let p = vml_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn default_config() -> *mut VmlConfig {
    let mut cfg = ptr::null_mut();
    assert_eq!(unsafe { vml_config_default(&mut cfg) }, VmlStatus::Ok);
    assert!(!cfg.is_null());
    cfg
}

#[test]
fn version_is_package_version() {
    let v = unsafe { CStr::from_ptr(vml_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn config_hash_matches_library() {
    let cfg = default_config();
    let mut buf = [0 as std::ffi::c_char; 65];
    unsafe {
        assert_eq!(vml_config_hash(cfg, buf.as_mut_ptr(), buf.len()), VmlStatus::Ok);
        let hash = CStr::from_ptr(buf.as_ptr()).to_str().unwrap().to_owned();
        let expected = vapor_memory_lab::config::ExperimentConfig::default().hash().unwrap();
        assert_eq!(hash, expected);
        assert_eq!(vml_config_hash(cfg, buf.as_mut_ptr(), 64), VmlStatus::InvalidArgument);
        assert!(last_error().contains("buffer"));
        vml_config_free(cfg);
    }
}

#[test]
fn bad_toml_reports_config_error() {
    let text = CString::new("[vapor]\ntemprature = 300.0\n").unwrap();
    let mut cfg = ptr::null_mut();
    let status = unsafe { vml_config_from_toml(text.as_ptr(), &mut cfg) };
    assert_eq!(status, VmlStatus::Config);
    assert!(cfg.is_null());
    assert!(last_error().contains("temprature"));

    // a later success clears the message
    let ok = CString::new("seed = 5\n").unwrap();
    assert_eq!(unsafe { vml_config_from_toml(ok.as_ptr(), &mut cfg) }, VmlStatus::Ok);
    assert!(vml_last_error_message().is_null());
    unsafe { vml_config_free(cfg) };
}

#[test]
fn null_pointers_are_rejected() {
    assert_eq!(unsafe { vml_config_default(ptr::null_mut()) }, VmlStatus::NullPointer);
    let mut out = VmlSlowLight::default();
    assert_eq!(unsafe { vml_slowlight(ptr::null(), 0.01, 14e-9, &mut out) }, VmlStatus::NullPointer);
    assert!(last_error().contains("cfg"));
    assert_eq!(unsafe { vml_spectrum_len(ptr::null()) }, 0);
    unsafe {
        vml_config_free(ptr::null_mut());
        vml_spectrum_free(ptr::null_mut());
    }
}

#[test]
fn spectrum_round_trip() {
    let text = CString::new("[grid]\nhalf_span_hz = 1.0e9\nn_half = 50\n").unwrap();
    let mut cfg = ptr::null_mut();
    unsafe {
        assert_eq!(vml_config_from_toml(text.as_ptr(), &mut cfg), VmlStatus::Ok);
        let mut spec = ptr::null_mut();
        assert_eq!(vml_spectrum_compute(cfg, 0.01, &mut spec), VmlStatus::Ok);
        let n = vml_spectrum_len(spec);
        assert_eq!(n, 101);
        let mut nu = vec![0.0; n];
        let mut t = vec![0.0; n];
        assert_eq!(vml_spectrum_copy(spec, nu.as_mut_ptr(), t.as_mut_ptr(), n), VmlStatus::Ok);
        assert_eq!(nu[50], 0.0);
        assert!(t.iter().all(|&v| (0.0..=1.0).contains(&v)));
        // the transparency peak sits at zero detuning
        assert!(t[50] > t[40] && t[50] > t[60]);
        assert_eq!(
            vml_spectrum_copy(spec, nu.as_mut_ptr(), t.as_mut_ptr(), n - 1),
            VmlStatus::InvalidArgument
        );
        vml_spectrum_free(spec);
        vml_config_free(cfg);
    }
}

#[test]
fn storage_and_lifetime() {
    let cfg = default_config();
    unsafe {
        let mut e = VmlEfficiency::default();
        assert_eq!(vml_storage_run(cfg, 90e-9, 0, &mut e), VmlStatus::Ok);
        assert!((e.storage_time_s - 52.37e-9).abs() < 0.5e-9);
        assert!((e.eta - 0.0982).abs() < 3.0 * e.eta_uncertainty);
        assert_eq!(e.low_confidence, 0);

        assert_eq!(vml_storage_run(cfg, 5e-9, 0, &mut e), VmlStatus::Numeric);
        assert!(!last_error().is_empty());
        vml_config_free(cfg);
    }

    let omega = 2.0 * std::f64::consts::PI * 3.573e6;
    let t: Vec<f64> = (0..30).map(|i| 400e-9 * i as f64 / 29.0).collect();
    let eta: Vec<f64> = t
        .iter()
        .map(|&x| vapor_memory_lab::estimation::lifetime_model(x, 84e-9, omega, 1.0, 0.3))
        .collect();
    let sigma: Vec<f64> = eta.iter().map(|v| 0.01 * v.max(1e-3)).collect();
    let mut fit = VmlLifetimeFit::default();
    let status = unsafe { vml_lifetime_fit(t.as_ptr(), eta.as_ptr(), sigma.as_ptr(), t.len(), &mut fit) };
    assert_eq!(status, VmlStatus::Ok);
    assert!((fit.t_mem_s - 84e-9).abs() < 1e-10);
    assert_eq!(fit.converged, 1);
    let status = unsafe { vml_lifetime_fit(t.as_ptr(), eta.as_ptr(), sigma.as_ptr(), 3, &mut fit) };
    assert_eq!(status, VmlStatus::InvalidArgument);
}

#[test]
fn larmor_frequency() {
    let mut f = 0.0;
    assert_eq!(unsafe { vml_larmor_frequency_hz(127.49e-6, &mut f) }, VmlStatus::Ok);
    assert!((f - 3.573e6).abs() / 3.573e6 < 5e-4);
    assert_eq!(unsafe { vml_larmor_frequency_hz(-1.0, &mut f) }, VmlStatus::InvalidArgument);
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/vapor_memory_lab.h")).unwrap();
    for name in [
        "vml_last_error_message",
        "vml_version",
        "vml_config_default",
        "vml_config_from_toml",
        "vml_config_free",
        "vml_config_set_seed",
        "vml_config_hash",
        "vml_spectrum_compute",
        "vml_spectrum_len",
        "vml_spectrum_copy",
        "vml_spectrum_free",
        "vml_slowlight",
        "vml_storage_run",
        "vml_lifetime_fit",
        "vml_larmor_frequency_hz",
        "typedef struct VmlConfig VmlConfig",
        "VML_STATUS_NON_CONVERGENCE",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
}
