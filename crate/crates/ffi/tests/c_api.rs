use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use floquet_delta::resonances::{find_resonances, FindOptions};
use floquet_delta::wronskian::wronskian;
use floquet_delta::{Complex64, ModelParams, SheetConfig};
use floquet_delta_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(fd_last_error_message()) }.to_string_lossy().into_owned()
}

fn model(omega: f64, r: f64) -> *mut FdModel {
    let mut m = ptr::null_mut();
    let st = unsafe { fd_model_new(omega, r, FdPotential::Well as i32, &mut m) };
    assert_eq!(st, FdStatus::Ok, "{}", last_error());
    assert!(!m.is_null());
    m
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(fd_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn wronskian_matches_the_library() {
    let m = model(2.0, 0.4);
    let z = Complex64::new(-0.3, -0.7);
    let (mut re, mut im) = (0.0, 0.0);
    assert_eq!(unsafe { fd_wronskian(m, z.re, z.im, &mut re, &mut im) }, FdStatus::Ok);
    let direct = wronskian(z, &ModelParams::well(2.0, 0.4).unwrap(), &SheetConfig::usual()).unwrap().w;
    assert_eq!((re, im), (direct.re, direct.im));
    unsafe { fd_model_free(m) };
}

#[test]
fn resonance_list_matches_the_library() {
    let m = model(2.0, 0.1);
    let mut list = ptr::null_mut();
    assert_eq!(unsafe { fd_find_resonances(m, &mut list) }, FdStatus::Ok);
    let direct = find_resonances(&ModelParams::well(2.0, 0.1).unwrap(), &SheetConfig::usual(), &FindOptions::default()).unwrap();
    let len = unsafe { fd_resonance_list_len(list) };
    assert_eq!(len, direct.resonances.len());
    assert!(len >= 1);
    assert_eq!(unsafe { fd_resonance_list_count(list) }, direct.count);
    assert_eq!(unsafe { fd_resonance_list_consistent(list) }, 1);
    for (i, d) in direct.resonances.iter().enumerate() {
        let mut r = FdResonance::default();
        assert_eq!(unsafe { fd_resonance_list_get(list, i, &mut r) }, FdStatus::Ok);
        assert_eq!((r.z_re, r.z_im), (d.z_star.re, d.z_star.im));
        assert_eq!(r.gamma, d.gamma);
        assert_eq!(r.visible, 1);
    }
    let mut r = FdResonance::default();
    assert_eq!(unsafe { fd_resonance_list_get(list, len, &mut r) }, FdStatus::InvalidParameter);
    assert!(last_error().contains("out of range"));
    unsafe {
        fd_resonance_list_free(list);
        fd_model_free(m);
    }
}

#[test]
fn psi_parts_add_up_and_cache_is_reset() {
    let m = model(2.0, 0.1);
    let mut a = FdPsi::default();
    assert_eq!(unsafe { fd_psi(m, 0.0, 5.0, &mut a) }, FdStatus::Ok, "{}", last_error());
    assert!((a.re - (a.gamow_re + a.cut_re + a.f_re)).abs() < 1e-14);
    assert!((a.im - (a.gamow_im + a.cut_im + a.f_im)).abs() < 1e-14);
    assert!(a.re.hypot(a.im) > 1e-3);

    let zero = CString::new("zero:1").unwrap();
    assert_eq!(unsafe { fd_model_set_psi0(m, zero.as_ptr()) }, FdStatus::Ok);
    let mut b = FdPsi::default();
    assert_eq!(unsafe { fd_psi(m, 0.0, 5.0, &mut b) }, FdStatus::Ok, "{}", last_error());
    assert_eq!(b.re.hypot(b.im), 0.0);
    unsafe { fd_model_free(m) };
}

#[test]
fn errors_are_reported_not_raised() {
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { fd_model_new(-1.0, 0.1, 0, &mut m) }, FdStatus::InvalidParameter);
    assert!(m.is_null());
    assert!(!last_error().is_empty());
    assert_eq!(unsafe { fd_model_new(2.0, 0.1, 7, &mut m) }, FdStatus::InvalidParameter);
    assert_eq!(unsafe { fd_model_new(2.0, 0.1, 0, ptr::null_mut()) }, FdStatus::NullPointer);

    let m = model(2.0, 0.1);
    let bad = CString::new("sideways").unwrap();
    assert_eq!(unsafe { fd_model_set_sheet(m, bad.as_ptr()) }, FdStatus::InvalidParameter);
    let vertical = CString::new(format!("theta={}", std::f64::consts::FRAC_PI_2)).unwrap();
    assert_eq!(unsafe { fd_model_set_sheet(m, vertical.as_ptr()) }, FdStatus::VerticalCut);
    assert_eq!(unsafe { fd_model_set_psi0(m, ptr::null()) }, FdStatus::NullPointer);

    let flip = CString::new("flip:0").unwrap();
    assert_eq!(unsafe { fd_model_set_sheet(m, flip.as_ptr()) }, FdStatus::Ok);
    assert_eq!(last_error(), "");
    let mut out = FdPsi::default();
    assert_eq!(unsafe { fd_psi(m, 0.0, 5.0, &mut out) }, FdStatus::InvalidParameter);

    let mut w = (0.0, 0.0);
    assert_eq!(unsafe { fd_wronskian(ptr::null(), 0.0, 0.0, &mut w.0, &mut w.1) }, FdStatus::NullPointer);
    unsafe {
        fd_model_free(m);
        fd_model_free(ptr::null_mut());
        fd_resonance_list_free(ptr::null_mut());
    }
}

#[test]
fn piecewise_cubic_setter_validates_lengths() {
    let m = model(2.0, 0.1);
    let xs = [-1.0, 0.0, 1.0];
    let ys = [0.0, 1.0, 0.0];
    assert_eq!(
        unsafe { fd_model_set_piecewise_cubic(m, xs.as_ptr(), ys.as_ptr(), ptr::null(), 3) },
        FdStatus::Ok
    );
    assert_eq!(
        unsafe { fd_model_set_piecewise_cubic(m, xs.as_ptr(), ys.as_ptr(), ptr::null(), 1) },
        FdStatus::InvalidParameter
    );
    assert_eq!(
        unsafe { fd_model_set_piecewise_cubic(m, ptr::null(), ys.as_ptr(), ptr::null(), 3) },
        FdStatus::NullPointer
    );
    unsafe { fd_model_free(m) };
}

fn crate_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn header_declares_every_entry_point() {
    let header = std::fs::read_to_string(crate_dir().join("include/floquet_delta.h")).unwrap();
    let src = std::fs::read_to_string(crate_dir().join("src/lib.rs")).unwrap();
    let exported: Vec<&str> = src
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .map(|rest| rest.split('(').next().unwrap())
        .collect();
    assert!(exported.len() >= 15);
    for name in exported {
        assert!(header.contains(&format!("{name}(")), "{name} missing from header");
    }
}

const C_PROGRAM: &str = r#"
#include <stdio.h>
#include "floquet_delta.h"

int main(void) {
    FdModel *m = NULL;
    if (fd_model_new(2.0, 0.1, FD_POTENTIAL_WELL, &m) != FD_STATUS_OK) return 10;
    double re = 0, im = 0;
    if (fd_wronskian(m, -0.3, -0.7, &re, &im) != FD_STATUS_OK) return 11;
    FdResonanceList *list = NULL;
    if (fd_find_resonances(m, &list) != FD_STATUS_OK) return 12;
    FdResonance r;
    if (fd_resonance_list_len(list) < 1 || fd_resonance_list_get(list, 0, &r) != FD_STATUS_OK) return 13;
    if (fd_model_set_sheet(m, "nonsense") != FD_STATUS_INVALID_PARAMETER) return 14;
    if (fd_last_error_message()[0] == '\0') return 15;
    printf("%.17g %.17g %.17g %.17g\n", re, im, r.z_re, r.z_im);
    fd_resonance_list_free(list);
    fd_model_free(m);
    return 0;
}
"#;

#[test]
fn c_program_links_against_the_static_library() {
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(|d| d.parent()).unwrap().to_path_buf();
    let lib = profile_dir.join("libfloquet_delta_ffi.a");
    if !lib.exists() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: static library or C compiler not available");
        return;
    }
    let work = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("c_api");
    std::fs::create_dir_all(&work).unwrap();
    let src = work.join("main.c");
    let bin = work.join("main");
    std::fs::write(&src, C_PROGRAM).unwrap();
    let status = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-o"])
        .arg(&bin)
        .arg(&src)
        .arg("-I")
        .arg(crate_dir().join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm"])
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    let vals: Vec<f64> = String::from_utf8(out.stdout)
        .unwrap()
        .split_whitespace()
        .map(|s| s.parse().unwrap())
        .collect();
    let params = ModelParams::well(2.0, 0.1).unwrap();
    let w = wronskian(Complex64::new(-0.3, -0.7), &params, &SheetConfig::usual()).unwrap().w;
    let z = find_resonances(&params, &SheetConfig::usual(), &FindOptions::default()).unwrap().resonances[0].z_star;
    assert_eq!(vals, vec![w.re, w.im, z.re, z.im]);
}
