use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use dpc_inpaint_ffi::*;

fn last_error() -> String {
    let p = dpc_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

/// A 30 x 30 grid patch shifted by `dx`.
fn patch(dx: f64) -> *mut DpcCloud {
    let xyz: Vec<f64> = (0..900)
        .flat_map(|k| [(k % 30) as f64 + dx, (k / 30) as f64, 0.0])
        .collect();
    let mut c = ptr::null_mut();
    assert_eq!(unsafe { dpc_cloud_new(xyz.as_ptr(), 900, &mut c) }, DpcStatus::Ok);
    c
}

#[test]
fn cloud_round_trip_through_ply() {
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("c.ply").to_str().unwrap()).unwrap();
    unsafe {
        let c = patch(0.25);
        assert_eq!(dpc_cloud_len(c), 900);
        assert_eq!(dpc_cloud_save_ply(c, path.as_ptr(), 0), DpcStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(dpc_cloud_load_ply(path.as_ptr(), &mut back), DpcStatus::Ok);
        let mut a = vec![0.0; 2700];
        let mut b = vec![0.0; 2700];
        assert_eq!(dpc_cloud_points(c, a.as_mut_ptr(), a.len()), DpcStatus::Ok);
        assert_eq!(dpc_cloud_points(back, b.as_mut_ptr(), b.len()), DpcStatus::Ok);
        assert_eq!(a, b);
        assert_eq!(dpc_cloud_points(c, a.as_mut_ptr(), 10), DpcStatus::BufferTooSmall);
        dpc_cloud_free(back);
        dpc_cloud_free(c);
    }
}

#[test]
fn errors_carry_status_and_message() {
    unsafe {
        let mut c = ptr::null_mut();
        let missing = CString::new("/nonexistent/dir/x.ply").unwrap();
        assert_eq!(dpc_cloud_load_ply(missing.as_ptr(), &mut c), DpcStatus::Io);
        assert!(c.is_null());
        assert!(last_error().contains("/nonexistent/dir/x.ply"));

        assert_eq!(dpc_cloud_new(ptr::null(), 3, &mut c), DpcStatus::NullPointer);
        let nan = [f64::NAN, 0.0, 0.0];
        assert_eq!(dpc_cloud_new(nan.as_ptr(), 1, &mut c), DpcStatus::InvalidArgument);

        let bad = CString::new("{\"icp_trim\": 2.0}").unwrap();
        let mut cfg = ptr::null_mut();
        assert_eq!(dpc_config_from_json(bad.as_ptr(), &mut cfg), DpcStatus::InvalidArgument);
        let broken = CString::new("{").unwrap();
        assert_eq!(dpc_config_from_json(broken.as_ptr(), &mut cfg), DpcStatus::Parse);

        let mut out = 0.0;
        assert_eq!(dpc_gpsnr(ptr::null(), ptr::null(), &mut out), DpcStatus::NullPointer);
        assert_eq!(dpc_sequence_len(ptr::null()), 0);
        dpc_cloud_free(ptr::null_mut());
        dpc_sequence_free(ptr::null_mut());
    }
}

#[test]
fn inpaint_a_translated_patch() {
    unsafe {
        let mut seq = ptr::null_mut();
        assert_eq!(dpc_sequence_new(&mut seq), DpcStatus::Ok);
        for t in 0..3 {
            let c = patch(0.5 * t as f64);
            assert_eq!(dpc_sequence_push(seq, c), DpcStatus::Ok);
            dpc_cloud_free(c);
        }
        assert_eq!(dpc_sequence_len(seq), 3);

        let (mut corrupted, mut mask) = (ptr::null_mut(), ptr::null_mut());
        assert_eq!(dpc_synthesize_holes(seq, 1, 3.5, 11, &mut corrupted, &mut mask), DpcStatus::Ok);
        assert!(dpc_mask_removed(mask) > 0);

        let mut cfg = ptr::null_mut();
        assert_eq!(dpc_config_default(&mut cfg), DpcStatus::Ok);
        assert_eq!(dpc_config_set_timing(cfg, 0), DpcStatus::Ok);
        assert_eq!(dpc_config_set_weights(cfg, 1.0, -1.0, 0.5), DpcStatus::InvalidArgument);
        assert_eq!(dpc_config_set_weights(cfg, 1.0, 0.5, 0.5), DpcStatus::Ok);

        let mut out = ptr::null_mut();
        let mut report = ptr::null_mut();
        assert_eq!(dpc_inpaint_sequence(corrupted, cfg, mask, &mut out, &mut report), DpcStatus::Ok);
        let text = CStr::from_ptr(report).to_str().unwrap().to_string();
        assert!(text.contains("\"frames\""));

        let (mut original, mut damaged, mut filled) = (ptr::null_mut(), ptr::null_mut(), ptr::null_mut());
        assert_eq!(dpc_sequence_frame(seq, 1, &mut original), DpcStatus::Ok);
        assert_eq!(dpc_sequence_frame(corrupted, 1, &mut damaged), DpcStatus::Ok);
        assert_eq!(dpc_sequence_frame(out, 1, &mut filled), DpcStatus::Ok);
        assert!(dpc_cloud_len(filled) > dpc_cloud_len(damaged));
        let (mut before, mut after) = (0.0, 0.0);
        assert_eq!(dpc_nshd(original, damaged, &mut before), DpcStatus::Ok);
        assert_eq!(dpc_nshd(original, filled, &mut after), DpcStatus::Ok);
        assert!(after < before, "{after} >= {before}");
        let mut none = ptr::null_mut();
        assert_eq!(dpc_sequence_frame(out, 9, &mut none), DpcStatus::InvalidArgument);

        dpc_string_free(report);
        for c in [original, damaged, filled] {
            dpc_cloud_free(c);
        }
        dpc_config_free(cfg);
        dpc_mask_free(mask);
        for s in [seq, corrupted, out] {
            dpc_sequence_free(s);
        }
    }
}

#[test]
fn version_is_the_package_version() {
    let v = unsafe { CStr::from_ptr(dpc_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

fn target_dir() -> PathBuf {
    // tests/ffi-<hash> lives in <target>/<profile>/deps
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

fn have_cc() -> bool {
    Command::new("cc").arg("--version").output().is_ok_and(|o| o.status.success())
}

#[test]
fn header_compiles_and_links_from_c() {
    let lib = target_dir().join("libdpc_inpaint_ffi.a");
    if !have_cc() || !lib.exists() {
        eprintln!("skipping: no C compiler or static library at {}", lib.display());
        return;
    }
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    std::fs::write(
        &src,
        r#"#include <stdio.h>
#include "dpc_inpaint.h"
int main(void) {
    double xyz[12] = {0, 0, 0, 1, 0, 0, 0, 1, 0, 1, 1, 0};
    DpcCloud *a = NULL;
    if (dpc_cloud_new(xyz, 4, &a) != DPC_STATUS_OK) return 1;
    double g = 0.0;
    if (dpc_nshd(a, a, &g) != DPC_STATUS_OK || g != 0.0) return 2;
    if (dpc_cloud_load_ply("/nonexistent.ply", &a) != DPC_STATUS_IO) return 3;
    if (dpc_last_error() == NULL) return 4;
    dpc_cloud_free(a);
    printf("%s\n", dpc_version());
    return 0;
}
"#,
    )
    .unwrap();
    let exe = dir.path().join("smoke");
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(&include)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success(), "C compile failed");
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "C smoke program exited with {:?}", out.status.code());
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), env!("CARGO_PKG_VERSION"));
}
