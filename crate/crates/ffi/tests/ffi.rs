use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use smallball_ffi::*;

fn last_error() -> String {
    let p = sb_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

unsafe fn unit_box(cells: usize) -> *mut SbDensity {
    let values = vec![1.0; cells];
    let mut out = ptr::null_mut();
    let status = sb_density_new(1, &-0.5, &0.5, &cells, values.as_ptr(), cells, &mut out);
    assert_eq!(status, SbStatus::Ok);
    out
}

#[test]
fn density_life_cycle() {
    unsafe {
        let f = unit_box(5);
        assert_eq!(sb_density_dim(f), 1);
        assert_eq!(sb_density_len(f), 5);
        let mut v = [0.0; 5];
        assert_eq!(sb_density_values(f, v.as_mut_ptr(), 5), SbStatus::Ok);
        assert_eq!(v, [1.0; 5]);
        assert_eq!(
            sb_density_values(f, v.as_mut_ptr(), 4),
            SbStatus::ShapeMismatch
        );
        let mut x = 0.0;
        assert_eq!(sb_density_integral(f, &mut x), SbStatus::Ok);
        assert!((x - 1.0).abs() < 1e-15);
        assert_eq!(sb_density_ess_sup(f, &mut x), SbStatus::Ok);
        assert_eq!(x, 1.0);
        sb_density_free(f);
        sb_density_free(ptr::null_mut());
    }
}

#[test]
fn file_round_trip_and_rearrangement() {
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("f.sbd").to_str().unwrap()).unwrap();
    unsafe {
        let mut f = ptr::null_mut();
        assert_eq!(
            sb_density_generate(2, 1.0, -1.0, 1.0, 9, 4, SbShape::MultiBump, &mut f),
            SbStatus::Ok
        );
        assert_eq!(sb_density_write(f, path.as_ptr()), SbStatus::Ok);
        let mut g = ptr::null_mut();
        assert_eq!(sb_density_read(path.as_ptr(), &mut g), SbStatus::Ok);
        let (mut a, mut b) = (vec![0.0; 81], vec![0.0; 81]);
        sb_density_values(f, a.as_mut_ptr(), 81);
        sb_density_values(g, b.as_mut_ptr(), 81);
        assert_eq!(a, b);

        let mut r = ptr::null_mut();
        assert_eq!(sb_density_rearrange(g, &mut r), SbStatus::Ok);
        let mut peak = 0.0;
        sb_density_ess_sup(r, &mut peak);
        sb_density_values(r, b.as_mut_ptr(), 81);
        assert_eq!(b[40], peak);
        for h in [f, g, r] {
            sb_density_free(h);
        }
    }
}

#[test]
fn small_ball_of_two_boxes() {
    unsafe {
        let u = unit_box(63);
        let fs = [u as *const SbDensity, u as *const SbDensity];
        let mut sum = ptr::null_mut();
        assert_eq!(sb_sum_density(fs.as_ptr(), 2, 1, &mut sum), SbStatus::Ok);
        let mut peak = 0.0;
        sb_density_ess_sup(sum, &mut peak);
        assert!((peak - 1.0).abs() < 0.02);

        let included: Vec<u8> = (0..125).map(|i| u8::from((31..94).contains(&i))).collect();
        let mut s = ptr::null_mut();
        let status = sb_mask_new(
            1,
            &(-125.0 / 126.0),
            &(125.0 / 126.0),
            &125,
            included.as_ptr(),
            125,
            &mut s,
        );
        assert_eq!(status, SbStatus::Ok);
        let mut p = 0.0;
        assert_eq!(sb_small_ball_prob(fs.as_ptr(), 2, s, &mut p), SbStatus::Ok);
        assert!((p - 0.75).abs() < 1e-3);
        sb_mask_free(s);
        sb_density_free(sum);
        sb_density_free(u);
    }
}

#[test]
fn bounds_and_radius() {
    let ks = [1.0, 1.0];
    let (mut value, mut budget) = (0.0, 0.0);
    unsafe {
        assert_eq!(
            sb_bound_density(1, ks.as_ptr(), 2, 1024, &mut value, &mut budget),
            SbStatus::Ok
        );
        assert!((value - 1.0).abs() <= budget + 1e-9);
        assert_eq!(
            sb_bound_prob(1, ks.as_ptr(), 2, 1.0, 1024, &mut value, &mut budget),
            SbStatus::Ok
        );
        assert!((value - 0.75).abs() <= budget + 1e-9);
        assert_eq!(
            sb_bound_prob(1, ks.as_ptr(), 2, 1.0, 2, &mut value, &mut budget),
            SbStatus::Precondition
        );
        let mut r = 0.0;
        assert_eq!(
            sb_ball_radius_for_volume(2, std::f64::consts::PI, &mut r),
            SbStatus::Ok
        );
        assert!((r - 1.0).abs() < 1e-14);
    }
}

#[test]
fn errors_are_reported() {
    unsafe {
        let mut out = ptr::null_mut();
        assert_eq!(
            sb_density_new(1, ptr::null(), &1.0, &2, [1.0, 1.0].as_ptr(), 2, &mut out),
            SbStatus::NullPointer
        );
        assert!(out.is_null());
        assert!(last_error().contains("lo"));
        let status = sb_density_new(1, &0.0, &1.0, &2, [1.0, 1.0].as_ptr(), 2, ptr::null_mut());
        assert_eq!(status, SbStatus::NullPointer);

        assert_eq!(
            sb_density_new(1, &0.0, &1.0, &2, [1.0, -1.0].as_ptr(), 2, &mut out),
            SbStatus::InvalidDensity
        );
        assert_eq!(
            sb_density_generate(1, 0.1, -1.0, 1.0, 8, 0, SbShape::RandomCells, &mut out),
            SbStatus::Infeasible
        );
        assert!(last_error().contains("infeasible"));

        let missing = CString::new("/nonexistent/f.sbd").unwrap();
        assert_eq!(sb_density_read(missing.as_ptr(), &mut out), SbStatus::Io);

        let f = {
            let mut f = ptr::null_mut();
            sb_density_new(1, &0.0, &1.0, &2, [1.0, 1.0].as_ptr(), 2, &mut f);
            f
        };
        let mut g = ptr::null_mut();
        assert_eq!(sb_density_rearrange(f, &mut g), SbStatus::NotOriginCentered);
        assert_eq!(
            sb_density_integral(ptr::null(), &mut 0.0),
            SbStatus::NullPointer
        );
        sb_density_free(f);
    }
}

#[test]
fn header_declares_every_export() {
    let header =
        std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/smallball.h"))
            .unwrap();
    for name in [
        "sb_last_error_message",
        "sb_density_new",
        "sb_density_generate",
        "sb_density_read",
        "sb_density_write",
        "sb_density_free",
        "sb_density_dim",
        "sb_density_len",
        "sb_density_values",
        "sb_density_integral",
        "sb_density_ess_sup",
        "sb_density_rearrange",
        "sb_sum_density",
        "sb_mask_new",
        "sb_mask_free",
        "sb_small_ball_prob",
        "sb_bound_prob",
        "sb_bound_density",
        "sb_ball_radius_for_volume",
        "typedef struct SbDensity SbDensity",
        "SB_STATUS_OK = 0",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
}

/// Compiles `tests/smoke.c` against the header and the static library.
#[test]
fn c_program_links_and_runs() {
    if Command::new("cc").arg("--version").output().is_err() {
        eprintln!("no C compiler on PATH; skipping");
        return;
    }
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(|p| p.parent()).unwrap();
    let lib = profile_dir.join("libsmallball_ffi.a");
    assert!(
        lib.exists(),
        "static library not found at {}",
        lib.display()
    );
    let dir = tempfile::tempdir().unwrap();
    let bin = dir.path().join("smoke");
    let compiled = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-I"])
        .arg(manifest.join("include"))
        .arg(manifest.join("tests/smoke.c"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .output()
        .unwrap();
    assert!(
        compiled.status.success(),
        "{}",
        String::from_utf8_lossy(&compiled.stderr)
    );
    let run = Command::new(&bin).output().unwrap();
    assert!(
        run.status.success(),
        "{}",
        String::from_utf8_lossy(&run.stderr)
    );
    assert_eq!(String::from_utf8_lossy(&run.stdout).trim(), "ok");
}
