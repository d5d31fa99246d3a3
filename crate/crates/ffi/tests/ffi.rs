use std::ffi::CStr;
use std::path::Path;
use std::process::Command;
use std::ptr;

use sparsedepth_ffi::*;

fn last_error() -> String {
    let p = sd_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

/// Left half red at 2 m, right half blue at 6 m.
fn two_halves(w: usize, h: usize) -> (Vec<u8>, Vec<f64>) {
    let mut rgb = Vec::with_capacity(w * h * 3);
    let mut depth = Vec::with_capacity(w * h);
    for _y in 0..h {
        for x in 0..w {
            let left = x < w / 2;
            rgb.extend_from_slice(if left { &[200, 30, 30] } else { &[30, 30, 200] });
            depth.push(if left { 2.0 } else { 6.0 });
        }
    }
    (rgb, depth)
}

#[test]
fn pipeline_through_the_c_abi() {
    let (w, h) = (48, 32);
    let (rgb, depth) = two_halves(w, h);
    unsafe {
        let mut img = ptr::null_mut();
        assert_eq!(sd_image_new(w, h, rgb.as_ptr(), &mut img), SdStatus::Ok);
        let mut gt = ptr::null_mut();
        assert_eq!(sd_depth_new(w, h, depth.as_ptr(), ptr::null(), &mut gt), SdStatus::Ok);

        let mut seg = ptr::null_mut();
        assert_eq!(sd_slic(img, 24, 0.0, &mut seg), SdStatus::Ok);
        let k = sd_segments_count(seg);
        assert!(k > 4);
        let mut labels = vec![0u32; w * h];
        assert_eq!(sd_segments_copy_labels(seg, labels.as_mut_ptr(), labels.len()), SdStatus::Ok);
        assert!(labels.iter().all(|&l| (l as usize) < k));

        let mut pat = ptr::null_mut();
        assert_eq!(sd_pattern_com(seg, &mut pat), SdStatus::Ok);
        assert_eq!(sd_pattern_len(pat), k);
        let (mut xs, mut ys) = (vec![0usize; k], vec![0usize; k]);
        assert_eq!(sd_pattern_copy(pat, xs.as_mut_ptr(), ys.as_mut_ptr(), k), SdStatus::Ok);
        for (&x, &y) in xs.iter().zip(&ys) {
            assert!(x < w && y < h);
        }

        let mut samples = ptr::null_mut();
        assert_eq!(sd_execute(pat, gt, seg, &mut samples), SdStatus::Ok);
        assert_eq!(sd_samples_len(samples), k);
        let (mut x, mut y, mut d) = (0usize, 0usize, 0.0f64);
        assert_eq!(sd_samples_get(samples, 0, &mut x, &mut y, &mut d), SdStatus::Ok);
        assert_eq!(d, depth[y * w + x]);

        let mut lin = ptr::null_mut();
        assert_eq!(sd_reconstruct_bilinear(samples, &mut lin), SdStatus::Ok);

        let mut ours = ptr::null_mut();
        let mut used = ptr::null_mut();
        assert_eq!(sd_reconstruct_ours(img, gt, 24, SdScene::Outdoor, &mut ours, &mut used), SdStatus::Ok);
        assert_eq!(sd_samples_len(used), k);
        let (mut ow, mut oh) = (0, 0);
        assert_eq!(sd_depth_dims(ours, &mut ow, &mut oh), SdStatus::Ok);
        assert_eq!((ow, oh), (w, h));
        let mut out = vec![0.0; w * h];
        let mut valid = vec![0u8; w * h];
        assert_eq!(sd_depth_copy(ours, out.as_mut_ptr(), valid.as_mut_ptr(), out.len()), SdStatus::Ok);
        assert!(valid.iter().all(|&v| v == 1));
        assert!(out.iter().all(|&v| (2.0 - 1e-9..=6.0 + 1e-9).contains(&v)));

        let (mut e_ours, mut e_lin) = (f64::NAN, f64::NAN);
        assert_eq!(sd_rmse(gt, ours, &mut e_ours), SdStatus::Ok);
        assert_eq!(sd_rmse(gt, lin, &mut e_lin), SdStatus::Ok);
        assert!(e_ours < e_lin, "ours {e_ours} vs bilinear {e_lin}");

        sd_depth_free(ours);
        sd_samples_free(used);
        sd_depth_free(lin);
        sd_samples_free(samples);
        sd_pattern_free(pat);
        sd_segments_free(seg);
        sd_depth_free(gt);
        sd_image_free(img);
    }
}

#[test]
fn patterns_and_segments_from_labels() {
    unsafe {
        let mut g = ptr::null_mut();
        assert_eq!(sd_pattern_grid(40, 30, 12, &mut g), SdStatus::Ok);
        assert!(sd_pattern_len(g) > 0);
        let mut r1 = ptr::null_mut();
        let mut r2 = ptr::null_mut();
        assert_eq!(sd_pattern_random(40, 30, 50, 7, &mut r1), SdStatus::Ok);
        assert_eq!(sd_pattern_random(40, 30, 50, 7, &mut r2), SdStatus::Ok);
        let mut a = (vec![0; 50], vec![0; 50]);
        let mut b = (vec![0; 50], vec![0; 50]);
        assert_eq!(sd_pattern_copy(r1, a.0.as_mut_ptr(), a.1.as_mut_ptr(), 50), SdStatus::Ok);
        assert_eq!(sd_pattern_copy(r2, b.0.as_mut_ptr(), b.1.as_mut_ptr(), 50), SdStatus::Ok);
        assert_eq!(a, b);
        sd_pattern_free(g);
        sd_pattern_free(r1);
        sd_pattern_free(r2);

        // Label 1 appears in two disconnected places.
        let labels = [0u32, 0, 1, 0, 0, 0, 1, 0, 0];
        let mut seg = ptr::null_mut();
        assert_eq!(sd_segments_new(3, 3, labels.as_ptr(), &mut seg), SdStatus::Ok);
        assert_eq!(sd_segments_count(seg), 3);
        sd_segments_free(seg);
    }
}

#[test]
fn errors_set_status_and_message() {
    unsafe {
        let mut img = ptr::null_mut();
        assert_eq!(sd_image_new(4, 4, ptr::null(), &mut img), SdStatus::NullPointer);
        assert!(img.is_null());
        assert!(last_error().contains("rgb"));

        let rgb = [0u8; 4 * 4 * 3];
        assert_eq!(sd_image_new(4, 4, rgb.as_ptr(), ptr::null_mut()), SdStatus::NullPointer);
        assert_eq!(sd_image_new(0, 4, rgb.as_ptr(), &mut img), SdStatus::InvalidParameter);

        let neg = [-1.0f64; 16];
        let mut d = ptr::null_mut();
        assert_eq!(sd_depth_new(4, 4, neg.as_ptr(), ptr::null(), &mut d), SdStatus::InvalidData);
        assert!(last_error().contains("depth -1"), "{}", last_error());

        let mut p = ptr::null_mut();
        assert_eq!(sd_pattern_random(4, 4, 17, 0, &mut p), SdStatus::InvalidParameter);
        assert_eq!(sd_pattern_grid(4, 4, 0, &mut p), SdStatus::InvalidParameter);

        let a = [1.0f64; 16];
        let b = [1.0f64; 20];
        let (mut da, mut db) = (ptr::null_mut(), ptr::null_mut());
        assert_eq!(sd_depth_new(4, 4, a.as_ptr(), ptr::null(), &mut da), SdStatus::Ok);
        assert_eq!(sd_depth_new(5, 4, b.as_ptr(), ptr::null(), &mut db), SdStatus::Ok);
        let mut e = 0.0;
        assert_eq!(sd_rmse(da, db, &mut e), SdStatus::DimensionMismatch);
        let mut small = [0.0f64; 3];
        assert_eq!(sd_depth_copy(da, small.as_mut_ptr(), ptr::null_mut(), 3), SdStatus::BufferTooSmall);

        let invalid = [0u8; 16];
        let mut dv = ptr::null_mut();
        assert_eq!(sd_depth_new(4, 4, a.as_ptr(), invalid.as_ptr(), &mut dv), SdStatus::Ok);
        assert_eq!(sd_rmse(dv, da, &mut e), SdStatus::EmptySet);

        assert_eq!(sd_samples_get(ptr::null(), 0, ptr::null_mut(), ptr::null_mut(), ptr::null_mut()), SdStatus::NullPointer);
        assert_eq!(sd_samples_len(ptr::null()), 0);
        sd_depth_free(dv);
        sd_depth_free(da);
        sd_depth_free(db);
        sd_image_free(ptr::null_mut());
    }
}

#[test]
fn version_matches_crate() {
    let v = unsafe { CStr::from_ptr(sd_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

fn header() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("include/sparsedepth.h")
}

#[test]
fn header_declares_the_api() {
    let text = std::fs::read_to_string(header()).unwrap();
    for name in [
        "sd_version",
        "sd_last_error_message",
        "sd_image_new",
        "sd_depth_new",
        "sd_depth_copy",
        "sd_slic",
        "sd_segments_new",
        "sd_pattern_com",
        "sd_pattern_grid",
        "sd_pattern_random",
        "sd_execute",
        "sd_reconstruct_ours",
        "sd_reconstruct_bilinear",
        "sd_rmse",
        "typedef struct SdImage SdImage",
        "SD_STATUS_BUFFER_TOO_SMALL = 6",
    ] {
        assert!(text.contains(name), "{name} missing from header");
    }
}

/// Compiles a small C program against the header and the static library.
/// Skipped when no C compiler is on the PATH.
#[test]
fn c_program_links_and_runs() {
    let Ok(_) = Command::new("cc").arg("--version").output() else {
        eprintln!("no C compiler; skipping");
        return;
    };
    let exe = std::env::current_exe().unwrap();
    let deps = exe.parent().unwrap();
    let profile_dir = deps.parent().unwrap();
    let lib = profile_dir.join("libsparsedepth_ffi.a");
    if !lib.exists() {
        eprintln!("{} not built; skipping", lib.display());
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(
        &src,
        r#"
#include <stdio.h>
#include "sparsedepth.h"
int main(void) {
    enum { W = 16, H = 12 };
    uint8_t rgb[W * H * 3];
    double depth[W * H];
    for (int i = 0; i < W * H; i++) {
        int left = (i % W) < W / 2;
        rgb[3 * i] = left ? 220 : 20; rgb[3 * i + 1] = 40; rgb[3 * i + 2] = left ? 20 : 220;
        depth[i] = left ? 1.5 : 4.0;
    }
    SdImage *img = NULL; SdDepth *gt = NULL, *out = NULL;
    if (sd_image_new(W, H, rgb, &img) != SD_STATUS_OK) return 1;
    if (sd_depth_new(W, H, depth, NULL, &gt) != SD_STATUS_OK) return 2;
    if (sd_reconstruct_ours(img, gt, 8, SD_SCENE_INDOOR, &out, NULL) != SD_STATUS_OK) return 3;
    double e = -1.0;
    if (sd_rmse(gt, out, &e) != SD_STATUS_OK) return 4;
    if (sd_image_new(W, H, NULL, &img) != SD_STATUS_NULL_POINTER) return 5;
    if (sd_last_error_message() == NULL) return 6;
    printf("%s %.6f\n", sd_version(), e);
    sd_depth_free(out); sd_depth_free(gt); sd_image_free(img);
    return 0;
}
"#,
    )
    .unwrap();
    let bin = dir.path().join("main");
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(header().parent().unwrap())
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success(), "C compilation failed");
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "C program exited with {:?}", out.status);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with(env!("CARGO_PKG_VERSION")), "{text}");
}
