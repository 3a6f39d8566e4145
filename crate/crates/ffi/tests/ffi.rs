use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use clusterretri_ffi::*;

fn matrix(rows: usize, dims: usize, f: impl Fn(usize, usize) -> f32) -> *mut CrMatrix {
    let data: Vec<f32> = (0..rows * dims).map(|i| f(i / dims, i % dims)).collect();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { cr_matrix_new(rows, dims, data.as_ptr(), &mut m) }, CrStatus::Ok);
    m
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(cr_last_error()) }.to_string_lossy().into_owned()
}

fn gallery() -> *mut CrMatrix {
    matrix(40, 8, |i, j| ((i * 31 + j * 17) % 23) as f32 / 7.0 + (i % 4) as f32 * 3.0)
}

#[test]
fn matrix_roundtrip_and_errors() {
    let m = matrix(3, 2, |i, j| (i * 2 + j) as f32);
    unsafe {
        assert_eq!(cr_matrix_rows(m), 3);
        assert_eq!(cr_matrix_dims(m), 2);
        let mut buf = [0f32; 6];
        assert_eq!(cr_matrix_copy(m, buf.as_mut_ptr(), 6), CrStatus::Ok);
        assert_eq!(buf, [0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(cr_matrix_copy(m, buf.as_mut_ptr(), 5), CrStatus::InvalidArgument);

        let dir = tempfile::tempdir().unwrap();
        let path = CString::new(dir.path().join("m.crft").to_str().unwrap()).unwrap();
        assert_eq!(cr_matrix_save(m, path.as_ptr()), CrStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(cr_matrix_load(path.as_ptr(), &mut back), CrStatus::Ok);
        let mut buf2 = [0f32; 6];
        cr_matrix_copy(back, buf2.as_mut_ptr(), 6);
        assert_eq!(buf, buf2);
        cr_matrix_free(back);
        cr_matrix_free(m);

        let missing = CString::new("/nonexistent/x.crft").unwrap();
        let mut out = ptr::null_mut();
        assert_eq!(cr_matrix_load(missing.as_ptr(), &mut out), CrStatus::Io);
        assert!(out.is_null());
        assert!(last_error().contains("nonexistent"));

        let nan = [f32::NAN];
        assert_eq!(cr_matrix_new(1, 1, nan.as_ptr(), &mut out), CrStatus::Numeric);
        assert_eq!(cr_matrix_new(1, 1, ptr::null(), &mut out), CrStatus::NullPointer);
        assert_eq!(cr_matrix_rows(ptr::null()), 0);
        cr_matrix_free(ptr::null_mut());
    }
}

#[test]
fn adc_matches_exact_on_reconstruction() {
    let g = gallery();
    unsafe {
        let mut cb = ptr::null_mut();
        assert_eq!(cr_codebook_fit(g, 4, 2, 0, 3, &mut cb), CrStatus::Ok);
        assert_eq!(cr_codebook_k(cb), 4);
        assert_eq!(cr_codebook_subspaces(cb), 2);
        let mut codes = ptr::null_mut();
        assert_eq!(cr_codes_encode(cb, g, &mut codes), CrStatus::Ok);
        let mut recon = ptr::null_mut();
        assert_eq!(cr_fuse(g, cb, 0.0, &mut recon), CrStatus::Ok);

        let q = [1.0f32, 2.0, 0.5, 3.0, 1.0, 0.0, 2.0, 4.0];
        let (mut o1, mut o2) = ([0u32; 40], [0u32; 40]);
        let (mut d1, mut d2) = ([0f64; 40], [0f64; 40]);
        assert_eq!(cr_rank_adc(q.as_ptr(), 8, cb, codes, o1.as_mut_ptr(), d1.as_mut_ptr(), 40), CrStatus::Ok);
        assert_eq!(cr_rank_exact(q.as_ptr(), 8, recon, o2.as_mut_ptr(), d2.as_mut_ptr(), 40), CrStatus::Ok);
        for i in 0..40 {
            assert!((d1[i] - d2[i]).abs() <= 1e-4 * d2[i].max(1.0));
        }
        let mut sorted = o1.to_vec();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..40).collect::<Vec<u32>>());

        assert_eq!(cr_rank_exact(q.as_ptr(), 7, recon, o2.as_mut_ptr(), ptr::null_mut(), 40), CrStatus::Shape);
        assert_eq!(cr_rank_exact(q.as_ptr(), 8, recon, o2.as_mut_ptr(), ptr::null_mut(), 39), CrStatus::InvalidArgument);

        let mut bad = ptr::null_mut();
        assert_eq!(cr_codebook_fit(g, 4, 3, 0, 3, &mut bad), CrStatus::InvalidArgument);
        assert!(last_error().contains("divisible"));

        cr_matrix_free(recon);
        cr_codes_free(codes);
        cr_codebook_free(cb);
        cr_matrix_free(g);
    }
}

#[test]
fn itq_codes_and_hamming() {
    let g = gallery();
    unsafe {
        let mut model = ptr::null_mut();
        assert_eq!(cr_itq_fit(g, 8, 20, 1, &mut model), CrStatus::Ok);
        assert_eq!(cr_itq_bits(model), 8);
        let mut codes = ptr::null_mut();
        assert_eq!(cr_itq_encode(model, g, &mut codes), CrStatus::Ok);
        assert_eq!(cr_bits_words_per_row(codes), 1);
        let mut words = [0u64; 40];
        assert_eq!(cr_bits_copy(codes, words.as_mut_ptr(), 40), CrStatus::Ok);
        assert!(words.iter().all(|w| w >> 8 == 0));

        let mut order = [0u32; 40];
        let mut dist = [0f64; 40];
        assert_eq!(cr_rank_hamming(codes, 5, codes, order.as_mut_ptr(), dist.as_mut_ptr(), 40), CrStatus::Ok);
        assert_eq!(dist[0], 0.0);
        assert!(dist.windows(2).all(|w| w[0] <= w[1]));
        let self_pos = order.iter().position(|&o| o == 5).unwrap();
        assert_eq!(dist[self_pos], 0.0);
        assert_eq!(cr_rank_hamming(codes, 40, codes, order.as_mut_ptr(), ptr::null_mut(), 40), CrStatus::InvalidArgument);

        let dir = tempfile::tempdir().unwrap();
        let path = CString::new(dir.path().join("m.criq").to_str().unwrap()).unwrap();
        assert_eq!(cr_itq_save(model, path.as_ptr()), CrStatus::Ok);
        let mut loaded = ptr::null_mut();
        assert_eq!(cr_itq_load(path.as_ptr(), &mut loaded), CrStatus::Ok);
        let mut codes2 = ptr::null_mut();
        cr_itq_encode(loaded, g, &mut codes2);
        let mut words2 = [0u64; 40];
        cr_bits_copy(codes2, words2.as_mut_ptr(), 40);
        assert_eq!(words, words2);

        let mut too_many = ptr::null_mut();
        assert_eq!(cr_itq_fit(g, 9, 5, 1, &mut too_many), CrStatus::InvalidArgument);

        for c in [codes, codes2] {
            cr_bits_free(c);
        }
        cr_itq_free(model);
        cr_itq_free(loaded);
        cr_matrix_free(g);
    }
}

fn target_dir() -> PathBuf {
    // tests run from <target>/<profile>/deps
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_owned()
}

#[test]
fn c_program_links_against_header() {
    let header_dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include");
    let target = target_dir();
    // test builds only produce the rlib; build the static library explicitly
    let mut build = Command::new(env!("CARGO"));
    build.args(["build", "--lib", "-p", "clusterretri-ffi"]);
    if target.ends_with("release") {
        build.arg("--release");
    }
    assert!(build.status().unwrap().success());
    let lib = target.join("libclusterretri_ffi.a");
    assert!(header_dir.join("clusterretri.h").exists());
    assert!(lib.exists(), "static library missing at {}", lib.display());

    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(
        &src,
        r#"
#include <stdio.h>
#include "clusterretri.h"

int main(void) {
    float data[12] = {0, 0, 0, 1, 5, 5, 5, 6, 9, 9, 9, 10};
    CrMatrix *g = NULL;
    if (cr_matrix_new(6, 2, data, &g) != CR_STATUS_OK) return 10;
    float q[2] = {5, 5.2f};
    uint32_t order[6];
    double dist[6];
    if (cr_rank_exact(q, 2, g, order, dist, 6) != CR_STATUS_OK) return 11;
    if (order[0] != 2 || order[1] != 3) return 12;
    CrCodebook *cb = NULL;
    if (cr_codebook_fit(g, 3, 3, 0, 0, &cb) != CR_STATUS_INVALID_ARGUMENT) return 13;
    if (cr_last_error() == NULL) return 14;
    cr_matrix_free(g);
    printf("ok\n");
    return 0;
}
"#,
    )
    .unwrap();
    let exe = dir.path().join("main");
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let status = Command::new(cc)
        .arg(&src)
        .arg("-I")
        .arg(&header_dir)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .expect("C compiler available");
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8_lossy(&out.stdout), "ok\n");
}
