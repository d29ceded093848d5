use std::ffi::CStr;
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use casbah_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(casbah_last_error()) }.to_string_lossy().into_owned()
}

fn small_options() -> CasbahFitOptions {
    CasbahFitOptions { truncation: 6, iterations: 120, burn_in: 40, seed: 11, ..casbah_fit_options_default() }
}

#[test]
fn version_is_package_version() {
    let v = unsafe { CStr::from_ptr(casbah_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn null_arguments_are_reported() {
    let status = unsafe { casbah_dataset_simulate(1, 10, 1, ptr::null_mut()) };
    assert_eq!(status, CasbahStatus::NullPointer);
    assert!(last_error().contains("null"));
    let mut out = 0.0;
    assert_eq!(unsafe { casbah_prior_dissociative_probability(0.5, 0.25, 2, ptr::null_mut()) }, CasbahStatus::NullPointer);
    assert_eq!(unsafe { casbah_prior_dissociative_probability(0.5, 0.25, 2, &mut out) }, CasbahStatus::Ok);
    assert_eq!(out, 0.3125);
    assert_eq!(unsafe { casbah_dataset_units(ptr::null()) }, 0);
    unsafe {
        casbah_dataset_free(ptr::null_mut());
        casbah_fit_free(ptr::null_mut());
    }
}

#[test]
fn invalid_inputs_map_to_status() {
    let mut out = 0.0;
    assert_eq!(unsafe { casbah_prior_dissociative_probability(0.5, 0.9, 2, &mut out) }, CasbahStatus::InvalidInput);
    assert!(last_error().contains("rho2"));
    let mut ds = ptr::null_mut();
    assert_eq!(unsafe { casbah_dataset_simulate(9, 10, 1, &mut ds) }, CasbahStatus::InvalidInput);
    assert!(ds.is_null());
    let t = [0u8, 2];
    let v = [0.0, 1.0];
    assert_eq!(
        unsafe { casbah_dataset_new(2, 0, ptr::null(), t.as_ptr(), v.as_ptr(), v.as_ptr(), &mut ds) },
        CasbahStatus::InvalidInput
    );
    assert!(last_error().contains("treated[1]"));
}

#[test]
fn ari_through_the_abi() {
    let a = [1, 1, 2, 2];
    let b = [1, 2, 1, 2];
    let mut out = 0.0;
    assert_eq!(unsafe { casbah_adjusted_rand_index(a.as_ptr(), b.as_ptr(), 4, &mut out) }, CasbahStatus::Ok);
    assert!((out + 0.5).abs() < 1e-12);
    assert_eq!(unsafe { casbah_adjusted_rand_index(a.as_ptr(), b.as_ptr(), 1, &mut out) }, CasbahStatus::InvalidInput);
}

#[test]
fn single_arm_dataset_cannot_be_fit() {
    let t = [1u8, 1, 1];
    let v = [0.0, 1.0, 2.0];
    let mut ds = ptr::null_mut();
    assert_eq!(unsafe { casbah_dataset_new(3, 0, ptr::null(), t.as_ptr(), v.as_ptr(), v.as_ptr(), &mut ds) }, CasbahStatus::Ok);
    let mut fit = ptr::null_mut();
    assert_eq!(unsafe { casbah_fit_run(ds, ptr::null(), &mut fit) }, CasbahStatus::InvalidInput);
    assert!(last_error().contains("both treatment arms"));
    unsafe { casbah_dataset_free(ds) };
}

#[test]
fn fit_round_trip() {
    let mut ds = ptr::null_mut();
    assert_eq!(unsafe { casbah_dataset_simulate(1, 60, 3, &mut ds) }, CasbahStatus::Ok);
    assert_eq!(unsafe { casbah_dataset_units(ds) }, 60);
    assert_eq!(unsafe { casbah_dataset_covariates(ds) }, 2);
    let opts = small_options();
    let mut fit = ptr::null_mut();
    assert_eq!(unsafe { casbah_fit_run(ds, &opts, &mut fit) }, CasbahStatus::Ok, "{}", last_error());
    assert_eq!(unsafe { casbah_fit_draws(fit) }, 80);

    let mut codes = vec![9i32; 60];
    assert_eq!(unsafe { casbah_fit_point_partition(fit, codes.as_mut_ptr(), 10) }, CasbahStatus::BufferTooSmall);
    assert_eq!(unsafe { casbah_fit_point_partition(fit, codes.as_mut_ptr(), 60) }, CasbahStatus::Ok);
    assert!(codes.iter().all(|c| (-1..=1).contains(c)));

    let mut probs = vec![0.0; 180];
    assert_eq!(unsafe { casbah_fit_stratum_probabilities(fit, probs.as_mut_ptr(), 180) }, CasbahStatus::Ok);
    for row in probs.chunks(3) {
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    let mut iv = CasbahInterval { present: -1, median: 0.0, lower: 0.0, upper: 0.0 };
    assert_eq!(unsafe { casbah_fit_effect(fit, 0, &mut iv) }, CasbahStatus::Ok);
    assert_eq!(iv.present, 1);
    assert!(iv.lower <= iv.median && iv.median <= iv.upper);
    assert_eq!(unsafe { casbah_fit_post_treatment_gap(fit, 1, &mut iv) }, CasbahStatus::Ok);
    assert_eq!(unsafe { casbah_fit_effect(fit, 5, &mut iv) }, CasbahStatus::InvalidInput);

    // Same seed, same partition.
    let mut again = ptr::null_mut();
    assert_eq!(unsafe { casbah_fit_run(ds, &opts, &mut again) }, CasbahStatus::Ok);
    let mut codes2 = vec![0i32; 60];
    assert_eq!(unsafe { casbah_fit_point_partition(again, codes2.as_mut_ptr(), 60) }, CasbahStatus::Ok);
    assert_eq!(codes, codes2);
    unsafe {
        casbah_fit_free(again);
        casbah_fit_free(fit);
        casbah_dataset_free(ds);
    }
}

fn target_dir() -> PathBuf {
    // tests run from target/<profile>/deps
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn header_compiles_and_links_from_c() {
    let header_dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include");
    let header = std::fs::read_to_string(header_dir.join("casbah.h")).unwrap();
    for sym in ["casbah_fit_run", "casbah_dataset_new", "CASBAH_STATUS_OK", "typedef struct CasbahFit CasbahFit"] {
        assert!(header.contains(sym), "header lacks {sym}");
    }
    let lib = target_dir().join("libcasbah_ffi.a");
    if Command::new("cc").arg("--version").output().is_err() || !lib.exists() {
        eprintln!("no C compiler or static library; link check not run");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(
        &src,
        r#"#include <stdio.h>
#include "casbah.h"
int main(void) {
    double p = 0.0;
    if (casbah_prior_dissociative_probability(0.5, 0.25, 2, &p) != CASBAH_STATUS_OK) return 1;
    if (p != 0.3125) return 2;
    CasbahDataset *ds = NULL;
    if (casbah_dataset_simulate(2, 40, 7, &ds) != CASBAH_STATUS_OK) return 3;
    if (casbah_dataset_units(ds) != 40) return 4;
    CasbahFitOptions o = casbah_fit_options_default();
    o.truncation = 5; o.iterations = 30; o.burn_in = 10;
    CasbahFit *fit = NULL;
    if (casbah_fit_run(ds, &o, &fit) != CASBAH_STATUS_OK) { fprintf(stderr, "%s\n", casbah_last_error()); return 5; }
    if (casbah_fit_draws(fit) != 20) return 6;
    casbah_fit_free(fit);
    casbah_dataset_free(ds);
    if (casbah_dataset_simulate(0, 4, 1, &ds) != CASBAH_STATUS_INVALID_INPUT) return 7;
    return 0;
}
"#,
    )
    .unwrap();
    let exe = dir.path().join("capi");
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(&header_dir)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success(), "C compile failed");
    let run = Command::new(&exe).status().unwrap();
    assert_eq!(run.code(), Some(0));
}
