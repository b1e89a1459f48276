use std::ffi::{c_char, CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use itemdiff_ffi::*;

fn last_error() -> String {
    let p = itemdiff_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn owned(p: *mut c_char) -> String {
    let s = unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned();
    unsafe { itemdiff_string_free(p) };
    s
}

#[test]
fn scale_roundtrip_and_anchors() {
    let name = CString::new("nwea2020-spring").unwrap();
    let mut scale = ptr::null_mut();
    unsafe {
        assert_eq!(itemdiff_scale_builtin(name.as_ptr(), &mut scale), ItemdiffStatus::Ok);
        let (mut b, mut p) = (0.0, 0.0);
        assert_eq!(itemdiff_scale_rescale(scale, 0.6, 8, 2021, &mut b), ItemdiffStatus::Ok);
        assert!((b + 1.69).abs() < 1e-9);
        assert_eq!(itemdiff_scale_invert(scale, b, 8, 2021, &mut p), ItemdiffStatus::Ok);
        assert!((p - 0.6).abs() < 1e-12);

        let mut moved = ptr::null_mut();
        assert_eq!(
            itemdiff_scale_with_anchors(scale, 3, 1.0, 8, -1.0, 0.5, &mut moved),
            ItemdiffStatus::Ok
        );
        assert_eq!(itemdiff_scale_rescale(moved, 0.5, 3, 2021, &mut b), ItemdiffStatus::Ok);
        assert!((b - 1.0).abs() < 1e-9);
        itemdiff_scale_free(moved);

        assert_eq!(itemdiff_scale_rescale(scale, 0.6, 12, 2021, &mut b), ItemdiffStatus::Scale);
        assert!(last_error().contains("12"), "{}", last_error());
        itemdiff_scale_free(scale);
    }
}

#[test]
fn composite_rejects_anchors() {
    let name = CString::new(itemdiff::scale::builtin::NWEA_MIXED).unwrap();
    let mut scale = ptr::null_mut();
    let mut out = ptr::null_mut();
    unsafe {
        assert_eq!(itemdiff_scale_builtin(name.as_ptr(), &mut scale), ItemdiffStatus::Ok);
        assert_eq!(
            itemdiff_scale_with_anchors(scale, 3, 0.3, 8, -1.69, 0.6, &mut out),
            ItemdiffStatus::InvalidArgument
        );
        assert!(out.is_null());
        itemdiff_scale_free(scale);
    }
}

#[test]
fn bad_arguments() {
    let mut scale = ptr::null_mut();
    unsafe {
        assert_eq!(itemdiff_scale_builtin(ptr::null(), &mut scale), ItemdiffStatus::NullPointer);
        let bad = [0xffu8, 0];
        assert_eq!(itemdiff_scale_builtin(bad.as_ptr().cast(), &mut scale), ItemdiffStatus::InvalidUtf8);
        let unknown = CString::new("nope").unwrap();
        assert_eq!(itemdiff_scale_builtin(unknown.as_ptr(), &mut scale), ItemdiffStatus::Scale);
        assert!(scale.is_null());
        let json = CString::new("{\"name\": 1}").unwrap();
        assert_eq!(itemdiff_scale_from_json(json.as_ptr(), &mut scale), ItemdiffStatus::Scale);
        let mut v = 0.0;
        assert_eq!(itemdiff_scale_rescale(ptr::null(), 0.5, 3, 2020, &mut v), ItemdiffStatus::NullPointer);
        // freeing NULL is a no-op
        itemdiff_scale_free(ptr::null_mut());
        itemdiff_ridge_free(ptr::null_mut());
        itemdiff_string_free(ptr::null_mut());
        assert_eq!(itemdiff_ridge_n_features(ptr::null()), 0);
    }
}

#[test]
fn errors_are_per_thread() {
    let mut s = ptr::null_mut();
    unsafe { itemdiff_scale_builtin(ptr::null(), &mut s) };
    std::thread::spawn(|| assert!(itemdiff_last_error_message().is_null()))
        .join()
        .unwrap();
    assert!(last_error().contains("name"));
}

#[test]
fn ridge_and_pca() {
    // y = 2 + x0 - 3 x1, no noise
    let x: Vec<f64> = (0..20).flat_map(|i| [i as f64, ((i * 7) % 5) as f64]).collect();
    let y: Vec<f64> = x.chunks(2).map(|r| 2.0 + r[0] - 3.0 * r[1]).collect();
    let mut m = ptr::null_mut();
    unsafe {
        assert_eq!(itemdiff_ridge_fit(x.as_ptr(), 20, 2, y.as_ptr(), 0.0, &mut m), ItemdiffStatus::Ok);
        assert_eq!(itemdiff_ridge_n_features(m), 2);
        let mut pred = vec![0.0; 20];
        assert_eq!(itemdiff_ridge_predict(m, x.as_ptr(), 20, 2, pred.as_mut_ptr()), ItemdiffStatus::Ok);
        for (a, b) in pred.iter().zip(&y) {
            assert!((a - b).abs() < 1e-9);
        }
        assert_eq!(itemdiff_ridge_predict(m, x.as_ptr(), 10, 4, pred.as_mut_ptr()), ItemdiffStatus::Numerics);
        let mut json = ptr::null_mut();
        assert_eq!(itemdiff_ridge_to_json(m, &mut json), ItemdiffStatus::Ok);
        let parsed: itemdiff::numerics::RidgeModel = serde_json::from_str(&owned(json)).unwrap();
        assert_eq!(parsed.lambda, 0.0);
        itemdiff_ridge_free(m);

        let mut m = ptr::null_mut();
        assert_eq!(
            itemdiff_ridge_fit(x.as_ptr(), 20, 2, y.as_ptr(), -1.0, &mut m),
            ItemdiffStatus::Numerics
        );

        let mut pca = ptr::null_mut();
        assert_eq!(itemdiff_pca_fit(x.as_ptr(), 20, 2, 0.8, &mut pca), ItemdiffStatus::Ok);
        let k = itemdiff_pca_k(pca);
        assert!((1..=2).contains(&k));
        let mut ratios = [0.0; 1];
        let mut written = 0;
        assert_eq!(
            itemdiff_pca_explained_variance_ratio(pca, ratios.as_mut_ptr(), 1, &mut written),
            ItemdiffStatus::BufferTooSmall
        );
        assert_eq!(written, 2);
        let mut ratios = [0.0; 2];
        assert_eq!(
            itemdiff_pca_explained_variance_ratio(pca, ratios.as_mut_ptr(), 2, &mut written),
            ItemdiffStatus::Ok
        );
        assert!((ratios.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let mut scores = vec![0.0; 20 * k];
        assert_eq!(itemdiff_pca_transform(pca, x.as_ptr(), 20, 2, scores.as_mut_ptr()), ItemdiffStatus::Ok);
        // scores are centered
        assert!(scores.iter().step_by(k).sum::<f64>().abs() < 1e-9);
        itemdiff_pca_free(pca);
    }
}

#[test]
fn run_through_config_handle() {
    let dir = tempfile::tempdir().unwrap();
    let synth = itemdiff::synth::generate(&itemdiff::synth::SynthConfig {
        n_items: 60,
        embedding_dim: 4,
        ..Default::default()
    })
    .unwrap();
    let files = synth.write(dir.path()).unwrap();
    let path = CString::new(files.config.to_str().unwrap()).unwrap();
    let mut cfg = ptr::null_mut();
    unsafe {
        assert_eq!(itemdiff_config_load(path.as_ptr(), &mut cfg), ItemdiffStatus::Ok);
        let mut fp = ptr::null_mut();
        assert_eq!(itemdiff_config_fingerprint(cfg, &mut fp), ItemdiffStatus::Ok);
        assert_eq!(owned(fp).len(), 64);
        let mut json = ptr::null_mut();
        assert_eq!(itemdiff_run_grid(cfg, &mut json), ItemdiffStatus::Ok);
        let reports: serde_json::Value = serde_json::from_str(&owned(json)).unwrap();
        assert_eq!(reports.as_array().unwrap().len(), 4);
        itemdiff_config_free(cfg);

        let missing = CString::new(dir.path().join("nope.json").to_str().unwrap()).unwrap();
        assert_eq!(itemdiff_config_load(missing.as_ptr(), &mut cfg), ItemdiffStatus::Io);
    }
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/itemdiff.h")).unwrap();
    let src = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/src/lib.rs")).unwrap();
    let exports: Vec<&str> = src
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .map(|rest| rest.split('(').next().unwrap())
        .collect();
    assert!(exports.len() > 15);
    for name in exports {
        assert!(header.contains(&format!("{name}(")), "{name} missing from header");
    }
    assert!(header.contains("typedef struct ItemdiffScale ItemdiffScale;"));
}

/// Compiles the C smoke program against the generated header and the static
/// library and runs it.
#[test]
fn c_program_links_and_runs() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let exe = std::env::current_exe().unwrap();
    let target_dir = exe.parent().unwrap().parent().unwrap();
    let lib = target_dir.join("libitemdiff_ffi.a");
    assert!(lib.exists(), "{} not built", lib.display());
    let out = tempfile::tempdir().unwrap();
    let bin = out.path().join("smoke");
    let status = Command::new("cc")
        .arg(manifest.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&bin)
        .status()
        .expect("a C compiler on PATH");
    assert!(status.success());
    let run = Command::new(&bin).output().unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    assert!(String::from_utf8_lossy(&run.stdout).starts_with("ok 0.1.0"));
}
