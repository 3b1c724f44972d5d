use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use labelaudit::graph::write_graph;
use labelaudit::harness::sbm::{gen_sbm, SbmConfig};
use labelaudit_ffi::*;

fn dataset(dir: &Path) {
    let g = gen_sbm(&SbmConfig {
        n: 300,
        c: 3,
        p_in: 0.06,
        p_out: 0.004,
        seed: 4,
        ..SbmConfig::default()
    })
    .unwrap();
    write_graph(&g, dir).unwrap();
}

fn c(p: &Path) -> CString {
    CString::new(p.to_str().unwrap()).unwrap()
}

fn last_error() -> String {
    let p = la_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn audit_through_handles() {
    let dir = tempfile::tempdir().unwrap();
    dataset(dir.path());
    let d = dir.path();
    unsafe {
        let mut g = ptr::null_mut();
        let st = la_graph_load(
            c(&d.join("edges.txt")).as_ptr(),
            c(&d.join("labels.csv")).as_ptr(),
            c(&d.join("splits.csv")).as_ptr(),
            c(&d.join("features.csv")).as_ptr(),
            0,
            &mut g,
        );
        assert_eq!(st, LaStatus::Ok);
        assert_eq!(la_graph_num_nodes(g), 300);
        assert_eq!(la_graph_num_classes(g), 3);

        let mut p = ptr::null_mut();
        assert_eq!(la_softmax_train(g, 1, &mut p), LaStatus::Ok);
        let row: f64 = (0..3).map(|k| la_softmax_get(p, 0, k)).sum();
        assert!((row - 1.0).abs() < 1e-9);
        assert!(la_softmax_get(p, 300, 0).is_nan());

        let policy = CString::new("bayes:0.05").unwrap();
        let mut r = ptr::null_mut();
        assert_eq!(la_audit_run(g, p, 2, policy.as_ptr(), 9, &mut r), LaStatus::Ok);
        assert_eq!(la_report_len(r), 300);
        assert!((la_report_cutoff(r) - 0.95).abs() < 1e-12);
        let mut first = std::mem::zeroed::<LaRecord>();
        let mut second = std::mem::zeroed::<LaRecord>();
        assert_eq!(la_report_record(r, 0, &mut first), LaStatus::Ok);
        assert_eq!(la_report_record(r, 1, &mut second), LaStatus::Ok);
        assert!(first.score >= second.score);
        assert_eq!(first.flagged, first.suggested_label >= 0);
        assert_eq!(la_report_record(r, 300, &mut first), LaStatus::InvalidArgument);

        let out = d.join("report.json");
        assert_eq!(la_report_write_json(r, c(&out).as_ptr()), LaStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(la_report_load(c(&out).as_ptr(), &mut back), LaStatus::Ok);
        assert_eq!(la_report_len(back), 300);
        assert_eq!(la_report_num_flagged(back), la_report_num_flagged(r));

        la_report_free(back);
        la_report_free(r);
        la_softmax_free(p);
        la_graph_free(g);
    }
}

#[test]
fn errors_map_to_status_codes() {
    unsafe {
        let mut g = ptr::null_mut();
        let missing = CString::new("/definitely/missing.txt").unwrap();
        let st = la_graph_load(missing.as_ptr(), missing.as_ptr(), missing.as_ptr(), ptr::null(), 0, &mut g);
        assert_eq!(st, LaStatus::DataError);
        assert!(last_error().contains("missing"));
        assert!(g.is_null());

        let st = la_graph_load(ptr::null(), missing.as_ptr(), missing.as_ptr(), ptr::null(), 0, &mut g);
        assert_eq!(st, LaStatus::NullArgument);
        assert!(last_error().contains("edges"));

        let scores: Vec<f64> = (0..10).map(|i| i as f64 / 10.0).collect();
        let mut t = std::mem::zeroed::<LaConformal>();
        let st = la_conformal_threshold(scores.as_ptr(), 10, 0.2, 0.5, LaGuarantee::FalsePositive, &mut t);
        assert_eq!(st, LaStatus::Ok);
        assert_eq!((t.n_total, t.b_index), (10, 7));
        assert_eq!(t.lambda, 0.6);
        let st = la_conformal_threshold(scores.as_ptr(), 10, 0.3, 0.095, LaGuarantee::FalsePositive, &mut t);
        assert_eq!(st, LaStatus::Unattainable);
        let st = la_conformal_threshold(scores.as_ptr(), 10, 0.2, 1.5, LaGuarantee::FalseNegative, &mut t);
        assert_eq!(st, LaStatus::InvalidArgument);

        // null handles are tolerated by accessors and destructors
        assert_eq!(la_report_len(ptr::null()), 0);
        la_graph_free(ptr::null_mut());
    }
    let v = unsafe { CStr::from_ptr(la_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

/// Directory holding this build's library artifacts (`target/<profile>`).
fn artifact_dir() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

const C_PROGRAM: &str = r#"
#include <stdio.h>
#include "labelaudit.h"

int main(int argc, char **argv) {
    if (argc != 4) return 10;
    LaGraph *g = NULL;
    if (la_graph_load(argv[1], argv[2], argv[3], NULL, 0, &g) != LA_STATUS_OK) {
        fprintf(stderr, "%s\n", la_last_error());
        return 11;
    }
    double scores[10] = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
    LaConformal t;
    if (la_conformal_threshold(scores, 10, 0.2, 0.5, LA_GUARANTEE_FALSE_NEGATIVE, &t) != LA_STATUS_OK) return 12;
    LaStatus bad = la_conformal_threshold(scores, 10, 0.3, 0.095, LA_GUARANTEE_FALSE_POSITIVE, &t);
    printf("%zu %zu %zu %d\n", la_graph_num_nodes(g), la_graph_num_edges(g), t.b_index, (int)bad);
    la_graph_free(g);
    return 0;
}
"#;

#[test]
fn header_compiles_and_links_from_c() {
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    if Command::new(&cc).arg("--version").output().is_err() {
        eprintln!("no C compiler found; skipping");
        return;
    }
    let lib = artifact_dir().join("liblabelaudit_ffi.a");
    assert!(lib.exists(), "static library missing at {}", lib.display());
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(&src, C_PROGRAM).unwrap();
    let exe = dir.path().join("probe");
    let status = Command::new(&cc)
        .args(["-std=c11", "-Wall", "-Werror", "-o"])
        .arg(&exe)
        .arg(&src)
        .arg("-I")
        .arg(&include)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm"])
        .status()
        .unwrap();
    assert!(status.success(), "C compilation failed");

    std::fs::write(dir.path().join("e.txt"), "0 1\n1 2\n2 2\n").unwrap();
    std::fs::write(dir.path().join("l.csv"), "node_id,label\n0,0\n1,1\n2,0\n").unwrap();
    std::fs::write(dir.path().join("s.csv"), "node_id,split\n0,train\n1,val\n2,test\n").unwrap();
    let out = Command::new(&exe)
        .arg(dir.path().join("e.txt"))
        .arg(dir.path().join("l.csv"))
        .arg(dir.path().join("s.csv"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8_lossy(&out.stdout), "3 2 10 4\n");
}
