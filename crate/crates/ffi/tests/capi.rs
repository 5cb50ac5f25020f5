use std::ffi::{CStr, CString};
use std::process::Command;
use std::ptr;

use predsearch_ffi::*;

fn last_error() -> String {
    let p = pred_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn build_keys(keys: &[u64], cfg: PredConfig) -> (PredStatus, *mut PredHandle) {
    let mut h = ptr::null_mut();
    let st = unsafe { pred_build(keys.as_ptr(), keys.len(), &cfg, &mut h) };
    (st, h)
}

fn query(h: *const PredHandle, x: u64) -> PredAnswer {
    let mut a = PredAnswer::default();
    assert_eq!(unsafe { pred_query(h, x, &mut a) }, PredStatus::Ok);
    a
}

#[test]
fn build_query_free() {
    let (st, h) = build_keys(&[3, 7, 9], pred_config_default(8, 64, 12));
    assert_eq!(st, PredStatus::Ok);
    assert!(!h.is_null());
    let a = query(h, 8);
    assert!(a.found);
    assert_eq!(a.key, 7);
    assert!(a.probes >= 1);
    assert!(!query(h, 2).found);
    assert_eq!(query(h, 255).key, 9);
    assert!(unsafe { pred_bits_used(h) } > 0);
    assert!((1..=4).contains(&unsafe { pred_branch(h) }));
    unsafe { pred_free(h) };
    unsafe { pred_free(ptr::null_mut()) };
}

#[test]
fn every_branch_matches_a_scan() {
    let keys: Vec<u64> = (0..500u64).map(|i| i * 131 + (i % 7)).collect();
    for branch in 1..=4u8 {
        let mut cfg = pred_config_default(16, 64, 8000);
        cfg.branch = branch;
        cfg.seed = 5;
        let (st, h) = build_keys(&keys, cfg);
        assert_eq!(st, PredStatus::Ok, "{}", last_error());
        assert_eq!(unsafe { pred_branch(h) }, branch);
        for x in 0..(1u64 << 16) {
            let want = keys.iter().rev().find(|&&k| k <= x);
            let got = query(h, x);
            assert_eq!(got.found, want.is_some(), "branch {branch} x={x}");
            if let Some(&k) = want {
                assert_eq!(got.key, k, "branch {branch} x={x}");
            }
        }
        unsafe { pred_free(h) };
    }
}

#[test]
fn errors_set_status_and_message() {
    let (st, h) = build_keys(&[5, 5], pred_config_default(8, 64, 8));
    assert_eq!(st, PredStatus::Ingest);
    assert!(h.is_null());
    assert!(last_error().contains("ingestion"), "{}", last_error());

    let (st, _) = build_keys(&[1, 2], pred_config_default(32, 16, 8));
    assert_eq!(st, PredStatus::Param);

    let mut cfg = pred_config_default(8, 64, 8);
    cfg.branch = 9;
    assert_eq!(build_keys(&[1], cfg).0, PredStatus::Param);

    let mut h = ptr::null_mut();
    assert_eq!(
        unsafe { pred_build(ptr::null(), 3, &cfg, &mut h) },
        PredStatus::NullPointer
    );
    assert_eq!(
        unsafe { pred_build(ptr::null(), 0, ptr::null(), &mut h) },
        PredStatus::NullPointer
    );
    assert!(last_error().contains("cfg"));

    let (_, h) = build_keys(&[1, 2], pred_config_default(8, 64, 8));
    let mut a = PredAnswer::default();
    assert_eq!(unsafe { pred_query(h, 256, &mut a) }, PredStatus::Param);
    assert_eq!(unsafe { pred_query(ptr::null(), 1, &mut a) }, PredStatus::NullPointer);
    assert_eq!(unsafe { pred_query(h, 1, ptr::null_mut()) }, PredStatus::NullPointer);
    unsafe { pred_free(h) };
}

#[test]
fn empty_set() {
    let cfg = pred_config_default(16, 64, 1);
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { pred_build(ptr::null(), 0, &cfg, &mut h) }, PredStatus::Ok);
    assert!(!query(h, 1000).found);
    assert_eq!(unsafe { pred_bits_used(h) }, 0);
    unsafe { pred_free(h) };
}

#[test]
fn save_and_load() {
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("s.pred").to_str().unwrap()).unwrap();
    let keys: Vec<u64> = (0..2000u64).map(|i| i * 2_000_003).collect();
    let mut cfg = pred_config_default(32, 64, 32_000);
    cfg.branch = 3;
    let (st, h) = build_keys(&keys, cfg);
    assert_eq!(st, PredStatus::Ok);
    assert_eq!(unsafe { pred_save(h, path.as_ptr()) }, PredStatus::Ok);
    let mut g = ptr::null_mut();
    assert_eq!(unsafe { pred_load(path.as_ptr(), &mut g) }, PredStatus::Ok);
    assert_eq!(unsafe { pred_bits_used(g) }, unsafe { pred_bits_used(h) });
    for x in (0..4_000_000_000u64).step_by(999_983) {
        assert_eq!(query(h, x), query(g, x));
    }
    unsafe {
        pred_free(h);
        pred_free(g);
    }

    let mut bytes = std::fs::read(dir.path().join("s.pred")).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 1;
    std::fs::write(dir.path().join("s.pred"), bytes).unwrap();
    let mut g = ptr::null_mut();
    assert_eq!(unsafe { pred_load(path.as_ptr(), &mut g) }, PredStatus::Integrity);
    assert!(g.is_null());
    let missing = CString::new(dir.path().join("none.pred").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { pred_load(missing.as_ptr(), &mut g) }, PredStatus::Io);
}

#[test]
fn tradeoff_values() {
    let mut t = PredTradeoff::default();
    assert_eq!(
        unsafe { pred_tradeoff(1 << 20, 64, 64, 1 << 26, &mut t) },
        PredStatus::Ok
    );
    assert_eq!(t.a, 14);
    assert_eq!(t.values, [3.0, 3.0, 1.5, 1.5]);
    assert_eq!(t.min, 1.5);
    assert_eq!(t.argmin, 3);
    assert_eq!(unsafe { pred_tradeoff(0, 64, 64, 1, &mut t) }, PredStatus::Param);
}

#[test]
fn errors_are_per_thread() {
    let (st, _) = build_keys(&[2, 1], pred_config_default(8, 64, 8));
    assert_eq!(st, PredStatus::Ingest);
    let other = std::thread::spawn(|| pred_last_error().is_null()).join().unwrap();
    assert!(other);
}

#[test]
fn header_compiles_as_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/predsearch.h");
    let text = std::fs::read_to_string(header).unwrap();
    for name in [
        "pred_build",
        "pred_query",
        "pred_save",
        "pred_load",
        "pred_free",
        "pred_last_error",
        "PRED_STATUS_INTEGRITY",
    ] {
        assert!(text.contains(name), "{name} missing from header");
    }
    let Ok(out) = Command::new("cc")
        .args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c", header])
        .output()
    else {
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn c_program_links_and_runs() {
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(|d| d.parent()).unwrap();
    let lib = profile_dir.join("libpredsearch_ffi.a");
    if !lib.exists() || Command::new("cc").arg("--version").output().is_err() {
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let bin = dir.path().join("smoke");
    let manifest = env!("CARGO_MANIFEST_DIR");
    let out = Command::new("cc")
        .arg(format!("{manifest}/tests/c/smoke.c"))
        .arg(format!("-I{manifest}/include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = Command::new(&bin).arg(dir.path().join("s.pred")).output().unwrap();
    assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stderr));
    assert!(String::from_utf8_lossy(&run.stdout).starts_with("bits="));
}
