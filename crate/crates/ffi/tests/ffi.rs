use std::ffi::CStr;
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use coversumm_ffi::*;

fn engine(dim: usize, k: usize) -> *mut CsEngine {
    let mut cfg = cs_config_default();
    cfg.k = k;
    cfg.c_max = 8 * k;
    let mut e = ptr::null_mut();
    assert_eq!(unsafe { cs_engine_new(dim, &cfg, &mut e) }, CsStatus::Ok);
    assert!(!e.is_null());
    e
}

fn summary(e: *mut CsEngine) -> (Vec<u64>, Vec<f64>) {
    let mut ids = vec![0u64; 64];
    let mut d = vec![0.0; 64];
    let mut n = 0;
    assert_eq!(unsafe { cs_engine_summary(e, ids.as_mut_ptr(), d.as_mut_ptr(), 64, &mut n) }, CsStatus::Ok);
    ids.truncate(n);
    d.truncate(n);
    (ids, d)
}

fn last_error() -> String {
    let p = cs_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn one_dimensional_example() {
    let e = engine(1, 2);
    for (i, x) in [0.0, 1.0, 3.0].iter().enumerate() {
        let mut searched = false;
        assert_eq!(unsafe { cs_engine_step(e, i as u64, x, 1, &mut searched) }, CsStatus::Ok);
        if i == 0 {
            assert!(searched);
        }
    }
    let (ids, d) = summary(e);
    assert_eq!(ids, vec![1, 0]);
    assert!((d[0] - 1.0 / 3.0).abs() < 1e-12 && (d[1] - 4.0 / 3.0).abs() < 1e-12);
    assert_eq!(unsafe { cs_engine_len(e) }, 3);
    assert!(unsafe { cs_engine_reservoir_searches(e) } >= 1);

    assert_eq!(unsafe { cs_engine_delete(e, [1u64].as_ptr(), 1) }, CsStatus::Ok);
    assert_eq!(summary(e).0, vec![0, 2]);
    unsafe { cs_engine_free(e) };
}

#[test]
fn error_codes() {
    let e = engine(2, 3);
    let v = [1.0, 2.0];
    assert_eq!(unsafe { cs_engine_step(e, 0, v.as_ptr(), 1, ptr::null_mut()) }, CsStatus::DimensionMismatch);
    assert!(last_error().contains("dimension"));
    assert_eq!(unsafe { cs_engine_step(e, 5, v.as_ptr(), 2, ptr::null_mut()) }, CsStatus::Ok);
    assert!(cs_last_error().is_null());
    assert_eq!(unsafe { cs_engine_step(e, 5, v.as_ptr(), 2, ptr::null_mut()) }, CsStatus::DuplicateId);
    assert_eq!(unsafe { cs_engine_delete(e, [9u64].as_ptr(), 1) }, CsStatus::NotFound);
    assert_eq!(unsafe { cs_engine_step(ptr::null_mut(), 6, v.as_ptr(), 2, ptr::null_mut()) }, CsStatus::NullPointer);
    assert_eq!(unsafe { cs_engine_step(e, 6, ptr::null(), 2, ptr::null_mut()) }, CsStatus::NullPointer);

    let mut n = 0;
    let mut id = 0u64;
    assert_eq!(unsafe { cs_engine_summary(e, &mut id, ptr::null_mut(), 0, &mut n) }, CsStatus::BufferTooSmall);
    assert_eq!(n, 1);

    let mut bad = cs_config_default();
    bad.k = 0;
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { cs_engine_new(2, &bad, &mut out) }, CsStatus::InvalidArgument);
    assert!(out.is_null());
    assert_eq!(unsafe { cs_engine_new(2, ptr::null(), ptr::null_mut()) }, CsStatus::NullPointer);
    unsafe {
        cs_engine_free(e);
        cs_engine_free(ptr::null_mut());
    }
}

#[test]
fn matches_native_engine() {
    use coversumm::{CoverSumm, EngineConfig, Point};
    let mut native = CoverSumm::new(3, EngineConfig::with_k(4)).unwrap();
    let e = engine(3, 4);
    let mut x = 0.37f64;
    for id in 0..500u64 {
        let v: Vec<f64> = (0..3)
            .map(|_| {
                x = (x * 3.9 * (1.0 - x)).clamp(1e-9, 1.0 - 1e-9);
                x - 0.5
            })
            .collect();
        let want = native.step(&Point::new(id, v.clone())).unwrap().summary;
        assert_eq!(unsafe { cs_engine_step(e, id, v.as_ptr(), 3, ptr::null_mut()) }, CsStatus::Ok);
        assert_eq!(summary(e), (want.member_ids, want.distances));
    }
    unsafe { cs_engine_free(e) };
}

#[test]
fn c_program_links_against_header() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    // the test binary lives in target/<profile>/deps; the static library one level up
    let exe = std::env::current_exe().unwrap();
    let lib_dir = exe.parent().unwrap().parent().unwrap().to_path_buf();
    let archive = lib_dir.join("libcoversumm_ffi.a");
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    if !archive.exists() || Command::new(&cc).arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler or static library");
        return;
    }
    let out = tempfile_path("c_api");
    let status = Command::new(&cc)
        .arg(manifest.join("tests/c_api.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&archive)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let run = Command::new(&out).output().unwrap();
    assert!(run.status.success(), "exit {:?}", run.status.code());
    assert_eq!(String::from_utf8_lossy(&run.stdout).trim(), "1 0");
    let _ = std::fs::remove_file(out);
}

fn tempfile_path(stem: &str) -> PathBuf {
    std::env::temp_dir().join(format!("{stem}-{}", std::process::id()))
}
