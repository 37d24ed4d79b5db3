use freetci_ffi::*;
use serde_json::Value;
use std::ffi::{c_char, CStr, CString};
use std::ptr;

fn parse(spec: &str) -> *mut FreetciPotential {
    let s = CString::new(spec).unwrap();
    let mut q = ptr::null_mut();
    assert_eq!(unsafe { freetci_potential_parse(s.as_ptr(), &mut q) }, FreetciStatus::Ok);
    assert!(!q.is_null());
    q
}

fn take_json(p: *mut c_char) -> Value {
    let v = serde_json::from_str(unsafe { CStr::from_ptr(p) }.to_str().unwrap()).unwrap();
    unsafe { freetci_string_free(p) };
    v
}

fn last_error() -> String {
    let p = freetci_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn equilibrium_round_trip() {
    let q = parse("quadratic");
    let mut mu = ptr::null_mut();
    assert_eq!(unsafe { freetci_equilibrium(q, 3.0, 600, &mut mu) }, FreetciStatus::Ok);
    let n = unsafe { freetci_measure_len(mu) };
    assert_eq!(n, 600);
    let (mut nodes, mut weights) = (vec![0.0; n], vec![0.0; n]);
    assert_eq!(unsafe { freetci_measure_copy(mu, nodes.as_mut_ptr(), weights.as_mut_ptr(), n) }, FreetciStatus::Ok);
    assert!((weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    let mean: f64 = nodes.iter().zip(&weights).map(|(x, w)| x * w).sum();
    assert!(mean.abs() < 1e-9);
    let mut sigma = 0.0;
    assert_eq!(unsafe { freetci_measure_log_energy(mu, &mut sigma) }, FreetciStatus::Ok);
    assert!((sigma + 0.25).abs() < 1e-3, "{sigma}");

    // The same weights rebuilt from C-side buffers give the same measure.
    let mut copy = ptr::null_mut();
    assert_eq!(unsafe { freetci_measure_from_weights(false, 3.0, weights.as_ptr(), n, &mut copy) }, FreetciStatus::Ok);
    let mut json = ptr::null_mut();
    assert_eq!(unsafe { freetci_tci_check(copy, q, 1.0, &mut json) }, FreetciStatus::Ok);
    let report = take_json(json);
    assert!(report["lhs"].as_f64().unwrap() < 1e-6);
    assert_eq!(report["verdict"], "holds_at_equality");

    unsafe {
        freetci_measure_free(copy);
        freetci_measure_free(mu);
        freetci_potential_free(q);
    }
}

#[test]
fn suites_and_pressure() {
    let q = parse("quadratic");
    let family = CString::new("shifted-semicircle").unwrap();
    let mut json = ptr::null_mut();
    assert_eq!(unsafe { freetci_tci_suite(family.as_ptr(), q, 1.0, &mut json) }, FreetciStatus::Ok);
    let reports = take_json(json);
    assert_eq!(reports.as_array().unwrap().len(), 9);

    let dims = [8usize, 16, 32];
    assert_eq!(unsafe { freetci_pressure(q, dims.as_ptr(), dims.len(), 3.0, 1, &mut json) }, FreetciStatus::Ok);
    let p = take_json(json);
    assert!((p["extrapolated"].as_f64().unwrap() - 0.918_938_533).abs() < 5e-2);

    let circle = parse("zero-circle");
    let trig = CString::new("trigonometric").unwrap();
    assert_eq!(unsafe { freetci_tci_suite(trig.as_ptr(), circle, 0.0, &mut json) }, FreetciStatus::Ok);
    for r in take_json(json).as_array().unwrap() {
        assert_eq!(r["verdict"], "holds", "{r}");
    }
    unsafe {
        freetci_potential_free(circle);
        freetci_potential_free(q);
    }
}

#[test]
fn errors_are_reported_not_raised() {
    let mut q = ptr::null_mut();
    let bad = CString::new("cubic").unwrap();
    assert_eq!(unsafe { freetci_potential_parse(bad.as_ptr(), &mut q) }, FreetciStatus::InvalidInput);
    assert!(q.is_null());
    assert!(last_error().contains("cubic"));

    assert_eq!(unsafe { freetci_potential_parse(ptr::null(), &mut q) }, FreetciStatus::NullPointer);
    let mut rho = 0.0;
    assert_eq!(unsafe { freetci_potential_rho(ptr::null(), &mut rho) }, FreetciStatus::NullPointer);

    let quartic = parse("quartic@0");
    let mut mu = ptr::null_mut();
    assert_eq!(unsafe { freetci_equilibrium(quartic, 3.0, 200, &mut mu) }, FreetciStatus::Ok);
    let mut json = ptr::null_mut();
    // rho must be positive on the line.
    assert_eq!(unsafe { freetci_tci_check(mu, quartic, 0.0, &mut json) }, FreetciStatus::InvalidInput);
    assert!(json.is_null());
    let mut small = [0.0; 3];
    assert_eq!(
        unsafe { freetci_measure_copy(mu, ptr::null_mut(), small.as_mut_ptr(), small.len()) },
        FreetciStatus::InvalidInput
    );
    let unknown = CString::new("gaussian").unwrap();
    assert_eq!(unsafe { freetci_tci_suite(unknown.as_ptr(), quartic, 1.0, &mut json) }, FreetciStatus::InvalidInput);

    unsafe {
        freetci_measure_free(mu);
        freetci_potential_free(quartic);
        freetci_measure_free(ptr::null_mut());
        freetci_string_free(ptr::null_mut());
    }
    assert_eq!(unsafe { freetci_measure_len(ptr::null()) }, 0);
    let v = unsafe { CStr::from_ptr(freetci_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

/// Compiles the C smoke program against the generated header and the
/// static library when a C compiler is available.
#[test]
fn c_program_links_and_runs() {
    let manifest = std::path::Path::new(env!("CARGO_MANIFEST_DIR"));
    let header_dir = manifest.join("include");
    assert!(header_dir.join("freetci.h").exists());
    // Test builds refresh the archive next to the test binary; the copy one
    // level up is only updated by `cargo build`.
    let exe = std::env::current_exe().unwrap();
    let lib = exe.parent().unwrap().join("libfreetci_ffi.a");
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    if !lib.exists() || std::process::Command::new(&cc).arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler or static library at {}", lib.display());
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let bin = dir.path().join("smoke");
    let status = std::process::Command::new(&cc)
        .arg(manifest.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(&header_dir)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success());
    let out = std::process::Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("400 -0.25"), "{text}");
    assert!(text.contains("\"verdict\":\"holds_at_equality\""), "{text}");
}
