use std::ffi::{c_char, CStr, CString};
use std::ptr;

use photon_recon::quadrature::{response_matrix, BinGrid};
use photon_recon_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 512];
    unsafe {
        pr_last_error_message(buf.as_mut_ptr(), buf.len());
        CStr::from_ptr(buf.as_ptr()).to_string_lossy().into_owned()
    }
}

fn standard_response(n_max: i32) -> *mut PrResponse {
    let mut h = ptr::null_mut();
    let s = unsafe { pr_response_new(-5.0, 5.0, 100, PrOverflow::Include, n_max, 0.85, &mut h) };
    assert_eq!(s, PrStatus::Ok, "{}", last_error());
    h
}

#[test]
fn density_and_negative_photon_numbers() {
    let mut d = 0.0;
    assert_eq!(unsafe { pr_fock_loss_density(0, 1.0, 0.0, &mut d) }, PrStatus::Ok);
    assert!((d - 1.0 / std::f64::consts::PI.sqrt()).abs() < 1e-15);
    assert_eq!(unsafe { pr_fock_loss_density(-3, 0.5, 0.0, &mut d) }, PrStatus::Domain);
    assert!(last_error().contains("-3"));
    assert_eq!(unsafe { pr_fock_loss_density(1, 0.0, 0.0, &mut d) }, PrStatus::Domain);
    assert_eq!(unsafe { pr_fock_loss_density(1, 0.5, 0.0, ptr::null_mut()) }, PrStatus::NullPointer);
}

#[test]
fn response_handle_matches_the_library() {
    let h = standard_response(6);
    let (mut rows, mut cols) = (0, 0);
    assert_eq!(unsafe { pr_response_dims(h, &mut rows, &mut cols) }, PrStatus::Ok);
    assert_eq!((rows, cols), (102, 7));
    let mut buf = vec![0.0; rows * cols];
    assert_eq!(unsafe { pr_response_copy_entries(h, buf.as_mut_ptr(), buf.len()) }, PrStatus::Ok);
    let a = response_matrix(&BinGrid::standard(), 6, 0.85).unwrap();
    for r in 0..rows {
        assert_eq!(&buf[r * cols..(r + 1) * cols], a.row(r));
    }
    assert_eq!(unsafe { pr_response_copy_entries(h, buf.as_mut_ptr(), buf.len() - 1) }, PrStatus::BufferSize);
    unsafe { pr_response_free(h) };
    unsafe { pr_response_free(ptr::null_mut()) };
}

#[test]
fn constructor_errors() {
    let mut h = ptr::null_mut();
    let s = unsafe { pr_response_new(-5.0, 5.0, 100, PrOverflow::Include, -1, 0.85, &mut h) };
    assert_eq!(s, PrStatus::Domain);
    assert!(h.is_null());
    let s = unsafe { pr_response_new(5.0, -5.0, 100, PrOverflow::Include, 3, 0.85, &mut h) };
    assert_eq!(s, PrStatus::Validation, "{}", last_error());
    let s = unsafe { pr_response_new(-5.0, 5.0, 100, PrOverflow::Discard, 3, 1.5, &mut h) };
    assert_eq!(s, PrStatus::Domain);
    let mut dims = 0;
    assert_eq!(unsafe { pr_response_dims(ptr::null(), &mut dims, &mut dims) }, PrStatus::NullPointer);
}

#[test]
fn reads_files_written_by_the_library() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.json");
    response_matrix(&BinGrid::standard(), 3, 0.85).unwrap().write_file(&path).unwrap();
    let c = CString::new(path.to_str().unwrap()).unwrap();
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { pr_response_read(c.as_ptr(), &mut h) }, PrStatus::Ok);
    let (mut rows, mut cols) = (0, 0);
    unsafe { pr_response_dims(h, &mut rows, &mut cols) };
    assert_eq!(cols, 4);
    unsafe { pr_response_free(h) };

    let missing = CString::new(dir.path().join("none.json").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { pr_response_read(missing.as_ptr(), &mut h) }, PrStatus::Io);
}

#[test]
fn simulate_and_reconstruct() {
    let h = standard_response(20);
    let mut counts = vec![0.0; 102];
    let s = unsafe { pr_simulate_counts(h, PrState::Coherent, 1.0, 100_000, 3, counts.as_mut_ptr(), counts.len()) };
    assert_eq!(s, PrStatus::Ok);
    assert_eq!(counts.iter().sum::<f64>(), 100_000.0);

    let mut rho = vec![0.0; 21];
    let mut kkt = -1.0;
    let s = unsafe { pr_em_reconstruct(h, counts.as_ptr(), counts.len(), 500, rho.as_mut_ptr(), rho.len(), &mut kkt) };
    assert_eq!(s, PrStatus::Ok, "{}", last_error());
    assert!((rho.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert!(kkt >= 0.0);

    let (mut values, mut errs) = (vec![0.0; 21], vec![0.0; 21]);
    let s = unsafe { pr_linear_baseline(h, counts.as_ptr(), counts.len(), values.as_mut_ptr(), errs.as_mut_ptr(), 21) };
    assert_eq!(s, PrStatus::Ok, "{}", last_error());
    assert!(errs.iter().all(|e| *e > 0.0));

    let s = unsafe { pr_em_reconstruct(h, counts.as_ptr(), 101, 5, rho.as_mut_ptr(), rho.len(), ptr::null_mut()) };
    assert_eq!(s, PrStatus::DimensionMismatch);
    let s =
        unsafe { pr_em_reconstruct(h, counts.as_ptr(), counts.len(), 0, rho.as_mut_ptr(), rho.len(), ptr::null_mut()) };
    assert_eq!(s, PrStatus::Validation);
    let s = unsafe { pr_simulate_counts(h, PrState::SqueezedVacuum, 1.0, 0, 3, counts.as_mut_ptr(), counts.len()) };
    assert_eq!(s, PrStatus::Domain);
    unsafe { pr_response_free(h) };
}

#[test]
fn error_message_buffer_handling() {
    let mut d = 0.0;
    unsafe { pr_fock_loss_density(-1, 0.5, 0.0, &mut d) };
    let need = unsafe { pr_last_error_message(ptr::null_mut(), 0) };
    assert_eq!(need, last_error().len() + 1);
    let mut small = [0x7f as c_char; 4];
    unsafe { pr_last_error_message(small.as_mut_ptr(), small.len()) };
    assert_eq!(small[3], 0);
    assert_eq!(unsafe { pr_fock_loss_density(0, 1.0, 0.0, &mut d) }, PrStatus::Ok);
    assert_eq!(last_error(), "");
    let v = unsafe { CStr::from_ptr(pr_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

/// Compiles a C program against the generated header and the static library, then runs it.
#[test]
fn c_program_links_against_the_header() {
    let manifest = std::path::Path::new(env!("CARGO_MANIFEST_DIR"));
    let deps = std::env::current_exe().unwrap().parent().unwrap().to_path_buf();
    let lib = deps.join("libphoton_recon_ffi.a");
    assert!(lib.is_file(), "static library not found at {}", lib.display());
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let status = std::process::Command::new(cc)
        .args(["-std=c11", "-Wall", "-Werror", "-D_DEFAULT_SOURCE", "-I"])
        .arg(manifest.join("include"))
        .arg(manifest.join("tests/c/smoke.c"))
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&exe)
        .status()
        .expect("C compiler runs");
    assert!(status.success());
    let out = std::process::Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "exit {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok "));
}
