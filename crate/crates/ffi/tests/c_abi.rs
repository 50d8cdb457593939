use std::ffi::CStr;
use std::path::Path;
use std::process::Command;
use std::ptr;

use gendir_ffi::*;

fn last_error() -> String {
    let p = gendir_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn table_coefficients(c11: f64) -> *mut GendirCoefficients {
    let (b, s, kappa, c) = ([0.1, 1.5], [0.625, 0.4], [1.0 / 80.0, 0.3], [c11]);
    let mut out = ptr::null_mut();
    let st = unsafe { gendir_coefficients_new(b.as_ptr(), s.as_ptr(), kappa.as_ptr(), c.as_ptr(), 2, &mut out) };
    assert_eq!(st, GendirStatus::Ok);
    out
}

#[test]
fn params_lifecycle_and_moments() {
    let (alpha, beta) = ([5.0, 2.0], [5.0, 3.0]);
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { gendir_params_new(alpha.as_ptr(), beta.as_ptr(), 2, &mut p) }, GendirStatus::Ok);
    assert_eq!(unsafe { gendir_params_dim(p) }, 2);
    let mut mean = [0.0; 2];
    let mut cov = [0.0; 4];
    assert_eq!(unsafe { gendir_params_moments(p, mean.as_mut_ptr(), cov.as_mut_ptr()) }, GendirStatus::Ok);
    assert!((mean[0] - 0.5).abs() < 1e-15 && (mean[1] - 0.2).abs() < 1e-15);
    assert!((cov[1] + 1.0 / 110.0).abs() < 1e-15 && cov[1] == cov[2]);
    let y = [0.3, 0.4];
    let (mut v, mut edge) = (0.0, true);
    assert_eq!(unsafe { gendir_params_log_density(p, y.as_ptr(), 2, &mut v, &mut edge) }, GendirStatus::Ok);
    assert!((v - 0.790_498_911_343_807_7).abs() < 1e-12);
    assert!(!edge);
    unsafe { gendir_params_free(p) };
}

#[test]
fn invalid_input_sets_error() {
    let (alpha, beta) = ([5.0, -2.0], [5.0, 3.0]);
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { gendir_params_new(alpha.as_ptr(), beta.as_ptr(), 2, &mut p) }, GendirStatus::InvalidArgument);
    assert!(p.is_null());
    assert!(last_error().contains("alpha"));
    assert_eq!(unsafe { gendir_params_new(ptr::null(), beta.as_ptr(), 2, &mut p) }, GendirStatus::NullPointer);
    assert_eq!(
        unsafe { gendir_params_moments(ptr::null(), ptr::null_mut(), ptr::null_mut()) },
        GendirStatus::NullPointer
    );
    unsafe { gendir_params_free(ptr::null_mut()) };
}

#[test]
fn map_round_trip_through_handles() {
    let c = table_coefficients(-0.25);
    assert_eq!(unsafe { gendir_coefficients_validate(c) }, GendirStatus::Ok);
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { gendir_sde_to_distribution(c, &mut p) }, GendirStatus::Ok);
    let mut mean = [0.0; 2];
    let mut cov = [0.0; 4];
    unsafe { gendir_params_moments(p, mean.as_mut_ptr(), cov.as_mut_ptr()) };
    assert!((mean[0] - 5.0 / 31.0).abs() < 1e-14);
    let kappa = [1.0 / 80.0, 0.3];
    let mut back = ptr::null_mut();
    assert_eq!(unsafe { gendir_distribution_to_sde(p, kappa.as_ptr(), &mut back) }, GendirStatus::Ok);
    let y = [0.2, 0.3];
    let mut r = [1.0; 2];
    let st = unsafe { gendir_evaluate(back, GendirField::PotentialResidual, y.as_ptr(), 2, r.as_mut_ptr()) };
    assert_eq!(st, GendirStatus::Ok);
    assert!(r.iter().all(|v| v.abs() < 1e-10));
    let mut d = [0.0; 2];
    let origin = [0.0, 0.0];
    unsafe { gendir_evaluate(c, GendirField::Drift, origin.as_ptr(), 2, d.as_mut_ptr()) };
    assert!((d[0] - 1.0 / 32.0).abs() < 1e-15 && (d[1] - 0.3).abs() < 1e-15);
    unsafe {
        gendir_coefficients_free(back);
        gendir_params_free(p);
        gendir_coefficients_free(c);
    }
}

#[test]
fn broken_chain_fails_validation() {
    let (b, s, kappa) = ([0.1, 1.0], [0.625, 0.4], [1.0 / 80.0, 0.3]);
    let c = [1.0 / 80.0];
    let mut h = ptr::null_mut();
    unsafe { gendir_coefficients_new(b.as_ptr(), s.as_ptr(), kappa.as_ptr(), c.as_ptr(), 2, &mut h) };
    assert_eq!(unsafe { gendir_coefficients_validate(h) }, GendirStatus::ValidationFailed);
    assert!(last_error().contains("chain"));
    unsafe { gendir_coefficients_free(h) };
}

#[test]
fn simulation_is_thread_count_invariant() {
    let c = table_coefficients(1.0 / 80.0);
    let run = |threads| {
        let mut o = gendir_integrator_defaults();
        o.t_end = 2.0;
        o.particles = 300;
        o.seed = 5;
        o.threads = threads;
        let y0 = [0.0, 0.0];
        let mut s = ptr::null_mut();
        assert_eq!(unsafe { gendir_simulate(c, o, y0.as_ptr(), &mut s) }, GendirStatus::Ok);
        let n = unsafe { gendir_simulation_records(s) };
        let (mut t, mut mean, mut cov) = (0.0, [0.0; 3], [0.0; 9]);
        unsafe { gendir_simulation_record(s, n - 1, &mut t, mean.as_mut_ptr(), cov.as_mut_ptr()) };
        assert_eq!(unsafe { gendir_simulation_clamped(s) }, 0);
        assert_eq!(
            unsafe { gendir_simulation_record(s, n, &mut t, mean.as_mut_ptr(), cov.as_mut_ptr()) },
            GendirStatus::InvalidArgument
        );
        unsafe { gendir_simulation_free(s) };
        (n, t, mean, cov)
    };
    let a = run(1);
    let b = run(2);
    assert_eq!(a.0, 3);
    assert!((a.1 - 2.0).abs() < 1e-12);
    assert_eq!(a, b);
    unsafe { gendir_coefficients_free(c) };
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(gendir_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

/// The generated header must be valid C and C++.
#[test]
fn header_compiles() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/gendir.h");
    assert!(header.exists(), "header not generated");
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    std::fs::write(
        &src,
        "#include \"gendir.h\"\nint main(void) { GendirParams *p = 0; gendir_params_free(p); return GENDIR_STATUS_OK; }\n",
    )
    .unwrap();
    let include = header.parent().unwrap();
    for (compiler, lang) in [("cc", "c"), ("c++", "c++")] {
        let status = Command::new(compiler)
            .args(["-fsyntax-only", "-Wall", "-Werror", "-x", lang])
            .arg("-I")
            .arg(include)
            .arg(&src)
            .status()
            .unwrap_or_else(|e| panic!("cannot run {compiler}: {e}"));
        assert!(status.success(), "{compiler} rejected the header");
    }
}
