use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use markovcat_ffi::*;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/fixtures")
        .join(name)
}

fn cstring(name: &str) -> CString {
    CString::new(std::fs::read(fixture(name)).unwrap()).unwrap()
}

fn load(name: &str) -> *mut McModel {
    let mut m = ptr::null_mut();
    let status = unsafe { mc_model_from_json(cstring(name).as_ptr(), &mut m) };
    assert_eq!(status, McStatus::Ok);
    m
}

fn take(s: *mut std::ffi::c_char) -> String {
    let out = unsafe { CStr::from_ptr(s) }.to_str().unwrap().to_owned();
    unsafe { mc_string_free(s) };
    out
}

fn last_error() -> String {
    let p = mc_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn filter_matches_library_report() {
    let m = load("weather.json");
    let mut out = ptr::null_mut();
    let status = unsafe { mc_filter(m, cstring("weather_obs.json").as_ptr(), &mut out) };
    assert_eq!(status, McStatus::Ok);
    let report = take(out);
    let direct = markovcat::cli::commands::filter(
        &std::fs::read(fixture("weather.json")).unwrap(),
        &std::fs::read(fixture("weather_obs.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(report, markovcat::cli::json::to_string(&direct.report));
    assert_eq!(unsafe { mc_model_horizon(m) }, 3);
    unsafe { mc_model_free(m) };
}

#[test]
fn smoothing_and_simulation() {
    let m = load("automaton.json");
    let obs = cstring("automaton_obs.json");
    let mut out = ptr::null_mut();
    let status = unsafe { mc_smooth(m, obs.as_ptr(), McMethod::ForwardBackward, &mut out) };
    assert_eq!(status, McStatus::Ok);
    assert!(take(out).contains("\"set\""));
    let status = unsafe { mc_simulate(m, 5, 2, &mut out) };
    assert_eq!(status, McStatus::Ok);
    let a = take(out);
    unsafe { mc_simulate(m, 5, 2, &mut out) };
    assert_eq!(a, take(out));
    unsafe { mc_model_free(m) };
}

#[test]
fn status_codes() {
    let mut m = ptr::null_mut();
    let status = unsafe { mc_model_from_json(cstring("bad_column_sum.json").as_ptr(), &mut m) };
    assert_eq!(status, McStatus::InvalidInput);
    assert!(m.is_null());
    assert!(last_error().contains("transitions[2]"));

    let status = unsafe { mc_model_from_json(ptr::null(), &mut m) };
    assert_eq!(status, McStatus::InvalidArgument);

    let joint = load("perturbed_joint.json");
    let mut out = ptr::null_mut();
    let status = unsafe { mc_verify(joint, McSuite::Markov, ptr::null(), 0, 0, &mut out) };
    assert_eq!(status, McStatus::SuiteFailed);
    assert!(take(out).contains("\"passed\": false"));
    assert!(unsafe { mc_model_category(joint) }.is_null());
    unsafe { mc_model_free(joint) };

    let long = load("long_chain.json");
    let status = unsafe { mc_verify(long, McSuite::Markov, ptr::null(), 0, 0, &mut out) };
    assert_eq!(status, McStatus::ResourceCap);
    assert!(out.is_null());
    unsafe { mc_model_free(long) };

    let gauss = load("gauss_scalar.json");
    let status = unsafe { mc_verify(gauss, McSuite::FilterChain, ptr::null(), 0, 0, &mut out) };
    assert_eq!(status, McStatus::Unsupported);
    assert!(last_error().starts_with("unsupported instance"));
    unsafe { mc_model_free(gauss) };
}

#[test]
fn c_program_links_against_header() {
    let exe_path = std::env::current_exe().unwrap();
    let deps = exe_path.parent().unwrap();
    let lib = [deps, deps.parent().unwrap()]
        .iter()
        .map(|d| d.join("libmarkovcat_ffi.a"))
        .find(|p| p.exists())
        .unwrap_or_else(|| panic!("static library missing under {}", deps.display()));
    let dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    let tmp = tempfile::tempdir().unwrap();
    let exe = tmp.path().join("smoke");
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let status = Command::new(&cc)
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(dir.join("include"))
        .arg(dir.join("tests/smoke.c"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm"])
        .arg("-o")
        .arg(&exe)
        .status()
        .unwrap_or_else(|e| panic!("C compiler {cc} not runnable: {e}"));
    assert!(status.success());
    let run = Command::new(&exe)
        .arg(fixture("gauss_scalar.json"))
        .arg(fixture("gauss_scalar_obs.json"))
        .output()
        .unwrap();
    assert_eq!(
        run.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&run.stderr)
    );
    assert_eq!(run.stdout, b"ok\n");
}
