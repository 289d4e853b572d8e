use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

fn markovcat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_markovcat"))
        .args(args)
        .env_remove("MARKOVCAT_TOLERANCE")
        .output()
        .expect("binary runs")
}

fn path(name: &str) -> String {
    fixture(name).to_string_lossy().into_owned()
}

fn report(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("report is JSON")
}

fn floats(v: &Value) -> Vec<f64> {
    v.as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect()
}

#[test]
fn scalar_gauss_filter_by_hand() {
    let r = report(&markovcat(&[
        "filter",
        "--model",
        &path("gauss_scalar.json"),
        "--observations",
        &path("gauss_scalar_obs.json"),
    ]));
    let steps = r["steps"].as_array().unwrap();
    let m: Vec<f64> = steps
        .iter()
        .map(|s| floats(&s["posterior"]["mean"])[0])
        .collect();
    let p: Vec<f64> = steps
        .iter()
        .map(|s| s["posterior"]["cov"][0][0].as_f64().unwrap())
        .collect();
    assert!((m[0] - 0.5).abs() < 1e-12 && (m[1] - 0.8).abs() < 1e-12);
    assert!((p[0] - 0.5).abs() < 1e-12 && (p[1] - 0.6).abs() < 1e-12);
    assert_eq!(r["degenerate"], Value::Bool(false));
    assert!(r["input_digest"].as_str().unwrap().starts_with("sha256:"));
    assert!(r.get("timing_ms").is_none());
}

#[test]
fn malformed_column_sum_names_the_time() {
    let out = markovcat(&[
        "filter",
        "--model",
        &path("bad_column_sum.json"),
        "--observations",
        &path("weather_obs.json"),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("transitions[2]"));
    assert!(out.stdout.is_empty());
}

#[test]
fn identity_observations_give_point_masses() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("model.json");
    let obs = dir.path().join("obs.json");
    std::fs::write(
        &model,
        r#"{"schema_version": 1, "category": "finstoch", "horizon": 2,
            "state_spaces": [3, 3, 3], "observation_spaces": [3, 3, 3],
            "transitions": [{"matrix": [[0.2], [0.3], [0.5]]},
                            {"matrix": [[0.1, 0.4, 0.3], [0.6, 0.2, 0.3], [0.3, 0.4, 0.4]]},
                            {"matrix": [[0.1, 0.4, 0.3], [0.6, 0.2, 0.3], [0.3, 0.4, 0.4]]}],
            "observations": [{"matrix": [[1, 0, 0], [0, 1, 0], [0, 0, 1]]},
                             {"matrix": [[1, 0, 0], [0, 1, 0], [0, 0, 1]]},
                             {"matrix": [[1, 0, 0], [0, 1, 0], [0, 0, 1]]}]}"#,
    )
    .unwrap();
    std::fs::write(&obs, r#"{"schema_version": 1, "observations": [2, 0, 1]}"#).unwrap();
    let r = report(&markovcat(&[
        "filter",
        "--model",
        model.to_str().unwrap(),
        "--observations",
        obs.to_str().unwrap(),
    ]));
    for (step, x) in r["steps"].as_array().unwrap().iter().zip([2, 0, 1]) {
        let d = floats(&step["posterior"]["distribution"]);
        assert!(
            d.iter()
                .enumerate()
                .all(|(i, &p)| p == if i == x { 1.0 } else { 0.0 }),
            "{d:?}"
        );
    }
}

#[test]
fn smoothing_methods_agree_and_end_at_the_filter() {
    let model = path("weather.json");
    let obs = path("weather_obs.json");
    let fb = report(&markovcat(&[
        "smooth",
        "--method",
        "forward-backward",
        "--model",
        &model,
        "--observations",
        &obs,
    ]));
    let fi = report(&markovcat(&[
        "smooth",
        "--method",
        "fixed-interval",
        "--model",
        &model,
        "--observations",
        &obs,
    ]));
    let filt = report(&markovcat(&[
        "filter",
        "--model",
        &model,
        "--observations",
        &obs,
    ]));
    let round = |v: &Value| -> Vec<Vec<String>> {
        v["states"]
            .as_array()
            .unwrap()
            .iter()
            .map(|s| {
                floats(&s["state"]["distribution"])
                    .iter()
                    .map(|p| format!("{p:.12}"))
                    .collect()
            })
            .collect()
    };
    assert_eq!(round(&fb), round(&fi));
    let last_fi = floats(&fi["states"][3]["state"]["distribution"]);
    let last_filter = floats(&filt["steps"][3]["posterior"]["distribution"]);
    assert_eq!(last_fi, last_filter);
}

#[test]
fn unknown_method_and_unsupported_combinations() {
    let model = path("weather.json");
    let obs = path("weather_obs.json");
    let out = markovcat(&[
        "smooth",
        "--method",
        "viterbi",
        "--model",
        &model,
        "--observations",
        &obs,
    ]);
    assert_eq!(out.status.code(), Some(2));

    let out = markovcat(&[
        "verify",
        "--suite",
        "filter-chain",
        "--model",
        &path("gauss_scalar.json"),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unsupported instance"));

    let out = markovcat(&[
        "smooth",
        "--method",
        "forward-backward",
        "--model",
        &path("gauss_scalar.json"),
        "--observations",
        &path("gauss_scalar_obs.json"),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn cap_exceeded_lists_the_dimension() {
    let out = markovcat(&[
        "verify",
        "--suite",
        "markov",
        "--model",
        &path("long_chain.json"),
    ]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("4194304") && err.contains("1000000"), "{err}");
}

#[test]
fn perturbed_joint_fails_the_markov_suite() {
    let out = markovcat(&[
        "verify",
        "--suite",
        "markov",
        "--model",
        &path("perturbed_joint.json"),
    ]);
    assert_eq!(out.status.code(), Some(4));
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r["passed"], Value::Bool(false));
    assert_eq!(r["checks"][0]["name"], "chain-local");
    assert_eq!(r["checks"][0]["passed"], Value::Bool(false));
}

#[test]
fn bundled_examples_pass_every_suite() {
    for m in ["weather", "automaton"] {
        for suite in [
            "laws",
            "markov",
            "filter-oracle",
            "smoother-oracle",
            "filter-chain",
        ] {
            let out = markovcat(&[
                "verify",
                "--suite",
                suite,
                "--model",
                &path(&format!("{m}.json")),
                "--cases",
                "10",
            ]);
            assert_eq!(
                out.status.code(),
                Some(0),
                "{m} {suite}: {}",
                String::from_utf8_lossy(&out.stdout)
            );
        }
    }
    for m in ["gauss_scalar", "gauss_tracking"] {
        for suite in ["laws", "filter-oracle", "smoother-oracle"] {
            let out = markovcat(&[
                "verify",
                "--suite",
                suite,
                "--model",
                &path(&format!("{m}.json")),
                "--observations",
                &path(&format!("{m}_obs.json")),
                "--cases",
                "10",
            ]);
            assert_eq!(
                out.status.code(),
                Some(0),
                "{m} {suite}: {}",
                String::from_utf8_lossy(&out.stdout)
            );
        }
    }
    let out = markovcat(&[
        "verify",
        "--suite",
        "laws",
        "--category",
        "gauss",
        "--cases",
        "10",
    ]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn zero_noise_simulation_follows_the_recursion() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("model.json");
    std::fs::write(
        &model,
        r#"{"schema_version": 1, "category": "gauss", "horizon": 3,
            "state_spaces": [1, 1, 1, 1], "observation_spaces": [1, 1, 1, 1],
            "transitions": [{"mean": [1.5], "cov": [[0]]},
                            {"a": [[2]], "mean": [1], "cov": [[0]]},
                            {"a": [[2]], "mean": [1], "cov": [[0]]},
                            {"a": [[2]], "mean": [1], "cov": [[0]]}],
            "observations": [{"a": [[-1]], "mean": [0], "cov": [[0]]},
                             {"a": [[-1]], "mean": [0], "cov": [[0]]},
                             {"a": [[-1]], "mean": [0], "cov": [[0]]},
                             {"a": [[-1]], "mean": [0], "cov": [[0]]}]}"#,
    )
    .unwrap();
    let r = report(&markovcat(&[
        "simulate",
        "--model",
        model.to_str().unwrap(),
        "--seed",
        "3",
    ]));
    let xs: Vec<f64> = r["states"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| floats(x)[0])
        .collect();
    let ys: Vec<f64> = r["observations"]
        .as_array()
        .unwrap()
        .iter()
        .map(|y| floats(y)[0])
        .collect();
    assert_eq!(xs, vec![1.5, 4.0, 9.0, 19.0]);
    assert_eq!(ys, vec![-1.5, -4.0, -9.0, -19.0]);
}

#[test]
fn simulation_is_reproducible_and_possible() {
    let model = path("automaton.json");
    let a = markovcat(&["simulate", "--model", &model, "--seed", "42"]);
    let b = markovcat(&["simulate", "--model", &model, "--seed", "42"]);
    assert_eq!(a.stdout, b.stdout);
    // a -> {a, b}, b -> {b}; a emits 0, b emits 0 or 1; start in a
    for seed in 0..30 {
        let r = report(&markovcat(&[
            "simulate",
            "--model",
            &model,
            "--seed",
            &seed.to_string(),
        ]));
        let xs: Vec<u64> = r["states"]
            .as_array()
            .unwrap()
            .iter()
            .map(|x| x.as_u64().unwrap())
            .collect();
        let ys: Vec<u64> = r["observations"]
            .as_array()
            .unwrap()
            .iter()
            .map(|y| y.as_u64().unwrap())
            .collect();
        assert_eq!(xs[0], 0);
        assert!(xs.windows(2).all(|w| w[0] <= w[1]));
        assert!(xs.iter().zip(&ys).all(|(&x, &y)| x == 1 || y == 0));
    }
    let out = markovcat(&["simulate", "--model", &model, "--steps", "9"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulated_observations_feed_the_filter() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim.json");
    let model = path("weather.json");
    let out = markovcat(&[
        "simulate",
        "--model",
        &model,
        "--seed",
        "7",
        "--out",
        sim.to_str().unwrap(),
    ]);
    assert!(out.status.success() && out.stdout.is_empty());
    let r = report(&markovcat(&[
        "filter",
        "--model",
        &model,
        "--observations",
        sim.to_str().unwrap(),
    ]));
    assert_eq!(r["steps"].as_array().unwrap().len(), 4);
}

#[test]
fn out_file_matches_stdout_and_timing_is_opt_in() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("report.json");
    let args = [
        "filter",
        "--model",
        &path("automaton.json"),
        "--observations",
        &path("automaton_obs.json"),
    ];
    let stdout = markovcat(&args).stdout;
    let mut with_out = args.to_vec();
    let file_str = file.to_str().unwrap().to_owned();
    with_out.extend(["--out", &file_str]);
    assert!(markovcat(&with_out).status.success());
    assert_eq!(std::fs::read(&file).unwrap(), stdout);
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);

    let mut timed = args.to_vec();
    timed.push("--timing");
    let r = report(&markovcat(&timed));
    assert!(r["timing_ms"].as_f64().is_some());
}

#[test]
fn tolerance_comes_from_the_environment() {
    let out = Command::new(env!("CARGO_BIN_EXE_markovcat"))
        .args([
            "verify",
            "--suite",
            "filter-oracle",
            "--model",
            &path("weather.json"),
        ])
        .env("MARKOVCAT_TOLERANCE", "1e-6")
        .output()
        .unwrap();
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r["checks"][0]["tol"].as_f64(), Some(1e-6));
    let out = Command::new(env!("CARGO_BIN_EXE_markovcat"))
        .args([
            "verify",
            "--suite",
            "filter-oracle",
            "--model",
            &path("weather.json"),
        ])
        .env("MARKOVCAT_TOLERANCE", "tight")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn observation_names_resolve() {
    let r = report(&markovcat(&[
        "filter",
        "--model",
        &path("weather.json"),
        "--observations",
        &path("weather_obs.json"),
    ]));
    assert_eq!(r["steps"][0]["posterior"]["names"][0], "rainy");
    let dir = tempfile::tempdir().unwrap();
    let obs = dir.path().join("obs.json");
    std::fs::write(
        &obs,
        r#"{"schema_version": 1, "observations": ["walk", "sleep"]}"#,
    )
    .unwrap();
    let out = markovcat(&[
        "filter",
        "--model",
        &path("weather.json"),
        "--observations",
        obs.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("observations[1]"));
}
