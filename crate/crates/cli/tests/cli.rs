use std::fs;
use std::path::Path;
use std::process::Command;

use catsim_cli::config::{parse_config, Job, JobKind};
use catsim_cli::error::CliError;
use catsim_cli::output::MANIFEST_NAME;
use catsim_cli::{run, RunOptions};
use proptest::prelude::*;
use serde_json::{json, Value};

fn config_field(text: &str) -> String {
    match parse_config(text) {
        Err(CliError::Config { field, .. }) => field,
        Err(e) => panic!("expected a config error, got {e}"),
        Ok(_) => panic!("expected a config error for {text}"),
    }
}

fn catsim(args: &[&str], dir: &Path) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_catsim"))
        .args(args)
        .current_dir(dir)
        .env_remove("CATSIM_OUTPUT_DIR")
        .output()
        .unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

#[test]
fn minimal_gap_job_is_valid() {
    let cfg = parse_config(r#"{"job":"gap"}"#).unwrap();
    assert_eq!(cfg.kind(), JobKind::Gap);
    let Job::Gap(g) = &cfg.job else { panic!() };
    assert_eq!(g.alphas.len(), 1);
    // device defaults, converted from Hz
    assert!((cfg.params.kappa_b / (std::f64::consts::TAU * 2.6e6) - 1.0).abs() < 1e-12);
}

#[test]
fn negative_rate_names_the_field() {
    assert_eq!(
        config_field(r#"{"job":"gap","params":{"kappa_b":-1e6}}"#),
        "params.kappa_b"
    );
    assert_eq!(
        config_field(r#"{"job":"gap","params":{"n_th_mem":1.5}}"#),
        "params.n_th_mem"
    );
}

#[test]
fn omitted_seed_defaults_to_zero() {
    let cfg = parse_config(r#"{"job":"gap"}"#).unwrap();
    assert_eq!(cfg.seed, 0);
    assert!(cfg.seed_from_default);
    let cfg = parse_config(r#"{"job":"gap","seed":17}"#).unwrap();
    assert_eq!(cfg.seed, 17);
    assert!(!cfg.seed_from_default);
}

#[test]
fn unknown_keys_are_rejected() {
    assert_eq!(config_field(r#"{"job":"gap","colapse":{}}"#), "colapse");
    assert_eq!(
        config_field(r#"{"job":"gap","params":{"g2":1e6,"kapa_b":1}}"#),
        "params.kapa_b"
    );
    let f = config_field(r#"{"job":"wigner","wigner":{"state":{"kind":"fock","n":0,"m":1}}}"#);
    assert!(f.starts_with("wigner.state"), "{f}");
}

#[test]
fn schema_errors_carry_position() {
    match parse_config("{\"job\":\"gap\",\n \"seed\": \"x\"}") {
        Err(CliError::Config { field, reason }) => {
            assert_eq!(field, "seed");
            assert!(reason.contains("line 2"), "{reason}");
        }
        other => panic!("{other:?}"),
    }
    assert_eq!(config_field("not json"), "<root>");
}

#[test]
fn blocks_must_match_the_job() {
    assert_eq!(
        config_field(r#"{"job":"gap","wigner":{"state":{"kind":"fock","n":0}}}"#),
        "wigner"
    );
    assert_eq!(config_field(r#"{"job":"wigner"}"#), "wigner");
    assert_eq!(config_field(r#"{"job":"nope"}"#), "job");
}

#[test]
fn kind_specific_validation() {
    assert_eq!(
        config_field(r#"{"job":"bitflip","bitflip":{"alpha_sq":[1,2],"t_end":[1e-6,2e-6,3e-6]}}"#),
        "bitflip.t_end"
    );
    assert_eq!(
        config_field(r#"{"job":"bitflip","bitflip":{"alpha_sq":[1,-2],"t_end":1e-6}}"#),
        "bitflip.alpha_sq[1]"
    );
    assert_eq!(
        config_field(r#"{"job":"hilbert","hilbert":{"n_mem":1}}"#),
        "job"
    );
    assert_eq!(
        config_field(r#"{"job":"gap","hilbert":{"n_mem":1}}"#),
        "hilbert"
    );
    assert_eq!(
        config_field(r#"{"job":"readout","readout":{"n_shots":3}}"#),
        "readout.n_shots"
    );
}

#[test]
fn complex_amplitudes_accept_three_forms() {
    for a in ["1.5", "[1.5, 0.5]", r#"{"re":1.5,"im":0.5}"#] {
        let text =
            format!(r#"{{"job":"wigner","wigner":{{"state":{{"kind":"coherent","alpha":{a}}}}}}}"#);
        parse_config(&text).unwrap();
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(
        d.join("bad.json"),
        r#"{"job":"gap","params":{"kappa_b":-1}}"#,
    )
    .unwrap();
    let (code, err) = catsim(&["--config", "bad.json"], d);
    assert_eq!(code, 2);
    assert!(err.contains("params.kappa_b"), "{err}");

    let (code, _) = catsim(&["--config", "missing.json"], d);
    assert_eq!(code, 4);

    // a cat too large for the requested truncation
    fs::write(
        d.join("trunc.json"),
        r#"{"job":"evolve","hilbert":{"n_mem":6,"n_buf":2},"evolve":{"initial":{"kind":"fock","n":0},"drive":{"alpha":2.0},"t_end":1e-7,"observables":["parity"]}}"#,
    )
    .unwrap();
    let (code, err) = catsim(&["--config", "trunc.json"], d);
    assert_eq!(code, 3, "{err}");

    // output path blocked by a regular file
    fs::write(d.join("blocker"), "").unwrap();
    fs::write(d.join("ok.json"), r#"{"job":"semiclassical","semiclassical":{"alpha":1,"starts":[[0.1,0,0,0]],"t_end":1e-7,"n_samples":3}}"#).unwrap();
    let (code, _) = catsim(
        &[
            "--config",
            "ok.json",
            "--output-dir",
            "blocker/out",
            "--quiet",
        ],
        d,
    );
    assert_eq!(code, 4);

    let (code, _) = catsim(
        &["--config", "ok.json", "--output-dir", "out", "--quiet"],
        d,
    );
    assert_eq!(code, 0);
    assert!(d.join("out").join(MANIFEST_NAME).exists());

    let (code, _) = catsim(&["--bogus"], d);
    assert_eq!(code, 2);
}

fn run_in(dir: &Path, name: &str, cfg: &str, seed: Option<u64>) -> (std::path::PathBuf, Value) {
    let path = dir.join(format!("{name}.json"));
    fs::write(&path, cfg).unwrap();
    let out = dir.join(name);
    let opts = RunOptions {
        config: path,
        output_dir: Some(out.clone()),
        seed,
        threads: Some(1),
        quiet: true,
    };
    if let Err(e) = run(&opts) {
        panic!("{name}: {e}");
    }
    let manifest: Value =
        serde_json::from_str(&fs::read_to_string(out.join(MANIFEST_NAME)).unwrap()).unwrap();
    (out, manifest)
}

#[test]
fn manifest_records_seed_and_hashes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"job":"readout","readout":{"n_shots":200}}"#;
    let (out, m) = run_in(dir.path(), "r", cfg, None);
    assert_eq!(m["seed"], json!(0));
    assert_eq!(m["seed_from_default"], json!(true));
    assert_eq!(m["job"], json!("readout"));
    assert_eq!(m["config_sha256"].as_str().unwrap().len(), 64);
    for rec in m["outputs"].as_array().unwrap() {
        let bytes = fs::read(out.join(rec["file"].as_str().unwrap())).unwrap();
        assert_eq!(
            rec["sha256"].as_str().unwrap(),
            catsim_cli::output::sha256_hex(&bytes)
        );
    }
    let (_, m2) = run_in(dir.path(), "r2", cfg, Some(8));
    assert_eq!(m2["seed"], json!(8));
    assert_eq!(m2["seed_from_default"], json!(false));
    assert_ne!(
        m["outputs"], m2["outputs"],
        "a different seed must change the shots"
    );
}

#[test]
fn wigner_and_evolve_columns() {
    let dir = tempfile::tempdir().unwrap();
    let (out, _) = run_in(
        dir.path(),
        "w",
        r#"{"job":"wigner","wigner":{"state":{"kind":"fock","n":1},"grid":{"re_min":-1,"re_max":1,"im_min":0,"im_max":0,"n_re":3,"n_im":1}}}"#,
        None,
    );
    let text = fs::read_to_string(out.join("wigner.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "re,im,value");
    assert_eq!(lines.len(), 4);
    // 17 significant digits in scientific notation
    let v = lines[2].split(',').nth(2).unwrap();
    assert!(
        v.starts_with("-6.3661977236758") && v.ends_with("e-1"),
        "{v}"
    );

    let (out, _) = run_in(
        dir.path(),
        "e",
        r#"{"job":"evolve","hilbert":{"n_mem":24,"n_buf":3},"evolve":{"initial":{"kind":"fock","n":1},"t_end":1e-6,"n_points":3,"observables":["parity","n_mem","im_a"]}}"#,
        None,
    );
    let text = fs::read_to_string(out.join("evolve.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), "t,parity,n_mem,im_a");
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn output_dir_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("c.json"), r#"{"job":"semiclassical","output":"from_config","semiclassical":{"alpha":1,"starts":[[0.1,0,0,0]],"t_end":1e-7,"n_samples":3}}"#).unwrap();
    let (code, _) = catsim(&["--config", "c.json", "--quiet"], d);
    assert_eq!(code, 0);
    assert!(d.join("from_config").join(MANIFEST_NAME).exists());
    let status = Command::new(env!("CARGO_BIN_EXE_catsim"))
        .args(["--config", "c.json", "--quiet"])
        .current_dir(d)
        .env("CATSIM_OUTPUT_DIR", "from_env")
        .status()
        .unwrap();
    assert!(status.success());
    assert!(d.join("from_env").join(MANIFEST_NAME).exists());
    let (code, _) = catsim(
        &["--config", "c.json", "--quiet", "--output-dir", "from_flag"],
        d,
    );
    assert_eq!(code, 0);
    assert!(d.join("from_flag").join(MANIFEST_NAME).exists());
}

#[test]
fn fit_job_reads_relative_input() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let mut csv = String::from("time,signal\n");
    for k in 0..40 {
        let t = k as f64 * 0.1;
        csv += &format!("{t},{}\n", 0.2 + 1.3 * (-t / 0.7).exp());
    }
    fs::write(d.join("data.csv"), csv).unwrap();
    let (out, _) = run_in(
        d,
        "f",
        r#"{"job":"fit","fit":{"model":"exponential","input":"data.csv","x":"time","y":"signal"}}"#,
        None,
    );
    let fit: Value =
        serde_json::from_str(&fs::read_to_string(out.join("fit.json")).unwrap()).unwrap();
    let t = fit["values"][2].as_f64().unwrap();
    assert!((t - 0.7).abs() < 1e-8, "{t}");

    let bad = d.join("bad.json");
    fs::write(
        &bad,
        r#"{"job":"fit","fit":{"model":"exponential","input":"data.csv","y":"nope"}}"#,
    )
    .unwrap();
    let err = run(&RunOptions {
        config: bad,
        output_dir: Some(d.join("x")),
        ..Default::default()
    })
    .unwrap_err();
    assert_eq!(err.exit_code(), 2);
}

fn leaf() -> impl Strategy<Value = Value> {
    prop_oneof![
        Just(Value::Null),
        any::<bool>().prop_map(Value::Bool),
        (-1e7f64..1e7).prop_map(|x| json!(x)),
        (0u64..5000).prop_map(|x| json!(x)),
        prop::sample::select(vec![
            "gap",
            "wigner",
            "evolve",
            "fock",
            "cat",
            "even",
            "",
            "zeno",
            "holonomic"
        ])
        .prop_map(|s| json!(s)),
    ]
}

fn keys() -> impl Strategy<Value = String> {
    prop::sample::select(vec![
        "job", "params", "hilbert", "seed", "gap", "wigner", "state", "kind", "n", "alpha", "grid",
        "n_re", "n_mem", "n_buf", "kappa_b", "g2", "alphas", "protocol", "t_end", "bitflip",
        "alpha_sq", "fit", "model", "input",
    ])
    .prop_map(str::to_string)
}

fn json_tree() -> impl Strategy<Value = Value> {
    leaf().prop_recursive(4, 32, 6, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 0..4).prop_map(Value::Array),
            prop::collection::btree_map(keys(), inner, 0..5)
                .prop_map(|m| Value::Object(m.into_iter().collect())),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn arbitrary_text_never_panics(s in ".{0,200}") {
        let _ = parse_config(&s);
    }

    #[test]
    fn arbitrary_json_gives_structured_result(v in json_tree()) {
        match parse_config(&v.to_string()) {
            Ok(_) | Err(CliError::Config { .. }) => {}
            Err(e) => prop_assert!(false, "unexpected error kind: {e}"),
        }
    }

    #[test]
    fn fuzzed_wigner_jobs_run_or_fail_cleanly(
        n in 0usize..6,
        re in -3.0f64..3.0,
        n_mem in 2usize..30,
        half in 0.0f64..4.0,
        pts in 1usize..6,
        kind in 0u8..3,
    ) {
        let state = match kind {
            0 => json!({"kind": "fock", "n": n}),
            1 => json!({"kind": "coherent", "alpha": re}),
            _ => json!({"kind": "thermal", "n_th": half}),
        };
        let cfg = json!({
            "job": "wigner",
            "hilbert": {"n_mem": n_mem, "n_buf": 2},
            "wigner": {"state": state, "grid": {"re_min": -half, "re_max": half, "im_min": -half, "im_max": half, "n_re": pts, "n_im": pts}}
        });
        if let Ok(cfg) = parse_config(&cfg.to_string()) {
            let _ = catsim_cli::jobs::execute(&cfg, Path::new("."));
        }
    }
}
