//! The `nil` binary end to end: exit codes, JSON reports against the
//! shipped schema, round-tripping interpolant strings, and plots.

use std::path::PathBuf;
use std::process::{Command, Output};

use nil_core::formula::{parse_formula, parse_problem};
use nil_core::nil::symmetric_box;
use nil_core::verify::{check_interpolant, InterpolantCheck, SolverConfig};
use serde_json::Value;

fn bench_file(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("benchmarks").join(name)
}

fn nil(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nil")).args(args).env_remove("NIL_SEED").output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn schema() -> jsonschema::Validator {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../docs/run_report.schema.json");
    let schema: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    jsonschema::validator_for(&schema).expect("schema compiles")
}

fn report(o: &Output) -> Value {
    let v: Value = serde_json::from_slice(&o.stdout).expect("stdout is JSON");
    let errors: Vec<String> = schema().iter_errors(&v).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "report violates schema: {errors:?}");
    v
}

#[test]
fn dummy_solves_to_the_half_line() {
    let f = bench_file("dummy.nil");
    let o = nil(&["solve", f.to_str().unwrap(), "--json"]);
    assert_eq!(code(&o), 0);
    let r = report(&o);
    assert_eq!(r["outcome"], "Interpolant");
    assert_eq!(r["interpolant"], "x < 0");
    assert_eq!(r["seed"], 42);
}

#[test]
fn interpolant_strings_round_trip_through_the_verifier() {
    for name in ["parallel-parabola.nil", "tacas16.nil", "sharper-1.nil"] {
        let f = bench_file(name);
        let o = nil(&["solve", f.to_str().unwrap(), "--json"]);
        assert_eq!(code(&o), 0, "{name}");
        let r = report(&o);
        let problem = parse_problem(&std::fs::read_to_string(&f).unwrap()).unwrap();
        let i = parse_formula(r["interpolant"].as_str().unwrap(), &problem.vars).unwrap();
        let bx = symmetric_box(&problem, r["certification_box"].as_f64().unwrap());
        assert_eq!(check_interpolant(&problem, &i, &bx, &SolverConfig::default(), 1), InterpolantCheck::Valid, "{name}");
    }
}

#[test]
fn exit_codes_follow_the_outcome() {
    let t = bench_file("transcendental.nil");
    let o = nil(&["solve", t.to_str().unwrap(), "--degree", "3", "--json"]);
    assert_eq!(code(&o), 2);
    assert_eq!(report(&o)["outcome"], "NoPolynomialInterpolant");

    let dir = std::env::temp_dir().join(format!("nil-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let same = dir.join("same.nil");
    std::fs::write(&same, "vars x; phi: x > 0; psi: x > 0; degree: 1;").unwrap();
    let o = nil(&["solve", same.to_str().unwrap(), "--json"]);
    assert_eq!(code(&o), 1);
    let r = report(&o);
    assert_eq!(r["outcome"], "NotDisjoint");
    assert!(r["witness"].is_array());

    let d = bench_file("dummy.nil");
    let o = nil(&["solve", d.to_str().unwrap(), "--degree", "0", "--json"]);
    assert_eq!(code(&o), 64);
    let e: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(e["error"], "config");

    assert_eq!(code(&nil(&["solve", d.to_str().unwrap(), "--mode", "fast"])), 64);
    assert_eq!(code(&nil(&["solve", dir.join("missing.nil").to_str().unwrap()])), 64);
    assert_eq!(code(&nil(&["--help"])), 0);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn env_seed_overrides_the_flag() {
    let d = bench_file("dummy.nil");
    let o = Command::new(env!("CARGO_BIN_EXE_nil"))
        .args(["solve", d.to_str().unwrap(), "--seed", "5", "--json"])
        .env("NIL_SEED", "9")
        .output()
        .unwrap();
    assert_eq!(report(&o)["seed"], 9);
}

#[test]
fn sweep_stops_at_the_first_working_degree() {
    let f = bench_file("parallel-parabola.nil");
    let o = nil(&["solve", f.to_str().unwrap(), "--sweep-degree", "1..3", "--json"]);
    assert_eq!(code(&o), 0);
    assert_eq!(report(&o)["degree"], 2);
}

#[test]
fn bench_lists_and_runs_single_cases() {
    let o = nil(&["bench", "--list"]);
    assert_eq!(code(&o), 0);
    let listed = String::from_utf8(o.stdout).unwrap();
    assert!(listed.lines().any(|l| l == "TACAS16"));
    assert!(!listed.contains("stretch"));

    let o = nil(&["bench", "--case", "TACAS16", "--json"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r["passed"], true);
    assert_eq!(r["verified"], true);

    assert_eq!(code(&nil(&["bench", "--case", "Nonesuch"])), 64);
}

#[test]
fn plots_are_svg_with_all_layers() {
    let f = bench_file("tacas16.nil");
    let out = std::env::temp_dir().join(format!("nil-plot-{}.svg", std::process::id()));
    let o = nil(&["solve", f.to_str().unwrap(), "--plot", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let svg = std::fs::read_to_string(&out).unwrap();
    std::fs::remove_file(&out).ok();
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    for class in ["phi", "psi", "interpolant", "positive", "negative", "support"] {
        assert!(svg.contains(&format!(r#"class="{class}""#)), "missing {class}");
    }
}
