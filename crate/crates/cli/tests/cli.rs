//! End-to-end runs of the `cde` binary on the bundled instances.

use std::path::PathBuf;
use std::process::{Command, Output};

use cde_cli::commands::{self, SolveOpts};
use cde_cli::io::{instance_json, parse_instance};
use cde_core::random_instance;
use proptest::prelude::*;

fn instance(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../instances")
        .join(name)
}

const SEVEN: &str = "four_clients_seven_packets.json";
const EIGHT: &str = "four_clients_eight_packets.json";
const TEN: &str = "five_clients_ten_packets.json";

fn cde(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cde"))
        .args(args)
        .env_remove("CDE_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn path(name: &str) -> String {
    instance(name).to_string_lossy().into_owned()
}

#[test]
fn solve_seven_packets() {
    let o = cde(&["solve", &path(SEVEN), "--tie-break", "paper-trace"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "alpha=5 rates=3,2,0,0\n");
}

#[test]
fn solve_eight_packets_and_verify() {
    let o = cde(&[
        "solve",
        &path(EIGHT),
        "--tie-break",
        "paper-trace",
        "--verify",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.starts_with("alpha=6 rates=2,2,1,1\n"), "{out}");
    assert!(out.contains("optimal=true"), "{out}");
}

#[test]
fn solve_ten_packets() {
    let o = cde(&["solve", &path(TEN)]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("alpha=7 "));
}

#[test]
fn exact_start_below_optimum_raises_once() {
    let o = cde(&["solve", &path(SEVEN), "--alpha", "4", "--trace"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.starts_with("alpha=5 "), "{out}");
    let raises: Vec<&str> = out.lines().filter(|l| l.contains("alpha_raised")).collect();
    assert_eq!(raises.len(), 1, "{out}");
    assert!(raises[0].starts_with("alpha_raised 4->5 "), "{}", raises[0]);
}

#[test]
fn verify_reports_violated_cut() {
    let o = cde(&["verify", &path(SEVEN), "--rates", "1,2,1,1"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(
        stdout(&o),
        "feasible=false violated X={1} required 2 actual 1\n"
    );
    let ok = cde(&["verify", &path(SEVEN), "--rates", "3,2,0,0", "--optimal"]);
    assert_eq!(ok.status.code(), Some(0));
}

#[test]
fn fractional_solver() {
    let o = cde(&["dv", &path(SEVEN)]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("rates=7/3,4/3,1/3,1/3 integral=false"));
    let o = cde(&["dv", &path(EIGHT), "--excess", "smallest-block", "--trace"]);
    assert!(stdout(&o).starts_with("rates=2,2,1,1 integral=true"));
    assert!(stdout(&o).contains("mac S="));
}

#[test]
fn oracle_alpha() {
    let o = cde(&["oracle", "alpha", &path(EIGHT)]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("alpha_star=6 "));
}

#[test]
fn json_output_parses() {
    let o = cde(&["--json", "solve", &path(SEVEN), "--trace"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["alpha"], 5);
    assert!(v["trace"]["events"].is_array());
}

#[test]
fn simulate_optimal_rates() {
    let o = cde(&[
        "simulate",
        &path(SEVEN),
        "--rates",
        "3,2,0,0",
        "--trials",
        "20",
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("successes=20/20"));
    let bad = cde(&[
        "simulate",
        &path(SEVEN),
        "--rates",
        "1,2,1,1",
        "--trials",
        "5",
    ]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn invalid_inputs_exit_one() {
    let dir = std::env::temp_dir().join(format!("cde-cli-test-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let uncovered = dir.join("uncovered.json");
    std::fs::write(&uncovered, r#"{"L":3,"has_sets":[[1],[2]]}"#).unwrap();
    let garbage = dir.join("garbage.json");
    std::fs::write(&garbage, "not json").unwrap();
    for f in [&uncovered, &garbage, &dir.join("missing.json")] {
        let o = cde(&["solve", &f.to_string_lossy()]);
        assert_eq!(o.status.code(), Some(1), "{}", f.display());
        assert!(!o.stderr.is_empty());
    }
    let o = cde(&["verify", &path(SEVEN), "--rates", "1,2"]);
    assert_eq!(o.status.code(), Some(1));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn bench_single_cell() {
    let args = ["bench", "--clients", "5..5", "--reps", "1", "--no-timing"];
    let a = cde(&args);
    assert_eq!(a.status.code(), Some(0));
    let text = stdout(&a);
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows.len(), 2, "{text}");
    assert_eq!(rows[0], "K,L,rep,seed,alpha_star,gamma_count,wall_ns");
    assert!(rows[1].starts_with("5,50,0,") && rows[1].ends_with(",0"));
    assert_eq!(a.stdout, cde(&args).stdout);
}

#[test]
fn bench_rows_are_stable_apart_from_timing() {
    let strip = |o: &Output| -> Vec<String> {
        stdout(o)
            .lines()
            .filter(|l| !l.starts_with('#'))
            .map(|l| l.rsplit_once(',').unwrap().0.to_string())
            .collect()
    };
    let args = [
        "bench",
        "--clients",
        "4..6",
        "--reps",
        "2",
        "--packets",
        "12",
        "--seed",
        "9",
    ];
    assert_eq!(strip(&cde(&args)), strip(&cde(&args)));
}

#[test]
fn seed_comes_from_environment() {
    let run = |seed: &str| {
        Command::new(env!("CARGO_BIN_EXE_cde"))
            .args(["gen", "--clients", "4", "--packets", "9"])
            .env("CDE_SEED", seed)
            .output()
            .unwrap()
            .stdout
    };
    assert_eq!(
        run("3"),
        cde(&["gen", "--clients", "4", "--packets", "9", "--seed", "3"]).stdout
    );
    assert_ne!(run("3"), run("4"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn generated_instances_round_trip(k in 2usize..7, l in 1usize..15, seed in any::<u64>()) {
        let inst = random_instance(k, l, 0.5, seed).unwrap();
        let text = instance_json(&inst);
        let back = parse_instance(&text, std::path::Path::new("generated")).unwrap();
        prop_assert_eq!(&back, &inst);
        let opts = SolveOpts::default();
        prop_assert_eq!(commands::solve(&inst, &opts).unwrap(), commands::solve(&back, &opts).unwrap());
    }
}
