use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gbsval"))
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn body(text: &str) -> String {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| format!("{l}\n"))
        .collect()
}

fn run(args: &[&str]) -> Output {
    bin()
        .args(args)
        .env_remove("GBSVAL_THREADS")
        .output()
        .unwrap()
}

const PHASE_SPACE: &str = r#"{
    "modes": 6, "inputs": 3, "r": 0.4, "epsilon": 0.1, "eta": 0.8,
    "detector": {"kind": "click", "k": 2},
    "estimator": {"method": "phase_space", "e_s": 20000, "grid": "full"},
    "seeds": {"unitary": 5, "sampling": 6}
}"#;

const EXACT: &str = r#"{
    "modes": 4, "inputs": 2, "r": 0.4, "epsilon": 0.1, "eta": 0.8,
    "detector": {"kind": "pnr"},
    "estimator": {"method": "exact", "max_clicks": 6},
    "seeds": {"unitary": 5, "sampling": 6},
    "classical": {"class": "thermal", "samples": 20000},
    "bayes": {"class": "squashed", "draws": 20000}
}"#;

#[test]
fn orbit_csv_is_byte_identical_across_threads() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "ps.json", PHASE_SPACE);
    let mut bodies = Vec::new();
    for threads in ["1", "3", "1"] {
        let out = dir
            .path()
            .join(format!("orbits_{threads}_{}.csv", bodies.len()));
        let o = run(&[
            "--threads",
            threads,
            "orbits",
            "-c",
            cfg.to_str().unwrap(),
            "-o",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let text = std::fs::read_to_string(&out).unwrap();
        assert!(text.starts_with("# gbsval"));
        bodies.push(body(&text));
    }
    assert_eq!(bodies[0], bodies[1]);
    assert_eq!(bodies[0], bodies[2]);
}

#[test]
fn environment_sets_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "exact.json", EXACT);
    let o = bin()
        .args(["orbits", "-c", cfg.to_str().unwrap()])
        .env("GBSVAL_THREADS", "2")
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout)
        .lines()
        .next()
        .unwrap()
        .contains("threads=2"));
    let bad = bin()
        .args(["orbits", "-c", cfg.to_str().unwrap()])
        .env("GBSVAL_THREADS", "lots")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let both = EXACT.replace("\"r\": 0.4", "\"r\": 0.4, \"n_ph\": 1.0");
    let cfg = write_config(dir.path(), "both.json", &both);
    let o = run(&["orbits", "-c", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("`r`"));
    let missing = run(&["orbits", "-c", "/nonexistent/config.json"]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn infeasible_scale_is_a_domain_error() {
    let dir = tempfile::tempdir().unwrap();
    let big = EXACT.replace(
        r#""method": "exact", "max_clicks": 6"#,
        r#""method": "direct", "n_s": 10, "max_clicks": 40"#,
    );
    let cfg = write_config(dir.path(), "big.json", &big);
    let o = run(&["orbits", "-c", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("phase_space"));
}

#[test]
fn bayes_swap_flips_sign() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "exact.json", EXACT);
    let value = |swap: bool| -> f64 {
        let mut args = vec!["bayes", "-c", cfg.to_str().unwrap()];
        if swap {
            args.push("--swap");
        }
        let o = run(&args);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let text = String::from_utf8(o.stdout).unwrap();
        let row = text.lines().find(|l| l.starts_with("bayes")).unwrap();
        row.split(',').nth(2).unwrap().parse().unwrap()
    };
    let (fwd, back) = (value(false), value(true));
    assert!(fwd > 0.0 && back < 0.0, "{fwd} {back}");
}

#[test]
fn classical_and_chi2_and_functional() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "exact.json", EXACT);
    let c = cfg.to_str().unwrap();
    let samples = run(&["classical-sample", "-c", c]);
    assert!(samples.status.success());
    let text = String::from_utf8(samples.stdout).unwrap();
    let total: u64 = body(&text)
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap().parse::<u64>().unwrap())
        .sum();
    assert_eq!(total, 20000);
    let chi = run(&["chi2", "-c", c]);
    assert!(
        chi.status.success(),
        "{}",
        String::from_utf8_lossy(&chi.stderr)
    );
    assert!(String::from_utf8_lossy(&chi.stdout).contains("\nchi2,0,"));
    let f = run(&["functional", "-c", c, "--pattern", "0,0,0,0"]);
    assert!(f.status.success());
    let wrong = run(&["functional", "-c", c, "--pattern", "0,1"]);
    assert_eq!(wrong.status.code(), Some(2));
}

#[test]
fn conformance_suites_pass() {
    let o = run(&["conformance"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(body(&text)
        .lines()
        .skip(1)
        .all(|l| l.split(',').nth(1) == Some("true")));
}
